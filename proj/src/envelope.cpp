#include "isocone/envelope.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_map>

#include "isocone/error.hpp"
#include "isocone/parallel.hpp"
#include "isocone/quadrature.hpp"

namespace isocone {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec2 project_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const double l2 = norm2(d);
  if (l2 == 0.0) return a;
  const double t = std::clamp(dot(p - a, d) / l2, 0.0, 1.0);
  return a + d * t;
}

double distance_segment(Vec2 p, Vec2 a, Vec2 b) { return norm(p - project_segment(p, a, b)); }

/// Uniform bucket grid over a point cloud for nearest-neighbour queries.
class PointIndex {
 public:
  PointIndex(const std::vector<Vec2>& pts, double cell) : pts_(pts) {
    if (pts_.empty()) return;
    lo_ = hi_ = pts_[0];
    for (const Vec2& p : pts_) {
      lo_.x = std::min(lo_.x, p.x), lo_.y = std::min(lo_.y, p.y);
      hi_.x = std::max(hi_.x, p.x), hi_.y = std::max(hi_.y, p.y);
    }
    const double ext = std::max(hi_.x - lo_.x, hi_.y - lo_.y);
    cell_ = std::max(cell, ext / 2048.0 + 1e-300);
    if (!(cell_ > 0.0)) cell_ = 1.0;
    nx_ = static_cast<int>((hi_.x - lo_.x) / cell_) + 1;
    ny_ = static_cast<int>((hi_.y - lo_.y) / cell_) + 1;
    start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    for (const Vec2& p : pts_) ++start_[key(p) + 1];
    for (std::size_t k = 1; k < start_.size(); ++k) start_[k] += start_[k - 1];
    items_.resize(pts_.size());
    std::vector<int> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < pts_.size(); ++i) items_[fill[key(pts_[i])]++] = static_cast<int>(i);
  }

  /// Indices of the k nearest points (ascending distance, ties by index).
  std::vector<int> nearest(Vec2 q, std::size_t k) const {
    std::vector<std::pair<double, int>> found;
    const int ci = cx(q.x), cj = cy(q.y);
    for (int ring = 0;; ++ring) {
      for (int j = cj - ring; j <= cj + ring; ++j)
        for (int i = ci - ring; i <= ci + ring; ++i) {
          if (std::max(std::abs(i - ci), std::abs(j - cj)) != ring) continue;
          if (i < 0 || j < 0 || i >= nx_ || j >= ny_) continue;
          const std::size_t c = static_cast<std::size_t>(j) * nx_ + i;
          for (int s = start_[c]; s < start_[c + 1]; ++s)
            found.emplace_back(norm2(pts_[items_[s]] - q), items_[s]);
        }
      // Points outside the scanned square are at least ring*cell away.
      if (found.size() >= k) {
        std::sort(found.begin(), found.end());
        const double reach = ring * cell_;
        if (found[k - 1].first <= reach * reach) break;
      }
      if (ring > nx_ + ny_) break;
    }
    std::sort(found.begin(), found.end());
    std::vector<int> out;
    for (std::size_t i = 0; i < std::min(k, found.size()); ++i) out.push_back(found[i].second);
    return out;
  }

 private:
  int cx(double x) const { return std::clamp(static_cast<int>(std::floor((x - lo_.x) / cell_)), 0, nx_ - 1); }
  int cy(double y) const { return std::clamp(static_cast<int>(std::floor((y - lo_.y) / cell_)), 0, ny_ - 1); }
  std::size_t key(Vec2 p) const { return static_cast<std::size_t>(cy(p.y)) * nx_ + cx(p.x); }

  const std::vector<Vec2>& pts_;
  Vec2 lo_{0, 0}, hi_{0, 0};
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<int> start_, items_;
};

std::vector<Vec2> grid_points(const SlopeGrid& g) {
  std::vector<Vec2> pts(g.size());
  for (std::size_t m = 0; m < g.size(); ++m) pts[m] = g.at(m);
  return pts;
}

}  // namespace

// ------------------------------------------------------------ SlopeBody

SlopeBody SlopeBody::polygon(std::vector<Vec2> v) {
  if (v.size() < 2) throw Error(Errc::invalid_argument, "slope polygon needs at least two vertices");
  for (const Vec2& p : v)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error(Errc::invalid_argument, "non-finite slope vertex");
  if (v.size() >= 3) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Vec2 a = v[i], b = v[(i + 1) % v.size()], c = v[(i + 2) % v.size()];
      if (cross(b - a, c - b) <= 0.0)
        throw Error(Errc::invalid_argument, "slope polygon must be strictly convex and counterclockwise");
    }
  } else if (norm(v[1] - v[0]) == 0.0) {
    throw Error(Errc::invalid_argument, "degenerate slope segment");
  }
  SlopeBody k(Cone::whole_plane());
  k.vertices_ = std::move(v);
  return k;
}

SlopeBody SlopeBody::sector_disk(const Cone& cone, double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw Error(Errc::invalid_argument, "sector-disk radius must be positive");
  SlopeBody k(cone);
  k.rho_ = rho;
  return k;
}

SlopeBody SlopeBody::square(double s) {
  if (!(s > 0.0)) throw Error(Errc::invalid_argument, "square half side must be positive");
  return polygon({{-s, -s}, {s, -s}, {s, s}, {-s, s}});
}

double SlopeBody::support(Vec2 v) const {
  if (is_polygon()) {
    double best = -kInf;
    for (const Vec2& p : vertices_) best = std::max(best, dot(v, p));
    return best;
  }
  const double nv = norm(v);
  if (cone_.is_whole_plane()) return rho_ * nv;
  double best = std::max({0.0, rho_ * dot(v, cone_.ray_lo()), rho_ * dot(v, cone_.ray_hi())});
  if (nv > 0.0 && cone_.contains(v, 0.0)) best = std::max(best, rho_ * nv);
  return best;
}

double support_function(const SlopeBody& k, Vec2 v) { return k.support(v); }

bool SlopeBody::contains(Vec2 xi, double tol) const { return distance(xi) <= tol; }

Vec2 SlopeBody::project(Vec2 p) const {
  if (is_polygon()) {
    const std::size_t n = vertices_.size();
    if (n >= 3) {
      bool inside = true;
      for (std::size_t i = 0; i < n && inside; ++i)
        inside = cross(vertices_[(i + 1) % n] - vertices_[i], p - vertices_[i]) >= 0.0;
      if (inside) return p;
    }
    Vec2 best = vertices_[0];
    double bd = kInf;
    const std::size_t edges = n >= 3 ? n : 1;
    for (std::size_t i = 0; i < edges; ++i) {
      const Vec2 q = project_segment(p, vertices_[i], vertices_[(i + 1) % n]);
      if (norm(q - p) < bd) bd = norm(q - p), best = q;
    }
    return best;
  }
  const double np = norm(p);
  if (cone_.is_whole_plane()) return np <= rho_ ? p : p * (rho_ / np);
  if (cone_.contains(p, 0.0)) return np <= rho_ ? p : p * (rho_ / np);
  const Vec2 a = project_segment(p, {0, 0}, cone_.ray_lo() * rho_);
  const Vec2 b = project_segment(p, {0, 0}, cone_.ray_hi() * rho_);
  return norm(a - p) <= norm(b - p) ? a : b;
}

double SlopeBody::area() const {
  if (is_polygon()) {
    double s = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i) s += cross(vertices_[i], vertices_[(i + 1) % vertices_.size()]);
    return 0.5 * std::abs(s);
  }
  return 0.5 * rho_ * rho_ * cone_.opening();
}

std::vector<Vec2> SlopeBody::normal_cone(Vec2 xi, double tol) const {
  std::vector<Vec2> g;
  auto push = [&](Vec2 v) {
    v = v / norm(v);
    for (const Vec2& e : g)
      if (norm(e - v) <= 1e-12) return;
    g.push_back(v);
  };
  if (is_segment()) {
    const Vec2 a = vertices_[0], b = vertices_[1];
    if (distance_segment(xi, a, b) > tol) return g;
    const Vec2 d = (b - a) / norm(b - a);
    push(perp(d));
    push(perp(d) * -1.0);
    if (norm(xi - a) <= tol) push(d * -1.0);
    if (norm(xi - b) <= tol) push(d);
    return g;
  }
  if (is_polygon()) {
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = vertices_[i], b = vertices_[(i + 1) % n];
      if (distance_segment(xi, a, b) <= tol) push(Vec2{(b - a).y, -(b - a).x});
    }
    return g;
  }
  const double nx = norm(xi);
  if (nx >= rho_ - tol && nx > 0.0) push(xi);
  if (!cone_.is_whole_plane()) {
    if (dot(xi, cone_.inward_normal_lo()) <= tol) push(cone_.inward_normal_lo() * -1.0);
    if (dot(xi, cone_.inward_normal_hi()) <= tol) push(cone_.inward_normal_hi() * -1.0);
  }
  return g;
}

// ------------------------------------------------------------ SlopeGrid

SlopeGrid make_slope_grid(const SlopeBody& k, int n_radial, int n_angular) {
  if (n_radial < 2 || n_angular < 3) throw Error(Errc::invalid_argument, "slope grid too coarse");
  SlopeGrid g;
  auto add = [&](Vec2 p, double cell) {
    g.x.push_back(p.x);
    g.y.push_back(p.y);
    g.cell.push_back(cell);
  };
  if (!k.is_polygon()) {
    const Cone& c = k.cone();
    const double rho = k.rho(), dr = rho / n_radial;
    const auto ang = c.arc_grid(n_angular);
    const std::vector<double> q = c.is_whole_plane() ? std::vector<double>(n_angular, 2.0 * kPi / n_angular)
                                                     : trapezoid_weights(n_angular, c.angle_lo(), c.angle_hi());
    add({0, 0}, 0.5 * c.opening() * (0.5 * dr) * (0.5 * dr));
    for (int i = 1; i <= n_radial; ++i) {
      const double r = i * dr, r0 = r - 0.5 * dr, r1 = std::min(rho, r + 0.5 * dr);
      const double ring = 0.5 * (r1 * r1 - r0 * r0);
      for (int j = 0; j < n_angular; ++j) add(unit(ang[j]) * r, ring * q[j]);
    }
    const double arc = c.is_whole_plane() ? 2.0 * kPi / n_angular : c.opening() / (n_angular - 1);
    g.spacing = std::max(dr, rho * arc);
    return g;
  }
  const auto& v = k.vertices();
  Vec2 lo = v[0], hi = v[0];
  for (const Vec2& p : v) {
    lo.x = std::min(lo.x, p.x), lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x), hi.y = std::max(hi.y, p.y);
  }
  const double step = std::max(hi.x - lo.x, hi.y - lo.y) / n_radial;
  g.spacing = step;
  std::unordered_map<long long, int> seen;
  auto key = [&](Vec2 p) {
    const long long a = std::llround((p.x - lo.x) / step * 64.0), b = std::llround((p.y - lo.y) / step * 64.0);
    return a * 4000037LL + b;
  };
  auto add_unique = [&](Vec2 p, double cell) {
    if (seen.emplace(key(p), static_cast<int>(g.size())).second) add(p, cell);
  };
  for (const Vec2& p : v) add_unique(p, 0.0);
  const std::size_t edges = v.size() >= 3 ? v.size() : 1;
  for (std::size_t e = 0; e < edges; ++e) {
    const Vec2 a = v[e], b = v[(e + 1) % v.size()];
    const int n = std::max(1, static_cast<int>(std::ceil(norm(b - a) / step)));
    for (int i = 1; i < n; ++i) add_unique(a + (b - a) * (static_cast<double>(i) / n), 0.0);
  }
  if (!k.is_segment()) {
    const int nx = static_cast<int>(std::floor((hi.x - lo.x) / step + 1e-9));
    const int ny = static_cast<int>(std::floor((hi.y - lo.y) / step + 1e-9));
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        const Vec2 p{lo.x + i * step, lo.y + j * step};
        if (k.contains(p, 1e-12 * step)) add_unique(p, 0.0);
      }
  }
  // Area elements: Voronoi-free surrogate, the body's area shared uniformly.
  const double each = k.area() / static_cast<double>(g.size());
  std::fill(g.cell.begin(), g.cell.end(), each);
  return g;
}

// ------------------------------------------------------ conjugate / envelope

RestrictedConjugate restricted_conjugate(const std::vector<Vec2>& pts, const std::vector<double>& u,
                                         const SlopeGrid& grid, const ConjugateRefiner& refine) {
  if (pts.empty()) throw Error(Errc::invalid_argument, "restricted conjugate needs sample points");
  if (pts.size() != u.size()) throw Error(Errc::invalid_argument, "sample/value size mismatch");
  for (double v : u)
    if (!std::isfinite(v)) throw Error(Errc::invalid_argument, "non-finite sample value");
  const std::size_t n = pts.size();
  std::vector<double> px(n), py(n);
  for (std::size_t i = 0; i < n; ++i) px[i] = pts[i].x, py[i] = pts[i].y;
  RestrictedConjugate c;
  c.a.assign(grid.size(), 0.0);
  c.arg.assign(grid.size(), 0);
  parallel_for(grid.size(), [&](std::size_t m) {
    const double sx = grid.x[m], sy = grid.y[m];
    double best = kInf;
    std::size_t bi = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = u[i] - sx * px[i] - sy * py[i];
      if (v < best) best = v, bi = i;
    }
    if (refine) best = std::min(best, refine(static_cast<int>(bi), {sx, sy}, best));
    c.a[m] = best;
    c.arg[m] = static_cast<int>(bi);
  });
  return c;
}

EnvelopeField k_envelope(const RestrictedConjugate& conj, const SlopeGrid& grid, const EvalBox& box) {
  if (box.nx < 1 || box.ny < 1 || !(box.h > 0.0)) throw Error(Errc::invalid_argument, "empty evaluation box");
  if (conj.a.size() != grid.size()) throw Error(Errc::invalid_argument, "conjugate/slope grid mismatch");
  EnvelopeField f;
  f.box = box;
  f.grid = &grid;
  const std::size_t nodes = static_cast<std::size_t>(box.nx) * box.ny, M = grid.size();
  f.phi.assign(nodes, 0.0);
  f.arg.assign(nodes, 0);
  parallel_for(nodes, [&](std::size_t k) {
    const Vec2 x = box.node(static_cast<int>(k % box.nx), static_cast<int>(k / box.nx));
    double best = -kInf;
    std::size_t bm = 0;
    for (std::size_t m = 0; m < M; ++m) {
      const double v = conj.a[m] + grid.x[m] * x.x + grid.y[m] * x.y;
      if (v > best) best = v, bm = m;  // strict: lowest index wins ties
    }
    f.phi[k] = best;
    f.arg[k] = static_cast<int>(bm);
  });
  return f;
}

double EnvelopeField::value_at(Vec2 p, const RestrictedConjugate& conj) const {
  double best = -kInf;
  for (std::size_t m = 0; m < grid->size(); ++m) best = std::max(best, conj.a[m] + grid->x[m] * p.x + grid->y[m] * p.y);
  return best;
}

Sym2 EnvelopeField::hessian(int i, int j) const {
  const double h = box.h;
  auto v = [&](int a, int b) { return phi[index(a, b)]; };
  const double xx = (v(i + 1, j) - 2 * v(i, j) + v(i - 1, j)) / (h * h);
  const double yy = (v(i, j + 1) - 2 * v(i, j) + v(i, j - 1)) / (h * h);
  const double xy = (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4 * h * h);
  return {xx, xy, yy};
}

Vec2 EnvelopeField::gradient(int i, int j) const {
  const double h = box.h;
  return {(phi[index(i + 1, j)] - phi[index(i - 1, j)]) / (2 * h),
          (phi[index(i, j + 1)] - phi[index(i, j - 1)]) / (2 * h)};
}

std::string EnvelopeField::to_csv() const {
  std::string out = "x,y,phi,xi1,xi2\n";
  char buf[160];
  for (int j = 0; j < box.ny; ++j)
    for (int i = 0; i < box.nx; ++i) {
      const Vec2 x = box.node(i, j), s = xi_star(i, j);
      std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g\n", x.x, x.y, phi[index(i, j)], s.x, s.y);
      out += buf;
    }
  return out;
}

// ---------------------------------------------------------- refinement

namespace {

/// Refines the maximizer at each point given its grid argmax.
RefinedGradient refine_points(const std::vector<Vec2>& xs, const std::vector<double>& phi0, const std::vector<int>& arg,
                              const RestrictedConjugate& conj, const SlopeGrid& g, const SlopeBody& k) {
  const std::vector<Vec2> pts = grid_points(g);
  const PointIndex index(pts, g.spacing);
  const std::size_t nodes = xs.size();
  RefinedGradient out;
  out.grad.assign(nodes, {0, 0});
  out.phi = phi0;
  std::vector<std::vector<int>> stencil(g.size());
  std::vector<char> have(g.size(), 0);
  for (int m : arg)
    if (!have[m]) {
      have[m] = 1;
      // Nearest sample to each node of a 5x5 lattice around xi_m: a spread
      // stencil even where the polar grid is strongly anisotropic.
      auto& st = stencil[m];
      for (int q = -2; q <= 2; ++q)
        for (int p = -2; p <= 2; ++p) {
          const Vec2 t = pts[m] + Vec2{p * g.spacing, q * g.spacing};
          const int near = index.nearest(t, 1)[0];
          if (norm(pts[near] - t) > 0.75 * g.spacing) continue;
          if (std::find(st.begin(), st.end(), near) == st.end()) st.push_back(near);
        }
    }
  parallel_for(nodes, [&](std::size_t n) {
    const int m0 = arg[n];
    const Vec2 x = xs[n];
    const Vec2 c = pts[m0];
    const double s = g.spacing;
    out.grad[n] = c;
    const auto& st = stencil[m0];
    if (st.size() < 6) return;
    // Fit G(d) = c0 + b.d + (A d.d)/2 in scaled offsets d = (xi - c)/s.
    double N[6][6] = {}, r[6] = {};
    for (int m : st) {
      const Vec2 d = (pts[m] - c) / s;
      const double phi_m = conj.a[m] + dot(pts[m], x);
      const double row[6] = {1.0, d.x, d.y, 0.5 * d.x * d.x, d.x * d.y, 0.5 * d.y * d.y};
      for (int a = 0; a < 6; ++a) {
        r[a] += row[a] * (phi_m - phi0[n]);
        for (int b = 0; b < 6; ++b) N[a][b] += row[a] * row[b];
      }
    }
    for (int col = 0; col < 6; ++col) {
      int best = col;
      for (int rr = col + 1; rr < 6; ++rr)
        if (std::abs(N[rr][col]) > std::abs(N[best][col])) best = rr;
      if (std::abs(N[best][col]) < 1e-12) return;
      std::swap(N[col], N[best]);
      std::swap(r[col], r[best]);
      for (int rr = col + 1; rr < 6; ++rr) {
        const double t = N[rr][col] / N[col][col];
        for (int cc = col; cc < 6; ++cc) N[rr][cc] -= t * N[col][cc];
        r[rr] -= t * r[col];
      }
    }
    double z[6];
    for (int col = 5; col >= 0; --col) {
      double v = r[col];
      for (int cc = col + 1; cc < 6; ++cc) v -= N[col][cc] * z[cc];
      z[col] = v / N[col][col];
    }
    const Sym2 A{z[3], z[4], z[5]};
    if (!(A.xx < 0.0 && A.det() > 0.0)) return;
    // Vertex: A d = -b.
    const double det = A.det();
    const Vec2 d{(-z[1] * A.yy + z[2] * A.xy) / det, (z[1] * A.xy - z[2] * A.xx) / det};
    if (norm(d) > 2.5) return;
    const Vec2 xi = k.project(c + d * s);
    const Vec2 e = (xi - c) / s;
    const double val = z[0] + z[1] * e.x + z[2] * e.y + 0.5 * (A.xx * e.x * e.x + 2 * A.xy * e.x * e.y + A.yy * e.y * e.y);
    out.grad[n] = xi;
    out.phi[n] = phi0[n] + std::max(0.0, val);
  });
  return out;
}

}  // namespace

RefinedGradient refine_gradient(const EnvelopeField& f, const RestrictedConjugate& conj, const SlopeBody& k) {
  std::vector<Vec2> xs(f.phi.size());
  for (std::size_t n = 0; n < xs.size(); ++n) xs[n] = f.box.node(static_cast<int>(n % f.box.nx), static_cast<int>(n / f.box.nx));
  return refine_points(xs, f.phi, f.arg, conj, *f.grid, k);
}

RefinedGradient envelope_gradient_at(const std::vector<Vec2>& xs, const RestrictedConjugate& conj, const SlopeGrid& g,
                                     const SlopeBody& k) {
  std::vector<double> phi(xs.size());
  std::vector<int> arg(xs.size());
  parallel_for(xs.size(), [&](std::size_t n) {
    double best = -kInf;
    std::size_t bm = 0;
    for (std::size_t m = 0; m < g.size(); ++m) {
      const double v = conj.a[m] + g.x[m] * xs[n].x + g.y[m] * xs[n].y;
      if (v > best) best = v, bm = m;
    }
    phi[n] = best;
    arg[n] = static_cast<int>(bm);
  });
  return refine_points(xs, phi, arg, conj, g, k);
}

// ------------------------------------------------------------- checks

double coverage_distance(const SlopeGrid& grid, const std::vector<int>& cloud) {
  if (cloud.empty()) return kInf;
  std::vector<int> uniq(cloud);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<Vec2> cp(uniq.size());
  for (std::size_t i = 0; i < uniq.size(); ++i) cp[i] = grid.at(uniq[i]);
  const PointIndex index(cp, grid.spacing);
  std::vector<double> d(grid.size());
  parallel_for(grid.size(), [&](std::size_t m) { d[m] = norm(cp[index.nearest(grid.at(m), 1)[0]] - grid.at(m)); });
  return *std::max_element(d.begin(), d.end());
}

C11Report check_c11(const EnvelopeField& f, const std::vector<char>& mask) {
  C11Report r{0.0, 0.0, 0.0};
  const int nx = f.box.nx, ny = f.box.ny;
  const double h = f.box.h;
  double worst = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Vec2 a = f.xi_star(i, j);
      if (i + 1 < nx) r.lip_grad = std::max(r.lip_grad, norm(f.xi_star(i + 1, j) - a) / h);
      if (j + 1 < ny) r.lip_grad = std::max(r.lip_grad, norm(f.xi_star(i, j + 1) - a) / h);
      auto second = [&](int di, int dj) {
        const int i0 = i - di, j0 = j - dj, i1 = i + di, j1 = j + dj;
        if (i0 < 0 || j0 < 0 || i1 >= nx || j1 >= ny || i0 >= nx || j0 >= ny || i1 < 0 || j1 < 0) return;
        worst = std::min(worst, f.phi[f.index(i0, j0)] - 2 * f.phi[f.index(i, j)] + f.phi[f.index(i1, j1)]);
      };
      second(1, 0), second(0, 1), second(1, 1), second(1, -1);
    }
  r.convexity_violation = std::max(0.0, -worst);
  std::vector<int> cloud;
  for (std::size_t n = 0; n < f.arg.size(); ++n)
    if (mask.empty() || mask[n]) cloud.push_back(f.arg[n]);
  // The cloud is drawn from the slope samples, so one direction is zero.
  r.range_hausdorff = coverage_distance(*f.grid, cloud);
  return r;
}

// --------------------------------------------------------- contact data

ContactData contact_data(const std::vector<Vec2>& pts, const std::vector<double>& u, const std::vector<Sym2>& hess,
                         const SlopeBody& k, Vec2 xi, Vec2 x, double tol_contact) {
  if (pts.empty() || pts.size() != u.size()) throw Error(Errc::invalid_argument, "contact data needs matching samples");
  if (!hess.empty() && hess.size() != pts.size()) throw Error(Errc::invalid_argument, "hessian/sample size mismatch");
  if (!k.contains(xi, 1e-9)) throw Error(Errc::invalid_argument, "slope must lie in K");
  const auto [umin, umax] = std::minmax_element(u.begin(), u.end());
  const double range = *umax - *umin;
  const double tol = (tol_contact > 0.0 ? tol_contact : 1e-8) * (range > 0.0 ? range : 1.0);
  ContactData cd;
  double best = kInf;
  for (std::size_t i = 0; i < pts.size(); ++i) best = std::min(best, u[i] - dot(xi, pts[i]));
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (u[i] - dot(xi, pts[i]) <= best + tol) cd.contact.push_back(static_cast<int>(i));
  cd.normal_cone = k.normal_cone(xi);

  // Candidate contact points: extremes in eight directions plus the best values.
  std::vector<int> cand;
  auto keep = [&](int i) {
    if (std::find(cand.begin(), cand.end(), i) == cand.end()) cand.push_back(i);
  };
  for (int d = 0; d < 8; ++d) {
    const Vec2 dir = unit(d * kPi / 4);
    int arg = cd.contact[0];
    for (int i : cd.contact)
      if (dot(pts[i], dir) > dot(pts[arg], dir)) arg = i;
    keep(arg);
  }
  std::vector<int> by_value(cd.contact);
  std::stable_sort(by_value.begin(), by_value.end(),
                   [&](int a, int b) { return u[a] - dot(xi, pts[a]) < u[b] - dot(xi, pts[b]); });
  for (std::size_t i = 0; i < by_value.size() && cand.size() < 24; ++i) keep(by_value[i]);

  // Columns (s_i, 1) for contact points and (g, 0) for normal generators.
  struct Col {
    double c[3];
    int contact;  // -1 for a normal generator
    int gen;
  };
  std::vector<Col> cols;
  for (int i : cand) cols.push_back({{pts[i].x, pts[i].y, 1.0}, i, -1});
  for (std::size_t gi = 0; gi < cd.normal_cone.size(); ++gi)
    cols.push_back({{cd.normal_cone[gi].x, cd.normal_cone[gi].y, 0.0}, -1, static_cast<int>(gi)});
  const double rhs[3] = {x.x, x.y, 1.0};
  const double wtol = 1e-9 * (1.0 + norm(x));
  double best_res = kInf;
  std::vector<std::size_t> best_set;
  std::vector<double> best_coef;

  auto try_set = [&](const std::vector<std::size_t>& set) {
    bool any_contact = false;
    for (std::size_t s : set) any_contact |= cols[s].contact >= 0;
    if (!any_contact) return;
    const std::size_t p = set.size();
    // Least squares via normal equations (p <= 3).
    double M[3][3] = {}, b[3] = {};
    for (std::size_t a = 0; a < p; ++a) {
      for (int r = 0; r < 3; ++r) b[a] += cols[set[a]].c[r] * rhs[r];
      for (std::size_t c = 0; c < p; ++c)
        for (int r = 0; r < 3; ++r) M[a][c] += cols[set[a]].c[r] * cols[set[c]].c[r];
    }
    double z[3] = {0, 0, 0};
    if (p == 1) {
      if (M[0][0] <= 0.0) return;
      z[0] = b[0] / M[0][0];
    } else if (p == 2) {
      const double det = M[0][0] * M[1][1] - M[0][1] * M[1][0];
      if (std::abs(det) < 1e-14) return;
      z[0] = (b[0] * M[1][1] - b[1] * M[0][1]) / det;
      z[1] = (M[0][0] * b[1] - M[1][0] * b[0]) / det;
    } else {
      const double det = M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) -
                         M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
                         M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]);
      if (std::abs(det) < 1e-14) return;
      for (int c = 0; c < 3; ++c) {
        double T[3][3];
        for (int r = 0; r < 3; ++r)
          for (int q = 0; q < 3; ++q) T[r][q] = q == c ? b[r] : M[r][q];
        z[c] = (T[0][0] * (T[1][1] * T[2][2] - T[1][2] * T[2][1]) - T[0][1] * (T[1][0] * T[2][2] - T[1][2] * T[2][0]) +
                T[0][2] * (T[1][0] * T[2][1] - T[1][1] * T[2][0])) /
               det;
      }
    }
    for (std::size_t a = 0; a < p; ++a)
      if (z[a] < -1e-12) return;
    double res = 0.0;
    for (int r = 0; r < 3; ++r) {
      double v = -rhs[r];
      for (std::size_t a = 0; a < p; ++a) v += z[a] * cols[set[a]].c[r];
      res += v * v;
    }
    res = std::sqrt(res);
    if (res < best_res) best_res = res, best_set = set, best_coef.assign(z, z + p);
  };
  const std::size_t nc = cols.size();
  for (std::size_t a = 0; a < nc; ++a) {
    try_set({a});
    for (std::size_t b = a + 1; b < nc; ++b) {
      try_set({a, b});
      for (std::size_t c = b + 1; c < nc; ++c) try_set({a, b, c});
    }
  }
  cd.mu.assign(cd.normal_cone.size(), 0.0);
  cd.H = {0, 0, 0};
  if (best_res <= wtol) {
    cd.witness_found = true;
    for (std::size_t a = 0; a < best_set.size(); ++a) {
      const Col& col = cols[best_set[a]];
      const double coef = std::max(0.0, best_coef[a]);
      if (col.contact >= 0) {
        cd.lambda.emplace_back(col.contact, coef);
        if (!hess.empty()) cd.H = cd.H + hess[col.contact] * coef;
      } else {
        cd.mu[col.gen] = coef;
      }
    }
  }
  return cd;
}

}  // namespace isocone
