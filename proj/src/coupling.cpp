#include "isocone/coupling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "isocone/error.hpp"
#include "isocone/parallel.hpp"

namespace isocone {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Solves the n x n system in place (partial pivoting); false when singular.
template <int n>
bool solve_dense(double (&a)[n][n], double (&b)[n]) {
  for (int c = 0; c < n; ++c) {
    int p = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    if (std::abs(a[p][c]) < 1e-14) return false;
    std::swap(a[c], a[p]);
    std::swap(b[c], b[p]);
    for (int r = c + 1; r < n; ++r) {
      const double t = a[r][c] / a[c][c];
      for (int k = c; k < n; ++k) a[r][k] -= t * a[c][k];
      b[r] -= t * b[c];
    }
  }
  for (int c = n - 1; c >= 0; --c) {
    for (int k = c + 1; k < n; ++k) b[c] -= a[c][k] * b[k];
    b[c] /= a[c][c];
  }
  return true;
}

/// Vertex-patch quadratic fits blended by barycentric coordinates: a C0
/// function reproducing quadratics exactly, with pointwise gradient and Hessian.
class Reconstruction {
 public:
  Reconstruction(const TriMesh& m, const std::vector<double>& u) : m_(m) {
    const std::size_t nv = m.vertices.size(), nt = m.tris.size();
    std::vector<std::vector<int>> adj(nv);
    for (const auto& t : m.tris)
      for (int i = 0; i < 3; ++i) adj[t[i]].push_back(t[(i + 1) % 3]), adj[t[i]].push_back(t[(i + 2) % 3]);
    for (auto& a : adj) std::sort(a.begin(), a.end()), a.erase(std::unique(a.begin(), a.end()), a.end());
    fits_.resize(nv);
    parallel_for(nv, [&](std::size_t v) {
      std::vector<int> patch = adj[v];
      for (int w : adj[v]) patch.insert(patch.end(), adj[w].begin(), adj[w].end());
      patch.push_back(static_cast<int>(v));
      std::sort(patch.begin(), patch.end());
      patch.erase(std::unique(patch.begin(), patch.end()), patch.end());
      const Vec2 c = m.vertices[v];
      const double h = m.h;
      double N[6][6] = {}, r[6] = {};
      for (int p : patch) {
        const Vec2 d = (m.vertices[p] - c) / h;
        const double row[6] = {1.0, d.x, d.y, 0.5 * d.x * d.x, d.x * d.y, 0.5 * d.y * d.y};
        for (int a = 0; a < 6; ++a) {
          r[a] += row[a] * u[p];
          for (int b = 0; b < 6; ++b) N[a][b] += row[a] * row[b];
        }
      }
      Fit& f = fits_[v];
      f.center = c;
      if (solve_dense<6>(N, r)) {
        f.c = r[0];
        f.g = Vec2{r[1], r[2]} / h;
        f.H = Sym2{r[3], r[4], r[5]} * (1.0 / (h * h));
      } else {
        f.c = u[v];
      }
    });
    nbr_.assign(nt, {-1, -1, -1});
    std::map<std::pair<int, int>, std::pair<int, int>> edge;
    for (std::size_t t = 0; t < nt; ++t)
      for (int k = 0; k < 3; ++k) edge[{m.tris[t][(k + 1) % 3], m.tris[t][(k + 2) % 3]}] = {static_cast<int>(t), k};
    for (std::size_t t = 0; t < nt; ++t)
      for (int k = 0; k < 3; ++k) {
        const auto it = edge.find({m.tris[t][(k + 2) % 3], m.tris[t][(k + 1) % 3]});
        if (it != edge.end()) nbr_[t][k] = it->second.first;
      }
  }

  std::array<double, 3> bary(int t, Vec2 y) const {
    const auto& tr = m_.tris[t];
    const Vec2 a = m_.vertices[tr[0]], b = m_.vertices[tr[1]], c = m_.vertices[tr[2]];
    const double A = cross(b - a, c - a);
    return {cross(b - y, c - y) / A, cross(c - y, a - y) / A, cross(a - y, b - y) / A};
  }

  std::array<Vec2, 3> bary_grad(int t) const {
    const auto& tr = m_.tris[t];
    const Vec2 a = m_.vertices[tr[0]], b = m_.vertices[tr[1]], c = m_.vertices[tr[2]];
    const double A = cross(b - a, c - a);
    return {perp(c - b) / A, perp(a - c) / A, perp(b - a) / A};
  }

  double value(int t, Vec2 y) const {
    const auto l = bary(t, y);
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += l[i] * fits_[m_.tris[t][i]].value(y);
    return s;
  }

  Vec2 gradient(int t, Vec2 y) const {
    const auto l = bary(t, y);
    const auto gl = bary_grad(t);
    Vec2 g{0, 0};
    for (int i = 0; i < 3; ++i) {
      const Fit& f = fits_[m_.tris[t][i]];
      g = g + gl[i] * f.value(y) + f.gradient(y) * l[i];
    }
    return g;
  }

  Sym2 hessian(int t, Vec2 y) const {
    const auto l = bary(t, y);
    const auto gl = bary_grad(t);
    Sym2 H{0, 0, 0};
    for (int i = 0; i < 3; ++i) {
      const Fit& f = fits_[m_.tris[t][i]];
      const Vec2 q = f.gradient(y);
      H = H + f.H * l[i] + Sym2{2 * gl[i].x * q.x, gl[i].x * q.y + gl[i].y * q.x, 2 * gl[i].y * q.y};
    }
    return H;
  }

  /// Triangle containing y by walking from `hint`; -1 when y leaves the mesh.
  int locate(Vec2 y, int hint) const {
    int t = hint;
    const int limit = 4 * static_cast<int>(std::sqrt(static_cast<double>(m_.tris.size()))) + 64;
    for (int step = 0; step < limit; ++step) {
      const auto l = bary(t, y);
      int k = 0;
      for (int i = 1; i < 3; ++i)
        if (l[i] < l[k]) k = i;
      if (l[k] >= -1e-12) return t;
      t = nbr_[t][k];
      if (t < 0) return -1;
    }
    return -1;
  }

 private:
  struct Fit {
    Vec2 center{0, 0};
    double c = 0.0;
    Vec2 g{0, 0};
    Sym2 H{0, 0, 0};
    double value(Vec2 y) const {
      const Vec2 d = y - center;
      return c + dot(g, d) + 0.5 * dot(d, H.apply(d));
    }
    Vec2 gradient(Vec2 y) const { return g + H.apply(y - center); }
  };
  const TriMesh& m_;
  std::vector<Fit> fits_;
  std::vector<std::array<int, 3>> nbr_;
};

struct Samples {
  std::vector<Vec2> pts;
  std::vector<int> tri;
  std::vector<char> on_free;
};

/// Barycentric lattice of each triangle, shared vertices and edge points once.
Samples lattice_samples(const TriMesh& m, int level) {
  Samples s;
  std::vector<int> vertex_sample(m.vertices.size(), -1);
  std::map<std::pair<int, int>, std::vector<int>> edge_samples;
  std::vector<char> free_vertex(m.vertices.size(), 0);
  std::map<std::pair<int, int>, char> free_edge;
  for (const auto& e : m.boundary)
    if (e.tag == EdgeTag::free_part) {
      free_vertex[e.a] = free_vertex[e.b] = 1;
      free_edge[{std::min(e.a, e.b), std::max(e.a, e.b)}] = 1;
    }
  auto add = [&](Vec2 p, int t, bool f) {
    s.pts.push_back(p);
    s.tri.push_back(t);
    s.on_free.push_back(f ? 1 : 0);
    return static_cast<int>(s.pts.size()) - 1;
  };
  for (std::size_t t = 0; t < m.tris.size(); ++t) {
    const auto& tr = m.tris[t];
    const Vec2 P[3] = {m.vertices[tr[0]], m.vertices[tr[1]], m.vertices[tr[2]]};
    for (int i = 0; i < 3; ++i)
      if (vertex_sample[tr[i]] < 0) vertex_sample[tr[i]] = add(P[i], static_cast<int>(t), free_vertex[tr[i]]);
    for (int i = 0; i < 3; ++i) {
      const int a = tr[i], b = tr[(i + 1) % 3];
      const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
      if (edge_samples.count(key)) continue;
      auto& ids = edge_samples[key];
      const Vec2 pa = m.vertices[key.first], pb = m.vertices[key.second];
      for (int k = 1; k < level; ++k)
        ids.push_back(add(pa + (pb - pa) * (static_cast<double>(k) / level), static_cast<int>(t), free_edge.count(key) > 0));
    }
    for (int a = 1; a < level; ++a)
      for (int b = 1; a + b < level; ++b) {
        const int c = level - a - b;
        add((P[0] * a + P[1] * b + P[2] * c) / level, static_cast<int>(t), false);
      }
  }
  return s;
}

double clamp_weight(const HomWeight& w, Vec2 x) { return std::max(0.0, w.value(x)); }

/// (w(g)/w(x))^{1/α}; 0 when w(x) vanishes.
double weight_quotient(const HomWeight& w, Vec2 g, Vec2 x) {
  const double wx = clamp_weight(w, x);
  if (wx <= 1e-300) return 0.0;
  return std::pow(clamp_weight(w, g) / wx, 1.0 / w.alpha());
}

Sym2 positive_part(const Sym2& H) {
  double lo, hi;
  H.eigenvalues(lo, hi);
  if (lo >= 0.0) return H;
  if (hi <= 0.0) return {0, 0, 0};
  // Keep the eigenvector of hi.
  Vec2 v = std::abs(H.xy) > 1e-300 ? Vec2{hi - H.yy, H.xy} : (H.xx >= H.yy ? Vec2{1, 0} : Vec2{0, 1});
  v = v / norm(v);
  return Sym2{v.x * v.x, v.x * v.y, v.y * v.y} * hi;
}

}  // namespace

bool star_contains(const StarSet& e, Vec2 x, double tol) {
  const Cone& c = e.cone();
  if (!c.contains(x, tol)) return false;
  const double r = norm(x);
  if (r == 0.0) return true;
  double ang;
  if (c.is_whole_plane()) {
    ang = std::atan2(x.y, x.x);
    if (ang < 0.0) ang += 2.0 * kPi;
  } else {
    ang = c.angle_lo() + std::clamp(c.relative_angle(x), 0.0, c.opening());
  }
  return r <= e.radius_at(ang) + tol;
}

double polygon_area(const StarSet& e) {
  const int n = e.size();
  double a = 0.0;
  const int edges = e.cone().is_whole_plane() ? n : n - 1;
  for (int j = 0; j < edges; ++j) a += 0.5 * cross(e.boundary_point(j), e.boundary_point((j + 1) % n));
  return a;
}

double anisotropic_perimeter(const StarSet& e, const SlopeBody& k) {
  const int n = e.size();
  double p = 0.0;
  const int edges = e.cone().is_whole_plane() ? n : n - 1;
  for (int j = 0; j < edges; ++j) {
    const Vec2 a = e.boundary_point(j), b = e.boundary_point((j + 1) % n);
    const Vec2 d = b - a;
    p += k.support({d.y, -d.x});  // |d| h_K(ν) with ν the outward normal
  }
  return p;
}

double anisotropic_deficit(const StarSet& e, const SlopeBody& k) {
  return anisotropic_perimeter(e, k) / (2.0 * std::sqrt(k.area()) * std::sqrt(polygon_area(e))) - 1.0;
}

CouplingReport build_coupling(const StarSet& input, const CouplingMode& mode, const CouplingResolution& res) {
  if (!(res.mesh_h > 0.0) || !(res.eval_h > 0.0) || res.n_radial < 2 || res.n_angular < 3 || res.sample_level < 1)
    throw Error(Errc::invalid_argument, "coupling resolutions must be positive");
  const bool aniso = mode.anisotropic.has_value();
  const HomWeight& w = input.weight();
  if (aniso && w.alpha() != 0.0) throw Error(Errc::invalid_argument, "anisotropic mode takes an unweighted set");
  SlopeBody K = aniso ? *mode.anisotropic : SlopeBody::sector_disk(input.cone(), 1.0);

  // Normalize the volume.
  double scale;
  if (aniso) {
    scale = std::sqrt(K.area() / polygon_area(input));
  } else {
    scale = std::pow(discrete_unit_ball_volume(w, input.size()) / weighted_volume(input), 1.0 / w.D());
  }
  CouplingReport r(input.scaled(scale), K);
  r.anisotropic = aniso;
  r.scale = scale;
  const StarSet& E = r.set;
  if (aniso) {
    r.perimeter = anisotropic_perimeter(E, K);
    r.volume = polygon_area(E);
    r.delta = anisotropic_deficit(E, K);
  } else {
    const MeasureReport mr = deficit(E);
    r.perimeter = mr.w_perimeter;
    r.volume = mr.w_volume;
    r.delta = mr.deficit;
  }
  r.b_E = r.perimeter / r.volume;

  r.mesh = fan_triangulate(E, res.mesh_h);
  r.h = r.mesh.h;
  r.eval_h = res.eval_h;
  r.u = aniso ? solve_neumann(r.mesh, AnisotropicProblem{K}) : solve_neumann(r.mesh, WeightedProblem{w});

  const Reconstruction rec(r.mesh, r.u.values);
  const Samples smp = lattice_samples(r.mesh, res.sample_level);
  std::vector<double> uval(smp.pts.size());
  for (std::size_t i = 0; i < smp.pts.size(); ++i) uval[i] = rec.value(smp.tri[i], smp.pts[i]);

  r.grid = std::make_shared<const SlopeGrid>(make_slope_grid(K, res.n_radial, res.n_angular));
  const SlopeGrid& grid = *r.grid;
  r.slope_spacing = grid.spacing;

  // Newton on û(y) − ξ.y from the best sample, kept only while inside the mesh.
  const ConjugateRefiner refine = [&](int s, Vec2 xi, double current) {
    Vec2 y = smp.pts[s];
    int t = smp.tri[s];
    double best = current;
    for (int it = 0; it < 6; ++it) {
      const Vec2 g = rec.gradient(t, y) - xi;
      if (norm(g) < 1e-14) break;
      const Sym2 H = rec.hessian(t, y);
      const double det = H.det();
      if (!(H.xx > 0.0 && det > 0.0)) break;
      const Vec2 step{(H.yy * g.x - H.xy * g.y) / det, (H.xx * g.y - H.xy * g.x) / det};
      if (norm(step) > 4.0 * r.mesh.h) break;
      const Vec2 yn = y - step;
      const int tn = rec.locate(yn, t);
      if (tn < 0) break;
      y = yn, t = tn;
      best = std::min(best, rec.value(t, y) - dot(xi, y));
    }
    return best;
  };
  r.conj = restricted_conjugate(smp.pts, uval, grid, refine);

  // Evaluation box aligned with the origin.
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  for (int j = 0; j < E.size(); ++j) {
    const Vec2 p = E.boundary_point(j);
    xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x), ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
  }
  const double he = res.eval_h;
  const double margin = std::max(0.1 * std::max(xmax - xmin, ymax - ymin), 4.0 * he);
  EvalBox box;
  box.h = he;
  box.x0 = std::floor((xmin - margin) / he) * he;
  box.y0 = std::floor((ymin - margin) / he) * he;
  box.nx = static_cast<int>(std::ceil((xmax + margin - box.x0) / he)) + 1;
  box.ny = static_cast<int>(std::ceil((ymax + margin - box.y0) / he)) + 1;
  r.phi = k_envelope(r.conj, grid, box);
  const RefinedGradient rg = refine_gradient(r.phi, r.conj, K);

  // Node geometry: cell fractions by 8x8 subsampling of cut cells.
  const std::size_t nn = r.phi.phi.size();
  r.nodes.assign(nn, {});
  std::vector<char> inside(nn, 0);
  const HomWeight wt = aniso ? HomWeight::unweighted(E.cone()) : w;
  parallel_for(nn, [&](std::size_t k) {
    const int i = static_cast<int>(k % box.nx), j = static_cast<int>(k / box.nx);
    const Vec2 x = box.node(i, j);
    CouplingNode& nd = r.nodes[k];
    nd.grad = rg.grad[k];
    inside[k] = star_contains(E, x) ? 1 : 0;
    bool all = true, none = true;
    for (int di = -1; di <= 1; di += 2)
      for (int dj = -1; dj <= 1; dj += 2) {
        const bool in = star_contains(E, x + Vec2{di * 0.5 * he, dj * 0.5 * he}, 0.0);
        all = all && in && inside[k];
        none = none && !in && !inside[k];
      }
    if (all) {
      nd.cell = he * he;
      nd.cell_w = he * he * clamp_weight(wt, x);
    } else if (!none) {
      const int s = 8;
      int cnt = 0;
      double ws = 0.0;
      for (int a = 0; a < s; ++a)
        for (int b = 0; b < s; ++b) {
          const Vec2 p = x + Vec2{((a + 0.5) / s - 0.5) * he, ((b + 0.5) / s - 0.5) * he};
          if (star_contains(E, p, 0.0)) ++cnt, ws += clamp_weight(wt, p);
        }
      nd.cell = he * he * cnt / (s * s);
      nd.cell_w = he * he * ws / (s * s);
    }
    nd.near_cone = !E.cone().is_whole_plane() && E.cone().distance_to_boundary(x) <= he * (1.0 + 1e-9);
  });
  // Hessian: central differences of the refined gradient with step 2h,
  // second-order one-sided stencils into E where a neighbour lies outside.
  auto in_at = [&](int i, int j) { return i >= 0 && j >= 0 && i < box.nx && j < box.ny && inside[r.phi.index(i, j)]; };
  auto G = [&](int i, int j) { return rg.grad[r.phi.index(i, j)]; };
  auto deriv = [&](int i, int j, int di, int dj) {
    const int ip = i + di, jp = j + dj, im = i - di, jm = j - dj;
    const bool has_p = ip >= 0 && jp >= 0 && ip < box.nx && jp < box.ny;
    const bool has_m = im >= 0 && jm >= 0 && im < box.nx && jm < box.ny;
    if (in_at(ip, jp) && in_at(im, jm)) return (G(ip, jp) - G(im, jm)) / (2 * he);
    if (in_at(im, jm) && in_at(i - 2 * di, j - 2 * dj))
      return (G(i, j) * 3.0 - G(im, jm) * 4.0 + G(i - 2 * di, j - 2 * dj)) / (2 * he);
    if (in_at(ip, jp) && in_at(i + 2 * di, j + 2 * dj))
      return (G(i, j) * -3.0 + G(ip, jp) * 4.0 - G(i + 2 * di, j + 2 * dj)) / (2 * he);
    if (has_p && has_m) return (G(ip, jp) - G(im, jm)) / (2 * he);
    return has_p ? (G(ip, jp) - G(i, j)) / he : (G(i, j) - G(im, jm)) / he;
  };
  parallel_for(nn, [&](std::size_t k) {
    if (r.nodes[k].cell <= 0.0) return;
    const int i = static_cast<int>(k % box.nx), j = static_cast<int>(k / box.nx);
    const Vec2 dx = deriv(i, j, 1, 0), dy = deriv(i, j, 0, 1);
    r.nodes[k].hess = {dx.x, 0.5 * (dx.y + dy.x), dy.y};
  });

  // Measured quantities.
  const Sym2 target = aniso ? Sym2::identity() * (r.b_E / 2.0) : Sym2::identity();
  r.sup_violation = -kInf;
  r.sup_violation_near_cone = -kInf;
  for (std::size_t k = 0; k < nn; ++k) {
    const CouplingNode& nd = r.nodes[k];
    if (nd.cell <= 0.0) continue;
    r.hessian_l1 += (nd.hess - target).norm() * nd.cell_w;
    if (!inside[k]) continue;
    const Vec2 x = box.node(static_cast<int>(k % box.nx), static_cast<int>(k / box.nx));
    double v = nd.hess.trace() - r.b_E;
    if (!aniso && w.alpha() > 0.0) v += w.alpha() * weight_quotient(w, nd.grad, x);
    if (nd.near_cone)
      r.sup_violation_near_cone = std::max(r.sup_violation_near_cone, v);
    else
      r.sup_violation = std::max(r.sup_violation, v);
  }
  // An empty node class reports NaN rather than -inf.
  if (r.sup_violation == -kInf) r.sup_violation = std::nan("");
  if (r.sup_violation_near_cone == -kInf) r.sup_violation_near_cone = std::nan("");

  // Boundary term with the refined envelope gradient at boundary samples.
  {
    const int n = E.size();
    std::vector<Vec2> bp(n);
    for (int j = 0; j < n; ++j) bp[j] = E.boundary_point(j);
    if (aniso) {
      std::vector<Vec2> mids(n);
      for (int j = 0; j < n; ++j) mids[j] = (bp[j] + bp[(j + 1) % n]) * 0.5;
      const RefinedGradient bg = envelope_gradient_at(mids, r.conj, grid, K);
      for (int j = 0; j < n; ++j) {
        const Vec2 d = bp[(j + 1) % n] - bp[j];
        const Vec2 nu_len{d.y, -d.x};
        r.boundary_term += K.support(nu_len) - dot(bg.grad[j], nu_len);
      }
    } else {
      const RefinedGradient bg = envelope_gradient_at(bp, r.conj, grid, K);
      std::map<std::pair<double, double>, double> lookup;
      for (int j = 0; j < n; ++j) lookup[{bp[j].x, bp[j].y}] = 1.0 - norm(bg.grad[j]);
      r.boundary_term = boundary_weighted_integral(E, [&](Vec2 p) {
        const auto it = lookup.find({p.x, p.y});
        if (it == lookup.end()) throw Error(Errc::invalid_argument, "boundary sample mismatch");
        return it->second;
      });
    }
  }

  std::vector<char> mask(nn, 0);
  for (std::size_t k = 0; k < nn; ++k) mask[k] = inside[k];
  r.c11 = check_c11(r.phi, mask);
  r.range_hausdorff = r.c11.range_hausdorff;

  // Interior slopes whose best sample sits on the free boundary.
  for (std::size_t m = 0; m < grid.size(); ++m) {
    if (!K.normal_cone(grid.at(m), 2.0 * grid.spacing).empty()) continue;
    ++r.interior_slopes;
    if (smp.on_free[r.conj.arg[m]]) ++r.hypothesis_flags;
  }
  return r;
}

double weight_term(const CouplingReport& r, const Box& q) {
  if (r.anisotropic) throw Error(Errc::invalid_argument, "weight term is defined in weighted mode only");
  const Cone& c = r.set.cone();
  for (Vec2 p : {Vec2{q.x0, q.y0}, Vec2{q.x1, q.y0}, Vec2{q.x0, q.y1}, Vec2{q.x1, q.y1}})
    if (!c.contains_interior(p)) throw Error(Errc::outside_cone, "Q must lie inside the open cone");
  const HomWeight& w = r.set.weight();
  const EvalBox& box = r.phi.box;
  double s = 0.0;
  for (std::size_t k = 0; k < r.nodes.size(); ++k) {
    const CouplingNode& nd = r.nodes[k];
    if (nd.cell <= 0.0) continue;
    const Vec2 x = box.node(static_cast<int>(k % box.nx), static_cast<int>(k / box.nx));
    if (x.x < q.x0 || x.x > q.x1 || x.y < q.y0 || x.y > q.y1) continue;
    s += std::abs(w.root(r.K.project(nd.grad)) - w.root(x)) * nd.cell;
  }
  return s;
}

RatioTable verify_coupling_estimates(const CouplingReport& r, const Box& q) {
  RatioTable t;
  if (r.anisotropic) {
    t.anisotropic = true;
    t.hessian = r.hessian_l1 / (r.b_E * r.volume);
    return t;
  }
  if (!(r.delta > 1e-10))
    throw Error(Errc::minimizer_degenerate, "deficit at or below 1e-10: ratios are undefined on minimizers");
  const double sd = std::sqrt(r.delta);
  t.hessian = r.hessian_l1 / sd;
  t.boundary = r.boundary_term / r.delta;
  t.weight = weight_term(r, q) / sd;
  return t;
}

double ChainRecord::max_relative_gap() const {
  const double v[5] = {image, det, amgm, local, terminal};
  double g = 0.0;
  for (int i = 0; i < 4; ++i) g = std::max(g, std::abs(v[i + 1] - v[i]) / terminal);
  return g;
}

ChainRecord abp_chain_check(const CouplingReport& r, double c_tol) {
  if (r.anisotropic) throw Error(Errc::invalid_argument, "the ABP chain is checked in weighted mode");
  const HomWeight& w = r.set.weight();
  const double D = w.D(), alpha = w.alpha();
  const EvalBox& box = r.phi.box;
  ChainRecord c;
  std::vector<Vec2> cloud;
  for (std::size_t k = 0; k < r.nodes.size(); ++k) {
    const CouplingNode& nd = r.nodes[k];
    if (nd.cell <= 0.0) continue;
    const Vec2 x = box.node(static_cast<int>(k % box.nx), static_cast<int>(k / box.nx));
    const Sym2 Hp = positive_part(nd.hess);
    const double wg = clamp_weight(w, nd.grad);
    c.det += Hp.det() * wg * nd.cell;
    c.amgm += 0.25 * Hp.trace() * Hp.trace() * wg * nd.cell;
    const double q = alpha > 0.0 ? weight_quotient(w, nd.grad, x) : 0.0;
    c.local += std::pow((Hp.trace() + alpha * q) / D, D) * nd.cell_w;
    cloud.push_back(nd.grad);
  }
  // Image measure: slope cells within eval_h of the refined gradient cloud.
  const SlopeGrid& g = *r.grid;
  {
    std::vector<Vec2> pts(cloud);
    const double cell = r.eval_h;
    std::map<std::pair<long long, long long>, std::vector<int>> bucket;
    for (std::size_t i = 0; i < pts.size(); ++i)
      bucket[{std::llround(std::floor(pts[i].x / cell)), std::llround(std::floor(pts[i].y / cell))}].push_back(
          static_cast<int>(i));
    for (std::size_t m = 0; m < g.size(); ++m) {
      const Vec2 s = g.at(m);
      const long long bx = std::llround(std::floor(s.x / cell)), by = std::llround(std::floor(s.y / cell));
      bool hit = false;
      for (long long a = bx - 1; a <= bx + 1 && !hit; ++a)
        for (long long b = by - 1; b <= by + 1 && !hit; ++b) {
          const auto it = bucket.find({a, b});
          if (it == bucket.end()) continue;
          for (int i : it->second)
            if (norm(pts[i] - s) <= cell) {
              hit = true;
              break;
            }
        }
      if (hit) c.image += clamp_weight(w, s) * g.cell[m];
    }
  }
  c.terminal = std::pow(r.b_E / D, D) * r.volume;
  c.tol = c_tol * (r.h + r.slope_spacing) * c.terminal;
  const double v[5] = {c.image, c.det, c.amgm, c.local, c.terminal};
  const char* names[5] = {"image", "det", "amgm", "local", "terminal"};
  c.ordered = true;
  std::ostringstream diag;
  for (int i = 0; i < 4; ++i)
    if (v[i] > v[i + 1] + c.tol) {
      c.ordered = false;
      diag << names[i] << " > " << names[i + 1] << " by " << v[i] - v[i + 1] << "; ";
    }
  c.diagnostic = diag.str();
  return c;
}

}  // namespace isocone
