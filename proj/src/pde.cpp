#include "isocone/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "isocone/error.hpp"
#include "isocone/parallel.hpp"

namespace isocone {

namespace {

double tri_signed_area(Vec2 a, Vec2 b, Vec2 c) { return 0.5 * cross(b - a, c - a); }

double angle_at(Vec2 p, Vec2 q, Vec2 r) {
  const Vec2 u = q - p, v = r - p;
  return std::acos(std::clamp(dot(u, v) / (norm(u) * norm(v)), -1.0, 1.0));
}

struct Built {
  TriMesh mesh;
  double diameter;
};

Built build_rings(const StarSet& set, int N) {
  const Cone& c = set.cone();
  const bool periodic = c.is_whole_plane();
  const int m = periodic ? 8 : std::max(1, static_cast<int>(std::lround(c.opening())));
  TriMesh mesh;
  mesh.cone = c;
  mesh.rings = N;
  mesh.vertices.push_back({0, 0});
  std::vector<std::vector<int>> ring(N + 1);
  std::vector<std::vector<double>> ang(N + 1);
  ring[0] = {0};
  ang[0] = {c.angle_lo()};
  for (int k = 1; k <= N; ++k) {
    const int n = periodic ? k * m : k * m + 1;
    for (int i = 0; i < n; ++i) {
      const double t = periodic ? 2.0 * kPi * i / n : c.angle_lo() + c.opening() * i / (n - 1);
      const double rad = static_cast<double>(k) / N * set.radius_at(t);
      ring[k].push_back(static_cast<int>(mesh.vertices.size()));
      ang[k].push_back(t);
      mesh.vertices.push_back(unit(t) * rad);
    }
  }
  auto tri = [&](int a, int b, int d) { mesh.tris.push_back({a, b, d}); };
  // Apex fan.
  {
    const auto& r1 = ring[1];
    const int n = static_cast<int>(r1.size());
    for (int i = 0; i + 1 < n; ++i) tri(0, r1[i], r1[i + 1]);
    if (periodic) tri(0, r1[n - 1], r1[0]);
  }
  // Zipper between consecutive rings in angle order.
  for (int k = 1; k < N; ++k) {
    const auto& in = ring[k];
    const auto& out = ring[k + 1];
    const int ni = static_cast<int>(in.size()), no = static_cast<int>(out.size());
    const int ei = periodic ? ni : ni - 1, eo = periodic ? no : no - 1;
    auto ai = [&](int i) { return periodic ? 2.0 * kPi * i / ni : ang[k][i]; };
    auto ao = [&](int j) { return periodic ? 2.0 * kPi * j / no : ang[k + 1][j]; };
    const double axis = periodic ? kPi : c.angle_lo() + 0.5 * c.opening();
    int i = 0, j = 0;
    while (i < ei || j < eo) {
      // Pick the more radial diagonal of the quad; the rule is mirror
      // invariant, and exact ties split by the side of the cone's axis.
      bool adv_out;
      if (i == ei) {
        adv_out = true;
      } else if (j == eo) {
        adv_out = false;
      } else {
        const double d_out = ao(j + 1) - ai(i), d_in = ai(i + 1) - ao(j);
        if (std::abs(d_out - d_in) <= 1e-13)
          adv_out = 0.25 * (ai(i) + ai(i + 1) + ao(j) + ao(j + 1)) < axis;
        else
          adv_out = d_out < d_in;
      }
      if (adv_out) {
        tri(in[i % ni], out[j % no], out[(j + 1) % no]);
        ++j;
      } else {
        tri(in[i % ni], out[j % no], in[(i + 1) % ni]);
        ++i;
      }
    }
  }
  // Boundary: lower ray outward, outer ring in angle order, upper ray inward.
  const auto& outer = ring[N];
  const int no = static_cast<int>(outer.size());
  if (!periodic) {
    for (int k = 0; k < N; ++k) mesh.boundary.push_back({ring[k].front(), ring[k + 1].front(), EdgeTag::cone_part});
  }
  for (int i = 0; i + 1 < no; ++i) mesh.boundary.push_back({outer[i], outer[i + 1], EdgeTag::free_part});
  if (periodic) mesh.boundary.push_back({outer[no - 1], outer[0], EdgeTag::free_part});
  if (!periodic) {
    for (int k = N; k > 0; --k) mesh.boundary.push_back({ring[k].back(), ring[k - 1].back(), EdgeTag::cone_part});
  }
  double diam = 0.0, amin = kPi;
  for (const auto& t : mesh.tris) {
    const Vec2 a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], d = mesh.vertices[t[2]];
    diam = std::max({diam, norm(b - a), norm(d - b), norm(a - d)});
    amin = std::min({amin, angle_at(a, b, d), angle_at(b, d, a), angle_at(d, a, b)});
  }
  mesh.h = diam;
  mesh.min_angle = amin;
  return {std::move(mesh), diam};
}

struct Csr {
  std::vector<int> start, col;
  std::vector<double> val;
  void multiply(const std::vector<double>& x, std::vector<double>& y) const {
    const std::size_t n = start.size() - 1;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = start[i]; k < start[i + 1]; ++k) s += val[k] * x[col[k]];
      y[i] = s;
    }
  }
};

struct Assembly {
  Csr A;
  std::vector<double> load_area;  ///< ∫ w φ_i
  std::vector<double> load_edge;  ///< boundary datum tested against φ_i
};

Assembly assemble(const TriMesh& mesh, const std::function<double(Vec2)>& w,
                  const std::function<double(Vec2 /*normal*/)>& edge_datum, bool weighted_edges) {
  const std::size_t nv = mesh.vertices.size(), nt = mesh.tris.size();
  struct Local {
    double k[3][3];
    double m[3];
  };
  std::vector<Local> local(nt);
  parallel_for(nt, [&](std::size_t t) {
    const auto& tr = mesh.tris[t];
    const Vec2 p[3] = {mesh.vertices[tr[0]], mesh.vertices[tr[1]], mesh.vertices[tr[2]]};
    const double A = tri_signed_area(p[0], p[1], p[2]);
    const Vec2 g[3] = {perp(p[2] - p[1]) / (2 * A), perp(p[0] - p[2]) / (2 * A), perp(p[1] - p[0]) / (2 * A)};
    // Midpoint weights: mid[e] sits opposite vertex e.
    const double mid[3] = {std::max(0.0, w((p[1] + p[2]) * 0.5)), std::max(0.0, w((p[2] + p[0]) * 0.5)),
                           std::max(0.0, w((p[0] + p[1]) * 0.5))};
    const double W = A / 3.0 * (mid[0] + mid[1] + mid[2]);
    Local& L = local[t];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) L.k[i][j] = W * dot(g[i], g[j]);
      // φ_i is 1/2 at the two midpoints adjacent to vertex i.
      L.m[i] = A / 3.0 * 0.5 * (mid[(i + 1) % 3] + mid[(i + 2) % 3]);
    }
  });
  // Sparsity pattern.
  std::vector<std::vector<int>> nb(nv);
  for (const auto& tr : mesh.tris)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) nb[tr[i]].push_back(tr[j]);
  Assembly as;
  as.A.start.assign(nv + 1, 0);
  for (std::size_t i = 0; i < nv; ++i) {
    std::sort(nb[i].begin(), nb[i].end());
    nb[i].erase(std::unique(nb[i].begin(), nb[i].end()), nb[i].end());
    as.A.start[i + 1] = as.A.start[i] + static_cast<int>(nb[i].size());
    as.A.col.insert(as.A.col.end(), nb[i].begin(), nb[i].end());
  }
  as.A.val.assign(as.A.col.size(), 0.0);
  as.load_area.assign(nv, 0.0);
  auto slot = [&](int i, int j) {
    const auto b = as.A.col.begin() + as.A.start[i], e = as.A.col.begin() + as.A.start[i + 1];
    return static_cast<std::size_t>(std::lower_bound(b, e, j) - as.A.col.begin());
  };
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& tr = mesh.tris[t];
    for (int i = 0; i < 3; ++i) {
      as.load_area[tr[i]] += local[t].m[i];
      for (int j = 0; j < 3; ++j) as.A.val[slot(tr[i], tr[j])] += local[t].k[i][j];
    }
  }
  as.load_edge.assign(nv, 0.0);
  for (const auto& e : mesh.boundary) {
    if (e.tag != EdgeTag::free_part) continue;
    const Vec2 a = mesh.vertices[e.a], b = mesh.vertices[e.b];
    const double L = norm(b - a);
    const Vec2 nu{(b - a).y / L, -(b - a).x / L};
    const double g = edge_datum(nu);
    if (weighted_edges) {
      // Simpson: φ_a is 1 at a, 1/2 at the midpoint, 0 at b.
      const double wa = std::max(0.0, w(a)), wb = std::max(0.0, w(b)), wm = std::max(0.0, w((a + b) * 0.5));
      as.load_edge[e.a] += g * L / 6.0 * (wa + 2.0 * wm);
      as.load_edge[e.b] += g * L / 6.0 * (wb + 2.0 * wm);
    } else {
      as.load_edge[e.a] += g * L / 2.0;
      as.load_edge[e.b] += g * L / 2.0;
    }
  }
  return as;
}

void require_connected(const TriMesh& mesh) {
  const std::size_t nv = mesh.vertices.size();
  std::vector<int> parent(nv);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  std::vector<char> used(nv, 0);
  for (const auto& t : mesh.tris)
    for (int i = 0; i < 3; ++i) {
      used[t[i]] = 1;
      parent[find(t[i])] = find(t[(i + 1) % 3]);
    }
  for (std::size_t i = 0; i < nv; ++i)
    if (!used[i] || find(static_cast<int>(i)) != find(0))
      throw Error(Errc::singular_system, "mesh is disconnected: the Neumann system is singular beyond the gauge");
}

NodalField solve(const TriMesh& mesh, const Assembly& as, std::optional<double> b_override) {
  require_connected(mesh);
  const std::size_t n = mesh.vertices.size();
  const double vol = std::accumulate(as.load_area.begin(), as.load_area.end(), 0.0);
  const double per = std::accumulate(as.load_edge.begin(), as.load_edge.end(), 0.0);
  if (!(vol > 0.0)) throw Error(Errc::singular_system, "zero weighted volume on the mesh");
  NodalField f;
  f.b_E = b_override ? *b_override : per / vol;
  f.mass = as.load_area;
  std::vector<double> rhs(n);
  double sum = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rhs[i] = -f.b_E * as.load_area[i] + as.load_edge[i];
    sum += rhs[i];
    l1 += std::abs(rhs[i]);
  }
  f.compatibility = l1 > 0.0 ? std::abs(sum) / l1 : 0.0;
  if (f.compatibility > 1e-8) throw Error(Errc::compatibility, "right-hand side is not orthogonal to constants");
  // Remove the rounding-level constant component.
  for (double& r : rhs) r -= sum / static_cast<double>(n);

  std::vector<double> dinv(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (int k = as.A.start[i]; k < as.A.start[i + 1]; ++k)
      if (as.A.col[k] == static_cast<int>(i)) d = as.A.val[k];
    dinv[i] = d > 0.0 ? 1.0 / d : 0.0;
  }
  auto project = [&](std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    for (double& x : v) x -= mean;
  };
  auto ddot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  std::vector<double> u(n, 0.0), r = rhs, z(n), p(n), q(n);
  const double rhs_norm = std::sqrt(ddot(rhs, rhs));
  if (rhs_norm == 0.0) {
    f.values = u;
    return f;
  }
  for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
  p = z;
  double rz = ddot(r, z);
  const int max_it = static_cast<int>(20 * n + 100);
  int it = 0;
  double rel = 1.0;
  for (; it < max_it; ++it) {
    as.A.multiply(p, q);
    const double pq = ddot(p, q);
    if (!(pq > 0.0)) break;
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) u[i] += alpha * p[i], r[i] -= alpha * q[i];
    project(r);
    rel = std::sqrt(ddot(r, r)) / rhs_norm;
    if (rel <= 1e-11) break;
    for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
    const double rz_new = ddot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  // True residual.
  as.A.multiply(u, q);
  for (std::size_t i = 0; i < n; ++i) q[i] = rhs[i] - q[i];
  project(q);
  f.residual = std::sqrt(ddot(q, q)) / rhs_norm;
  f.iterations = it;
  if (!(f.residual <= 1e-10)) throw Error(Errc::singular_system, "conjugate gradient did not reach 1e-10 relative residual");
  double mass = 0.0, moment = 0.0;
  for (std::size_t i = 0; i < n; ++i) mass += f.mass[i], moment += f.mass[i] * u[i];
  for (double& x : u) x -= moment / mass;
  f.values = std::move(u);
  return f;
}

}  // namespace

double TriMesh::area() const {
  double s = 0.0;
  for (const auto& t : tris) s += tri_signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
  return s;
}

std::string TriMesh::vertices_csv() const {
  std::string out = "id,x,y\n";
  char buf[96];
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g\n", i, vertices[i].x, vertices[i].y);
    out += buf;
  }
  return out;
}

std::string TriMesh::triangles_csv() const {
  std::string out = "id,a,b,c\n";
  char buf[96];
  for (std::size_t i = 0; i < tris.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%d,%d,%d\n", i, tris[i][0], tris[i][1], tris[i][2]);
    out += buf;
  }
  return out;
}

std::string NodalField::csv(const TriMesh& mesh) const {
  std::string out = "id,x,y,u\n";
  char buf[128];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g\n", i, mesh.vertices[i].x, mesh.vertices[i].y, values[i]);
    out += buf;
  }
  return out;
}

TriMesh fan_triangulate(const StarSet& set, double target_h) {
  if (!(target_h > 0.0) || !std::isfinite(target_h)) throw Error(Errc::invalid_argument, "target_h must be positive");
  double rmax = 0.0;
  for (double r : set.radii()) rmax = std::max(rmax, r);
  int N = std::max(2, static_cast<int>(std::ceil(rmax / target_h)));
  for (int attempt = 0; attempt < 40; ++attempt) {
    if (N > 20000) break;
    Built b = build_rings(set, N);
    if (b.diameter <= target_h) {
      if (b.mesh.min_angle < 20.0 * kPi / 180.0)
        throw Error(Errc::mesh_infeasible, "smallest angle below 20 degrees at the requested resolution");
      return std::move(b.mesh);
    }
    N = std::max(N + 1, static_cast<int>(std::ceil(N * b.diameter / target_h * 1.01)));
  }
  throw Error(Errc::mesh_infeasible, "cannot reach the requested mesh size");
}

NodalField solve_neumann(const TriMesh& mesh, const WeightedProblem& p, std::optional<double> b_override) {
  const HomWeight& w = p.w;
  const Assembly as = assemble(mesh, [&](Vec2 x) { return w.value(x); }, [](Vec2) { return 1.0; }, true);
  return solve(mesh, as, b_override);
}

NodalField solve_neumann(const TriMesh& mesh, const AnisotropicProblem& p, std::optional<double> b_override) {
  const SlopeBody& K = p.K;
  const Assembly as = assemble(mesh, [](Vec2) { return 1.0; }, [&](Vec2 nu) { return K.support(nu); }, false);
  return solve(mesh, as, b_override);
}

Vec2 p1_gradient(const TriMesh& mesh, const std::vector<double>& u, int t) {
  const auto& tr = mesh.tris[t];
  const Vec2 p0 = mesh.vertices[tr[0]], p1 = mesh.vertices[tr[1]], p2 = mesh.vertices[tr[2]];
  const double A = tri_signed_area(p0, p1, p2);
  return (perp(p2 - p1) * u[tr[0]] + perp(p0 - p2) * u[tr[1]] + perp(p1 - p0) * u[tr[2]]) / (2 * A);
}

double energy_error(const TriMesh& mesh, const std::vector<double>& u, const std::function<double(Vec2)>& w,
                    const std::function<Vec2(Vec2)>& grad_exact) {
  double s = 0.0;
  for (std::size_t t = 0; t < mesh.tris.size(); ++t) {
    const auto& tr = mesh.tris[t];
    const Vec2 p[3] = {mesh.vertices[tr[0]], mesh.vertices[tr[1]], mesh.vertices[tr[2]]};
    const double A = tri_signed_area(p[0], p[1], p[2]);
    const Vec2 g = p1_gradient(mesh, u, static_cast<int>(t));
    for (int e = 0; e < 3; ++e) {
      const Vec2 m = (p[e] + p[(e + 1) % 3]) * 0.5;
      const double wm = w ? std::max(0.0, w(m)) : 1.0;
      s += A / 3.0 * wm * norm2(g - grad_exact(m));
    }
  }
  return std::sqrt(s);
}

}  // namespace isocone
