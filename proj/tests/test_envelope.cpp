#include <cmath>
#include <random>

#include "doctest.h"
#include "isocone/envelope.hpp"
#include "isocone/error.hpp"

using namespace isocone;

namespace {

/// Square lattice of the closed disk |y| <= radius.
std::vector<Vec2> disk_samples(double radius, double h) {
  std::vector<Vec2> pts;
  const int n = static_cast<int>(std::ceil(radius / h));
  for (int j = -n; j <= n; ++j)
    for (int i = -n; i <= n; ++i) {
      const Vec2 p{i * h, j * h};
      if (norm(p) <= radius + 1e-12) pts.push_back(p);
    }
  return pts;
}

std::vector<double> eval(const std::vector<Vec2>& pts, double (*f)(Vec2)) {
  std::vector<double> v;
  for (const Vec2& p : pts) v.push_back(f(p));
  return v;
}

double half_square(Vec2 p) { return 0.5 * norm2(p); }

/// Analytic K-envelope of |x|^2/2 for K the closed unit disk.
double disk_envelope(Vec2 x) {
  const double r = norm(x);
  return r <= 1.0 ? 0.5 * r * r : r - 0.5;
}

const SlopeBody kDisk = SlopeBody::sector_disk(Cone::whole_plane(), 1.0);

}  // namespace

TEST_CASE("support function examples") {
  CHECK(support_function(kDisk, {3, 4}) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(support_function(SlopeBody::square(), {3, 4}) == 7.0);
  CHECK(support_function(SlopeBody::polygon({{0, 0}, {1, 0}}), {-2, 5}) == 0.0);
  const SlopeBody q = SlopeBody::sector_disk(Cone::quadrant());
  CHECK(support_function(q, {-1, -1}) == 0.0);
  CHECK(support_function(q, {1, -1}) == doctest::Approx(1.0));
  CHECK(support_function(q, {1, 1}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("support function is positively homogeneous and subadditive") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3), t(0, 5);
  const std::vector<SlopeBody> bodies = {kDisk, SlopeBody::square(), SlopeBody::polygon({{0, 0}, {1, 0}}),
                                         SlopeBody::sector_disk(Cone::quadrant()),
                                         SlopeBody::sector_disk(Cone::upper_half_plane(), 2.0),
                                         SlopeBody::polygon({{0, 0}, {2, 0}, {1, 1.5}})};
  for (const SlopeBody& k : bodies)
    for (int i = 0; i < 2000; ++i) {
      const Vec2 a{u(rng), u(rng)}, b{u(rng), u(rng)};
      const double s = t(rng);
      CHECK(k.support(a * s) == doctest::Approx(s * k.support(a)).epsilon(1e-12));
      CHECK(k.support(a + b) <= k.support(a) + k.support(b) + 1e-12);
    }
}

TEST_CASE("support function agrees with the maximum over a dense sample grid") {
  const SlopeBody k = SlopeBody::sector_disk(Cone::quadrant());
  const SlopeGrid g = make_slope_grid(k, 200, 400);
  for (int d = 0; d < 36; ++d) {
    const Vec2 v = unit(d * kPi / 18);
    double best = -1e300;
    for (std::size_t m = 0; m < g.size(); ++m) best = std::max(best, dot(v, g.at(m)));
    CHECK(k.support(v) == doctest::Approx(best).epsilon(1e-4));
    CHECK(k.support(v) >= best - 1e-12);
  }
}

TEST_CASE("slope grids lie in K and reach its boundary") {
  const SlopeBody k = SlopeBody::sector_disk(Cone::quadrant());
  const SlopeGrid g = make_slope_grid(k, 16, 33);
  CHECK(g.size() == 1 + 16 * 33);
  double area = 0.0;
  for (std::size_t m = 0; m < g.size(); ++m) {
    CHECK(k.contains(g.at(m), 1e-12));
    area += g.cell[m];
  }
  CHECK(area == doctest::Approx(k.area()).epsilon(1e-12));
  CHECK(g.spacing == doctest::Approx(std::max(1.0 / 16, (kPi / 2) / 32)));
  const SlopeGrid sq = make_slope_grid(SlopeBody::square(), 8, 8);
  CHECK(sq.size() == 81);
  CHECK(sq.spacing == 0.25);
  const SlopeGrid seg = make_slope_grid(SlopeBody::polygon({{-1, 0}, {1, 0}}), 8, 8);
  CHECK(seg.size() == 9);
}

TEST_CASE("normal cones") {
  CHECK(kDisk.normal_cone({0.3, 0.4}).empty());
  auto n = kDisk.normal_cone({1, 0});
  REQUIRE(n.size() == 1);
  CHECK(n[0].x == doctest::Approx(1.0));
  const SlopeBody sq = SlopeBody::square();
  CHECK(sq.normal_cone({1, 0}).size() == 1);
  CHECK(sq.normal_cone({1, 1}).size() == 2);
  const SlopeBody q = SlopeBody::sector_disk(Cone::quadrant());
  n = q.normal_cone({0, 0});
  REQUIRE(n.size() == 2);
  for (const Vec2& g : n) CHECK(q.support(g) == doctest::Approx(0.0).scale(1.0));
  n = q.normal_cone({0.5, 0});
  REQUIRE(n.size() == 1);
  CHECK(n[0].y == doctest::Approx(-1.0));
  CHECK(q.normal_cone({1, 0}).size() == 2);
  // Defining property: v.(xi' - xi) <= 0 over K.
  const SlopeGrid g = make_slope_grid(q, 40, 81);
  for (Vec2 xi : {Vec2{0, 0}, Vec2{0.5, 0}, Vec2{1, 0}, unit(0.7), Vec2{0, 0.3}})
    for (const Vec2& v : q.normal_cone(xi))
      for (std::size_t m = 0; m < g.size(); ++m) CHECK(dot(v, g.at(m) - xi) <= 1e-12);
}

TEST_CASE("restricted conjugate examples") {
  const SlopeGrid g = make_slope_grid(kDisk, 20, 64);
  RestrictedConjugate c = restricted_conjugate({{0, 0}}, {0.0}, g);
  for (double a : c.a) CHECK(a == 0.0);

  const SlopeBody sq = SlopeBody::square();
  const SlopeGrid gs = make_slope_grid(sq, 8, 8);
  const Vec2 xi0{0.5, 0.25};
  const auto pts = disk_samples(1.0, 0.1);
  std::vector<double> u;
  for (const Vec2& p : pts) u.push_back(dot(xi0, p));
  c = restricted_conjugate(pts, u, gs);
  for (std::size_t m = 0; m < gs.size(); ++m) {
    double oracle = 1e300;
    for (const Vec2& p : pts) oracle = std::min(oracle, dot(xi0 - gs.at(m), p));
    CHECK(c.a[m] == doctest::Approx(oracle).epsilon(1e-14));
    if (norm(gs.at(m) - xi0) == 0.0) CHECK(std::abs(c.a[m]) <= 1e-15);
  }

  const double h = 0.02;
  const auto ball = disk_samples(2.0, h);
  c = restricted_conjugate(ball, eval(ball, half_square), g);
  for (std::size_t m = 0; m < g.size(); ++m) {
    const double exact = -0.5 * norm2(g.at(m));
    CHECK(c.a[m] <= exact + h * h);
    CHECK(c.a[m] >= exact);
  }
  CHECK_THROWS_AS(restricted_conjugate({}, {}, g), Error);
}

TEST_CASE("restricted conjugate is concave along slope lines") {
  const SlopeBody q = SlopeBody::sector_disk(Cone::quadrant());
  const int nr = 32, na = 33;
  const SlopeGrid g = make_slope_grid(q, nr, na);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1, 1);
  const auto pts = disk_samples(1.5, 0.05);
  std::vector<double> u;
  for (const Vec2& p : pts) u.push_back(std::sin(3 * p.x) + p.y * p.y * p.x + 0.1 * U(rng));
  const auto c = restricted_conjugate(pts, u, g);
  // Radial lines: indices 1 + (i-1)*na + j for ring i.
  for (int j = 0; j < na; ++j)
    for (int i = 1; i + 1 <= nr; ++i) {
      const double prev = i == 1 ? c.a[0] : c.a[1 + (i - 2) * na + j];
      const double mid = c.a[1 + (i - 1) * na + j];
      const double next = c.a[1 + i * na + j];
      CHECK(mid >= 0.5 * (prev + next) - 1e-12);
    }
}

TEST_CASE("K-envelope of the quadratic on B_2") {
  const double h = 0.02;
  const auto pts = disk_samples(2.0, h);
  const auto u = eval(pts, half_square);
  const SlopeGrid g = make_slope_grid(kDisk, 64, 256);
  const auto c = restricted_conjugate(pts, u, g);
  const EvalBox box{-2.0, -2.0, 0.1, 41, 41};
  const EnvelopeField f = k_envelope(c, g, box);
  CHECK(f.value_at({2, 0}, c) == doctest::Approx(1.5).epsilon(1e-3));
  CHECK(f.value_at({0.5, 0}, c) == doctest::Approx(0.125).epsilon(2e-3));
  // Dense brute force over ten times more slopes, analytic intercepts.
  const SlopeGrid dense = make_slope_grid(kDisk, 640, 2560);
  for (Vec2 x : {Vec2{2, 0}, Vec2{0.5, 0}}) {
    double best = -1e300;
    for (std::size_t m = 0; m < dense.size(); ++m) best = std::max(best, -0.5 * norm2(dense.at(m)) + dot(dense.at(m), x));
    CHECK(best == doctest::Approx(disk_envelope(x)).epsilon(1e-6));
    CHECK(f.value_at(x, c) == doctest::Approx(best).epsilon(2e-3));
  }
  for (int j = 0; j < box.ny; ++j)
    for (int i = 0; i < box.nx; ++i) {
      const Vec2 x = box.node(i, j);
      CHECK(std::abs(f.phi[f.index(i, j)] - disk_envelope(x)) <= h * h + g.spacing * g.spacing);
      CHECK(kDisk.contains(f.xi_star(i, j), 1e-12));
    }
  // Below u at every sample.
  for (std::size_t i = 0; i < pts.size(); i += 7) CHECK(f.value_at(pts[i], c) <= u[i] + 1e-12);
}

TEST_CASE("K-envelope of a linear function is the function") {
  const SlopeBody sq = SlopeBody::square();
  const SlopeGrid g = make_slope_grid(sq, 8, 8);
  const Vec2 xi0{0.5, 0.25};
  const auto pts = disk_samples(1.0, 0.05);
  std::vector<double> u;
  for (const Vec2& p : pts) u.push_back(dot(xi0, p));
  const auto c = restricted_conjugate(pts, u, g);
  const EvalBox box{-0.5, -0.5, 0.05, 21, 21};
  const EnvelopeField f = k_envelope(c, g, box);
  for (int j = 0; j < box.ny; ++j)
    for (int i = 0; i < box.nx; ++i) {
      CHECK(f.phi[f.index(i, j)] == doctest::Approx(dot(xi0, box.node(i, j))).epsilon(1e-14).scale(1.0));
      CHECK(norm(f.xi_star(i, j) - xi0) == 0.0);
    }
  const C11Report r = check_c11(f);
  CHECK(r.lip_grad <= 1e-12);
  CHECK(r.convexity_violation <= 1e-12);
  // Single-point range: the farthest slope sample is a square corner.
  CHECK(r.range_hausdorff == doctest::Approx(norm(Vec2{-1, -1} - xi0)));
}

TEST_CASE("double-well section: flat bottom, symmetric contact pair") {
  const SlopeBody seg = SlopeBody::polygon({{-1, 0}, {1, 0}});
  const SlopeGrid g = make_slope_grid(seg, 2000, 3);
  std::vector<Vec2> pts;
  std::vector<double> u;
  std::vector<Sym2> hess;
  const int n = 4000;
  for (int i = 1; i < n; ++i) {
    const double t = -2.0 + 4.0 * i / n;
    pts.push_back({t, 0});
    u.push_back(t * t * t * t - t * t);
    hess.push_back({12 * t * t - 2, 0, 0});
  }
  // The exact contact points +-1/sqrt(2) are appended as samples.
  const double s = 1.0 / std::sqrt(2.0);
  for (double t : {-s, s}) {
    pts.push_back({t, 0});
    u.push_back(t * t * t * t - t * t);
    hess.push_back({12 * t * t - 2, 0, 0});
  }
  const auto c = restricted_conjugate(pts, u, g);
  const EvalBox box{-0.5, 0.0, 0.25, 5, 1};
  const EnvelopeField f = k_envelope(c, g, box);
  // Dense 1-D slope brute force oracle.
  auto oracle = [&](double x) {
    double best = -1e300;
    for (int k = 0; k <= 20000; ++k) {
      const double xi = -1.0 + 2.0 * k / 20000;
      double a = 1e300;
      for (int i = 0; i <= 40000; ++i) {
        const double t = -2.0 + 4.0 * i / 40000;
        a = std::min(a, t * t * t * t - t * t - xi * t);
      }
      best = std::max(best, a + xi * x);
      if (k % 2000 != 0 && std::abs(xi) > 0.2) k += 9;  // coarse away from the relevant slopes
    }
    return best;
  };
  CHECK(f.phi[f.index(2, 0)] == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(oracle(0.0) == doctest::Approx(-0.25).epsilon(1e-6));
  for (int i = 0; i < 5; ++i) CHECK(f.phi[f.index(i, 0)] == doctest::Approx(-0.25).epsilon(1e-9));

  // Grid neighbours of the wells sit about 2e-8 above the minimum; a tight
  // tolerance isolates the exact pair.
  const ContactData cd = contact_data(pts, u, hess, seg, {0, 0}, {0, 0}, 1e-12);
  REQUIRE(cd.contact.size() == 2);
  CHECK(std::abs(pts[cd.contact[0]].x) == doctest::Approx(s));
  CHECK(pts[cd.contact[0]].x == doctest::Approx(-pts[cd.contact[1]].x));
  REQUIRE(cd.witness_found);
  double sum = 0.0;
  for (auto [i, l] : cd.lambda) {
    CHECK(l == doctest::Approx(0.5).epsilon(1e-9));
    sum += l;
  }
  CHECK(sum == doctest::Approx(1.0));
  CHECK(cd.H.xx == doctest::Approx(12 * 0.5 - 2).epsilon(1e-9));
}

TEST_CASE("contact data for the quadratic") {
  const auto pts = disk_samples(2.0, 0.05);
  const auto u = eval(pts, half_square);
  const std::vector<Sym2> hess(pts.size(), Sym2::identity());

  ContactData cd = contact_data(pts, u, hess, kDisk, {0.3, 0.4}, {0.3, 0.4});
  REQUIRE(cd.contact.size() == 1);
  CHECK(norm(pts[cd.contact[0]] - Vec2{0.3, 0.4}) <= 1e-12);
  CHECK(cd.normal_cone.empty());
  REQUIRE(cd.witness_found);
  CHECK(cd.H.xx == doctest::Approx(1.0));
  CHECK(cd.H.yy == doctest::Approx(1.0));
  CHECK(cd.H.xy == doctest::Approx(0.0));

  cd = contact_data(pts, u, hess, kDisk, {1, 0}, {2, 0});
  REQUIRE(cd.contact.size() == 1);
  CHECK(norm(pts[cd.contact[0]] - Vec2{1, 0}) <= 1e-12);
  REQUIRE(cd.normal_cone.size() == 1);
  REQUIRE(cd.witness_found);
  REQUIRE(cd.lambda.size() == 1);
  CHECK(cd.lambda[0].second == doctest::Approx(1.0));
  CHECK(cd.mu[0] == doctest::Approx(1.0));

  // Interior slope with x away from the contact point: no witness.
  cd = contact_data(pts, u, hess, kDisk, {0.3, 0.4}, {1.0, 0.4});
  CHECK_FALSE(cd.witness_found);
  CHECK_THROWS_AS(contact_data(pts, u, hess, kDisk, {2, 0}, {2, 0}), Error);
}

TEST_CASE("C11 check and gradient refinement on the quadratic") {
  const double hp = 0.01;
  const auto pts = disk_samples(1.3, hp);
  const auto u = eval(pts, half_square);
  const SlopeGrid g = make_slope_grid(kDisk, 64, 256);
  const auto c = restricted_conjugate(pts, u, g);
  const EvalBox box{-1.2, -1.2, 0.04, 61, 61};
  const EnvelopeField f = k_envelope(c, g, box);
  const C11Report r = check_c11(f);
  // Snapped slopes add one grid spacing per node step to the analytic constant 1.
  CHECK(r.lip_grad <= 1.0 + 5 * box.h + 2 * g.spacing / box.h);
  CHECK(r.convexity_violation <= 1e-12);
  CHECK(r.range_hausdorff <= 2 * g.spacing);

  const RefinedGradient rg = refine_gradient(f, c, kDisk);
  double worst_raw = 0.0, worst_ref = 0.0;
  for (int j = 0; j < box.ny; ++j)
    for (int i = 0; i < box.nx; ++i) {
      const Vec2 x = box.node(i, j);
      if (norm(x) > 0.9) continue;
      worst_raw = std::max(worst_raw, norm(f.xi_star(i, j) - x));
      worst_ref = std::max(worst_ref, norm(rg.grad[f.index(i, j)] - x));
      CHECK(kDisk.contains(rg.grad[f.index(i, j)], 1e-12));
    }
  CHECK(worst_ref < 0.1 * worst_raw);
}

TEST_CASE("envelope invariants") {
  // Monotonicity in K with nested sample sets.
  const SlopeBody big = SlopeBody::square(1.0), small = SlopeBody::square(0.5);
  const SlopeGrid gb = make_slope_grid(big, 16, 16), gs = make_slope_grid(small, 8, 8);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1, 1);
  const auto pts = disk_samples(1.0, 0.05);
  std::vector<double> u;
  for (const Vec2& p : pts) u.push_back(std::cos(2 * p.x) * p.y + 0.3 * U(rng));
  const EvalBox box{-1.0, -1.0, 0.05, 41, 41};
  const auto cb = restricted_conjugate(pts, u, gb), cs = restricted_conjugate(pts, u, gs);
  const EnvelopeField fb = k_envelope(cb, gb, box), fs = k_envelope(cs, gs, box);
  for (std::size_t k = 0; k < fb.phi.size(); ++k) CHECK(fs.phi[k] <= fb.phi[k] + 1e-12);
  const C11Report r = check_c11(fb);
  CHECK(r.convexity_violation <= 1e-12);
  // Below u and argmax in K.
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(fb.value_at(pts[i], cb) <= u[i] + 1e-12);
  for (std::size_t k = 0; k < fb.arg.size(); ++k) CHECK(big.contains(gb.at(fb.arg[k]), 1e-12));

  // Recovery of a convex function with gradients inside K.
  auto conv = [](Vec2 p) { return 0.2 * p.x * p.x + 0.15 * p.y * p.y + 0.1 * p.x * p.y + 0.05 * p.x; };
  std::vector<double> v;
  for (const Vec2& p : pts) v.push_back(conv(p));
  const SlopeGrid gd = make_slope_grid(big, 64, 64);
  const auto cd = restricted_conjugate(pts, v, gd);
  const EnvelopeField fd = k_envelope(cd, gd, box);
  double worst = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (norm(pts[i]) < 0.9) worst = std::max(worst, std::abs(fd.value_at(pts[i], cd) - v[i]));
  CHECK(worst <= 0.05 * (0.05 + gd.spacing));
}
