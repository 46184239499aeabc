#include <random>

#include "doctest.h"
#include "isocone/analysis.hpp"
#include "isocone/error.hpp"
#include "support.hpp"

using namespace isocone;
using namespace isocone::testing;

namespace {

const Cone kQuad = Cone::quadrant();

}  // namespace

TEST_CASE("quantitative AM-GM examples") {
  AmgmResult r = quantitative_amgm_check({1.0}, {2.5}, 2.5);
  CHECK(r.lhs == 0.0);
  CHECK(r.rhs == doctest::Approx(0.0).scale(1.0));
  CHECK(r.holds);
  r = quantitative_amgm_check({1.0, 1.0}, {1.2, 0.8}, 1.0);
  CHECK(r.lhs == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(r.rhs == doctest::Approx(8.0 / 3.0 * 8.0 * 0.04).epsilon(1e-12));
  CHECK(r.holds);
  r = quantitative_amgm_check({1.0, 1.0, 2.0}, {1.0, 1.0, 1.0}, 1.0);
  CHECK(r.lhs == 0.0);
  CHECK(std::abs(r.rhs) <= 1e-15);
  CHECK(r.holds);
  try {
    quantitative_amgm_check({1.0, 1.0}, {2.0, 1.0}, 1.0);
    FAIL("expected inadmissible input");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::inadmissible_input);
  }
}

TEST_CASE("quantitative AM-GM on random admissible inputs") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> mdist(1, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0;
  for (int it = 0; it < 20000; ++it) {
    const int m = mdist(rng);
    std::vector<double> lam(m), x(m);
    const double s = 1.0 + 9.0 * u(rng);
    double tot = 0.0;
    for (double& l : lam) tot += (l = 0.05 + u(rng));
    for (double& l : lam) l *= s / tot;
    const double c = 0.1 + 3.0 * u(rng);
    double mean = 0.0;
    for (int i = 0; i < m; ++i) mean += lam[i] * (x[i] = 3.0 * c * u(rng));
    if (mean > c * s)
      for (double& v : x) v *= c * s / mean * u(rng);
    violations += !quantitative_amgm_check(lam, x, c).holds;
  }
  CHECK(violations == 0);
}

TEST_CASE("one_dim_stability_check examples") {
  StabilityResult r = one_dim_stability_check(IntervalSet({{0.0, 1.0}}), 1.0, 1.3);
  CHECK(r.lhs == doctest::Approx(0.0).scale(1.0));
  r = one_dim_stability_check(IntervalSet({{0.0, 0.8}}), 1.0, 2.0);
  CHECK(r.lhs == doctest::Approx((1.0 - 0.512) / 3.0).epsilon(1e-12));
  CHECK(r.denom == doctest::Approx(0.64 * 0.2).epsilon(1e-12));
  CHECK(r.ratio == doctest::Approx(0.162666666667 / 0.128).epsilon(1e-9));
  r = one_dim_stability_check(IntervalSet({{0.0, 1.0}, {2.0, 2.1}}), 1.0, 0.0);
  CHECK(r.lhs == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.denom == doctest::Approx(2.1).epsilon(1e-12));
  CHECK(r.ratio == doctest::Approx(0.1 / 2.1).epsilon(1e-12));
  // Toggle: counting 0 as a boundary point adds |l - 0| * 0^0 = 1 for gamma = 0.
  CHECK(one_dim_stability_check(IntervalSet({{0.0, 1.0}, {2.0, 2.1}}), 1.0, 0.0, 1.0, true).denom ==
        doctest::Approx(3.1));
  CHECK_THROWS_AS(one_dim_stability_check(IntervalSet({{0.0, 1.0}}), 1.3, 0.0), Error);
}

TEST_CASE("one_dim_stability_family agrees with the direct check on its worst set") {
  const auto f = one_dim_stability_family(1.0, {0.8, 1.0, 1.2}, 0.1, 2.0, 2);
  CHECK(std::isfinite(f.max_ratio));
  const StabilityResult r = one_dim_stability_check(IntervalSet(f.worst_set), f.worst_l, 1.0);
  CHECK(r.ratio == doctest::Approx(f.max_ratio).epsilon(1e-12));
  // Brute force over the same 2-interval family through the public check.
  double brute = 0.0;
  for (int a1 = 0; a1 <= 20; ++a1)
    for (int b1 = a1 + 1; b1 <= 20; ++b1) {
      for (double l : {0.8, 1.0, 1.2})
        brute = std::max(brute, one_dim_stability_check(IntervalSet({{a1 * 0.1, b1 * 0.1}}), l, 1.0).ratio);
      for (int a2 = b1 + 1; a2 <= 20; ++a2)
        for (int b2 = a2 + 1; b2 <= 20; ++b2)
          for (double l : {0.8, 1.0, 1.2})
            brute = std::max(brute, one_dim_stability_check(
                                        IntervalSet({{a1 * 0.1, b1 * 0.1}, {a2 * 0.1, b2 * 0.1}}), l, 1.0)
                                        .ratio);
    }
  CHECK(f.max_ratio == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("shift lower bound on random piecewise-linear functions") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int it = 0; it < 1000; ++it) {
    std::vector<std::pair<double, double>> eta;
    double t = -1.0;
    const int k = 3 + static_cast<int>(u(rng) * 10);
    for (int i = 0; i < k; ++i) {
      t += 0.05 + 0.5 * u(rng);
      eta.emplace_back(t, 2.0 * u(rng) - 1.0);
    }
    const double a = -0.5 + u(rng), b = a + 0.1 + 2.0 * u(rng), eps = 0.01 + 0.3 * u(rng);
    const ShiftBound s = shift_lower_bound(eta, a, b, eps);
    CHECK(s.lhs >= s.rhs - 1e-9);
    if (it < 20) {
      // Independent midpoint oracle for the left side.
      auto ev = [&](double x) {
        if (x <= eta.front().first) return eta.front().second;
        if (x >= eta.back().first) return eta.back().second;
        for (std::size_t i = 1; i < eta.size(); ++i)
          if (x <= eta[i].first)
            return eta[i - 1].second + (eta[i].second - eta[i - 1].second) * (x - eta[i - 1].first) /
                                           (eta[i].first - eta[i - 1].first);
        return eta.back().second;
      };
      const int m = 200000;
      double mid = 0.0;
      for (int i = 0; i < m; ++i) {
        const double x = a + (b - a) * (i + 0.5) / m;
        mid += std::abs(ev(x + eps) - ev(x));
      }
      CHECK(s.lhs == doctest::Approx(mid * (b - a) / m).epsilon(1e-6));
    }
  }
}

TEST_CASE("polar slicing reproduces the weighted volume") {
  std::mt19937_64 rng(9);
  const HomWeight xy(kQuad, Monomial{1, 1});
  for (int i = 0; i < 5; ++i) {
    const StarSet e = StarSet::from_function(xy, 2048, random_radial(kQuad, rng));
    CHECK(std::abs(polar_slice_volume(e) - weighted_volume(e)) <= 1e-10);
  }
}

TEST_CASE("translated_ball_control_check") {
  const HomWeight xy(kQuad, Monomial{1, 1});
  TranslatedBallControl t = translated_ball_control_check(StarSet::ball(xy, 8192), {0, 0});
  CHECK(t.lhs == 0.0);
  CHECK_FALSE(t.ratio_defined);
  t = translated_ball_control_check(StarSet::ball(xy, 8192), {0.05, 0.05});
  CHECK(t.hypothesis_holds);
  CHECK(t.lhs > 0.0);
  CHECK(t.rhs > 0.0);
  CHECK(t.ratio <= 10.0);
  const StarSet e = StarSet::perturbed_ball(xy, 8192, 0.1, 4);
  t = translated_ball_control_check(e, {0, 0});
  CHECK(t.ratio_defined);
  CHECK(std::isfinite(t.ratio));
  CHECK(t.rhs == doctest::Approx(boundary_weighted_integral(e, [](Vec2 p) { return std::abs(norm(p) - 1.0); })));
  CHECK_THROWS_AS(translated_ball_control_check(e, {0.3, 0.0}), Error);
}

TEST_CASE("ball_volume_growth") {
  const HomWeight x(kQuad, Monomial{1, 0}), xy(kQuad, Monomial{1, 1});
  CHECK(ball_volume_growth(xy, {0, 0}) == 0.0);
  CHECK(shifted_ball_volume(xy, {0, 0}) == doctest::Approx(1.0 / 8).epsilon(1e-12));
  CHECK(shifted_ball_volume(x, {0, 0}) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  std::vector<double> slopes;
  for (double s : {0.05, 0.1, 0.2}) {
    const double g = ball_volume_growth(x, {0.0, s});
    CHECK(g > 0.0);
    slopes.push_back(g / s);
  }
  const auto [lo, hi] = std::minmax_element(slopes.begin(), slopes.end());
  CHECK(*hi / *lo < 1.15);

  const Vec2 xi{0.0, 0.1};
  const double oracle = midpoint_integral(kQuad, 0.0, 1.2, 0.0, 1.2, 5e-4, [&](Vec2 p) {
    return (norm(p - xi) < 1.0 ? p.x : 0.0) - (norm(p) < 1.0 ? p.x : 0.0);
  });
  CHECK(std::abs(ball_volume_growth(x, xi) - oracle) <= 1e-4);

  CHECK(ball_volume_growth(xy, {-0.1, -0.1}) < 0.0);
  const Vec2 zeta{-0.1, -0.1};
  const double oracle2 = midpoint_integral(kQuad, 0.0, 1.2, 0.0, 1.2, 5e-4, [&](Vec2 p) {
    return (norm(p - zeta) < 1.0 ? p.x * p.y : 0.0) - (norm(p) < 1.0 ? p.x * p.y : 0.0);
  });
  CHECK(std::abs(ball_volume_growth(xy, zeta) - oracle2) <= 1e-4);
}

TEST_CASE("shifted_weight_separation") {
  const HomWeight x(kQuad, Monomial{1, 0}), xy(kQuad, Monomial{1, 1});
  const Box q{0.2, 0.4, 0.2, 0.4};
  CHECK(shifted_weight_separation(xy, q, {0, 0}) == 0.0);
  CHECK(shifted_weight_separation(x, q, {0, 0.05}) == 0.0);
  const double full = shifted_weight_separation(xy, q, {0.05, -0.05});
  const double half = shifted_weight_separation(xy, q, {0.025, -0.025});
  CHECK(full > 0.0);
  CHECK(full / half == doctest::Approx(2.0).epsilon(0.1));
  const double oracle = midpoint_integral(kQuad, 0.2, 0.4, 0.2, 0.4, 2.5e-4, [&](Vec2 p) {
    return std::abs(std::sqrt((p.x + 0.05) * (p.y - 0.05)) - std::sqrt(p.x * p.y));
  });
  CHECK(full == doctest::Approx(oracle).epsilon(1e-4));
  CHECK_THROWS_AS(shifted_weight_separation(xy, q, {-0.3, 0.0}), Error);
}

TEST_CASE("psi_k and FMP constants") {
  CHECK(k_of_D(3.0) == doctest::Approx(0.137533).epsilon(1e-5));
  for (double D : {2.5, 3.0, 4.0, 7.2}) {
    const FmpConstants f = psi_k(D);
    CHECK(f.psi.front() == 0.0);
    CHECK(f.psi.back() == 0.0);
    CHECK(psi(D, 0.5) == doctest::Approx(std::pow(2.0, 1.0 / D) - 1.0).epsilon(1e-14));
    int violations = 0, convex = 0;
    for (std::size_t i = 0; i < f.t.size(); ++i)
      if (f.t[i] <= 0.5 && f.psi[i] < 3.0 * f.k * std::pow(f.t[i], (D - 1.0) / D) - 1e-15) ++violations;
    for (std::size_t i = 1; i + 1 < f.t.size(); ++i)
      if (f.psi[i - 1] - 2.0 * f.psi[i] + f.psi[i + 1] >= 0.0) ++convex;
    CHECK(violations == 0);
    CHECK(convex == 0);
  }
}

TEST_CASE("cheeger_bruteforce_1d") {
  const IntervalSet e({{1.0, 2.0}});
  const CheegerResult r = cheeger_bruteforce_1d(e, 2.0);
  const double c = std::cbrt(4.5);
  CHECK(r.tau == doctest::Approx((c * c + 4.0) / 4.0).epsilon(1e-6));
  CHECK(r.tau == doctest::Approx(1.6815).epsilon(1e-3));
  CHECK(std::isinf(cheeger_ratio_1d(e, IntervalSet({{1.2, 1.4}}), 2.0)));
  CHECK_THROWS_AS(cheeger_bruteforce_1d(IntervalSet({{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}}), 2.0), Error);
  // Two components: the best competitor stays connected on this example.
  const CheegerResult two = cheeger_bruteforce_1d(IntervalSet({{0.5, 1.0}, {1.5, 2.0}}), 1.0);
  CHECK(two.best.size() == 1);
}

TEST_CASE("cheeger_bruteforce_2d on a coarse ball") {
  const HomWeight xy(kQuad, Monomial{1, 1});
  const GridSet g = GridSet::rasterize(kQuad, 0, 0, 0.2, 6, 6, [](Vec2 p) { return norm(p) < 1.0; });
  REQUIRE(g.count() <= 24);
  const CheegerResult r = cheeger_bruteforce_2d(g, xy);
  CHECK(r.tau >= 1.0 + k_of_D(4.0));
  const GridSet big = GridSet::rasterize(kQuad, 0, 0, 0.1, 11, 11, [](Vec2 p) { return norm(p) < 1.0; });
  CHECK_THROWS_AS(cheeger_bruteforce_2d(big, xy), Error);
}

TEST_CASE("removal lemma") {
  const HomWeight xy(kQuad, Monomial{1, 1});
  const int n = 4097;
  const StarSet b = StarSet::ball(xy, n);
  const int i0 = 2000, i1 = i0 + static_cast<int>(0.05 / (kPi / 2) * (n - 1));
  CHECK_FALSE(removal_lemma_check(b, i0, i1).applicable);
  CHECK_FALSE(removal_lemma_check(b, 0, 3000).applicable);  // w(F) > w(E)/2

  const StarSet e = StarSet::perturbed_ball(xy, n, 0.1, 4);
  int a = -1, z = -1;
  for (int j = 0; j < n; ++j)
    if (e.radii()[j] > 1.0) {
      if (a < 0) a = j;
      z = j;
    } else if (a >= 0) {
      break;
    }
  const RemovalReport bump = removal_lemma_check(e, a, z);
  CHECK(bump.w_F > 0.0);
  if (bump.applicable) {
    CHECK(bump.i_holds);
    CHECK(bump.ii_holds);
    CHECK(bump.iii_holds);
  }

  int applicable = 0, with_iii = 0;
  for (const RemovalCase& c : removal_family()) {
    const RemovalReport r = removal_lemma_check(c.set, c.i0, c.i1);
    if (!r.applicable) continue;
    ++applicable;
    with_iii += r.iii_applicable;
    CHECK(r.i_holds);
    CHECK(r.ii_holds);
    CHECK(r.iii_holds);
  }
  CHECK(applicable >= 10);
  CHECK(with_iii >= 5);
}

TEST_CASE("trace and Poincare inequalities on the worked example") {
  const IntervalSet e({{1.0, 2.0}});
  const double tau = cheeger_bruteforce_1d(e, 2.0).tau;
  const PiecewiseConstant f{{1.5}, {0.0, 1.0}};
  const TracePoincareReport r = trace_poincare_check_1d(e, f, 2.0, tau);
  CHECK(r.median == 1.0);
  CHECK(r.lhs == doctest::Approx(2.25));
  CHECK(r.trace_rhs == doctest::Approx(0.6815).epsilon(1e-3));
  CHECK(r.poincare_rhs == doctest::Approx(1.0405).epsilon(1e-3));
  CHECK(r.trace_holds);
  CHECK(r.poincare_holds);

  const TracePoincareReport neg = trace_poincare_check_1d(e, PiecewiseConstant{{1.5}, {0.0, -1.0}}, 2.0, tau);
  CHECK(neg.median == -1.0);
  CHECK(neg.lhs == doctest::Approx(r.lhs));
  CHECK(neg.trace_rhs == doctest::Approx(r.trace_rhs));
  CHECK(neg.poincare_rhs == doctest::Approx(r.poincare_rhs));

  const TracePoincareReport flat = trace_poincare_check_1d(e, PiecewiseConstant{{}, {3.0}}, 2.0, tau);
  CHECK(flat.lhs == 0.0);
  CHECK(flat.trace_rhs == 0.0);
  CHECK(flat.poincare_rhs == 0.0);
}
