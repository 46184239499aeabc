#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "isocone/error.hpp"
#include "isocone/experiments.hpp"
#include "support.hpp"

using namespace isocone;

namespace {

const HomWeight kXY(Cone::quadrant(), Monomial{1, 1});
const HomWeight kX(Cone::quadrant(), Monomial{1, 0});
const HomWeight kHalfY(Cone::upper_half_plane(), Monomial{0, 1});

const std::vector<double> kEps{0.02, 0.04, 0.08, 0.16};

const DiagFit& fit_named(const DiagTable& d, const std::string& name) {
  const auto it = std::find_if(d.fits.begin(), d.fits.end(), [&](const DiagFit& f) { return f.direction.name == name; });
  REQUIRE(it != d.fits.end());
  return *it;
}

}  // namespace

TEST_CASE("sharpness sweep on the quadrant") {
  const SharpnessResult s = sharpness_sweep(kXY, 4096, {4}, kEps);
  CHECK(s.slope == doctest::Approx(0.5).epsilon(0.1));
  CHECK(s.delta_eps2_spread < 0.2);
  REQUIRE(s.sweep.rows.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(s.sweep.rows[i].param == kEps[i]);
  // Two-point slopes bracket the fitted one.
  const auto& r = s.sweep.rows;
  const double first = std::log(r[1].asym / r[0].asym) / std::log(r[1].delta_w / r[0].delta_w);
  const double last = std::log(r[3].asym / r[2].asym) / std::log(r[3].delta_w / r[2].delta_w);
  CHECK(s.slope >= std::min(first, last) - 1e-12);
  CHECK(s.slope <= std::max(first, last) + 1e-12);
}

TEST_CASE("sharpness sweep on the half-plane minimizes over translations") {
  const SharpnessResult s = sharpness_sweep(kHalfY, 4096, {2}, kEps);
  CHECK(s.slope == doctest::Approx(0.5).epsilon(0.1));
  CHECK(s.delta_eps2_spread < 0.2);
  // The unshifted ball is never a better fit than the minimizing translation.
  for (const SweepRow& r : s.sweep.rows) {
    const StarSet e = perturbed_member(kHalfY, 4096, {2}, r.param);
    const MeasureReport m = deficit(e);
    CHECK(r.asym <= symdiff_with_ball_general(e, {0, 0}, m.r_eq) / m.w_volume + 1e-12);
  }
}

TEST_CASE("sharpness sweep rejects bad inputs") {
  CHECK_THROWS_AS(sharpness_sweep(kXY, 1024, {4}, {0.05}), Error);
  CHECK_THROWS_AS(sharpness_sweep(kXY, 1024, {4}, {0.05, 0.05, 0.1}), Error);
  CHECK_THROWS_AS(sharpness_sweep(kXY, 1024, {4}, {0.05, 0.1, 0.3}), Error);
  // cos(0) is constant, so its mean-zero projection vanishes.
  CHECK_THROWS_AS(sharpness_sweep(kXY, 1024, {0}, kEps), Error);
}

TEST_CASE("stability sweep on dilated balls") {
  std::vector<CorpusMember> balls;
  for (double r : {0.5, 0.75, 1.0, 1.5, 2.0}) balls.push_back({MemberKind::dilated_ball, r});
  const SweepResult s = stability_sweep(kXY, balls, {});
  REQUIRE(s.rows.size() == 5);
  for (const SweepRow& r : s.rows) {
    CHECK(std::abs(r.delta_w) <= 1e-9);
    CHECK(r.asym <= 1e-6);
    CHECK(!r.ratio);
  }
  CHECK(!s.max_ratio);
  CHECK(s.uniqueness_ok);
  CHECK(s.csv() == "param,delta_w,asym,ratio\n" + [&] {
    std::string body;
    for (const SweepRow& r : s.rows)
      body += format_number(r.param) + "," + format_number(r.delta_w) + "," + format_number(r.asym) + ",\n";
    return body;
  }());
}

TEST_CASE("stability sweep on the default corpus") {
  const std::vector<CorpusMember> corpus = default_corpus();
  REQUIRE(corpus.size() == 30);
  StabilityOptions opt;
  const SweepResult a = stability_sweep(kXY, corpus, opt);
  REQUIRE(a.rows.size() == 30);
  for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].param == static_cast<double>(i));
  REQUIRE(a.max_ratio);
  CHECK(std::isfinite(*a.max_ratio));
  CHECK(a.uniqueness_ok);
  CHECK(a.within_c_max);

  opt.n_theta = 8192;
  const SweepResult b = stability_sweep(kXY, corpus, opt);
  REQUIRE(b.max_ratio);
  CHECK(std::abs(*b.max_ratio / *a.max_ratio - 1.0) < 0.25);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].ratio.has_value() == b.rows[i].ratio.has_value());
    if (a.rows[i].ratio) CHECK(std::abs(*b.rows[i].ratio / *a.rows[i].ratio - 1.0) < 0.25);
  }

  opt.n_theta = 4096;
  opt.c_max = 0.5 * *a.max_ratio;
  CHECK(!stability_sweep(kXY, corpus, opt).within_c_max);
}

TEST_CASE("corpus ratios agree with the sharpness fit") {
  const SharpnessResult s = sharpness_sweep(kXY, 4096, {4}, kEps);
  std::vector<CorpusMember> family;
  for (double e : kEps) family.push_back({MemberKind::perturbed_ball, e, 4});
  const SweepResult c = stability_sweep(kXY, family, {});
  for (const SweepRow& r : c.rows) {
    REQUIRE(r.ratio);
    const double predicted = std::exp(s.intercept) * std::pow(r.delta_w, s.slope - 0.5);
    CHECK(*r.ratio == doctest::Approx(predicted).epsilon(0.05));
  }
}

TEST_CASE("sector bumps and labels") {
  const CorpusMember bump{MemberKind::sector_bump, 0.1, 0, 0.5, 0.2};
  const StarSet e = bump.build(kXY, 4096);
  const double mid = kPi / 4;
  CHECK(e.radius_at(mid) == doctest::Approx(1.1).epsilon(1e-6));
  CHECK(e.radius_at(0.1 * kPi / 2) == 1.0);
  CHECK(bump.label() == "bump c=0.5 a=0.1 width=0.2");
  CHECK(CorpusMember{MemberKind::perturbed_ball, 0.05, 3}.label() == "perturbed m=3 eps=0.05");
}

TEST_CASE("opening sweep reports finite constants") {
  const auto rows = opening_sweep({0.5, 1.0, kPi / 2}, 2048);
  REQUIRE(rows.size() == 3);
  for (const OpeningRow& r : rows) {
    CHECK(std::isfinite(r.max_ratio));
    CHECK(r.max_ratio > 0.0);
  }
}

TEST_CASE("translation diagnostics: w = x, direction (0, 1)") {
  const DiagTable d = translation_diagnostics(kX, {0.0, 0.025, 0.05, 0.1});
  const DiagFit& c = fit_named(d, "C0");
  CHECK(std::abs(c.direction.v.x) <= 1e-12);
  CHECK(std::abs(c.direction.v.y) == doctest::Approx(1.0));
  for (const DiagRow& r : d.rows) {
    if (r.t == 0.0) {
      CHECK(r.growth == 0.0);
      CHECK(r.separation == 0.0);
    }
    if (r.direction != "C0") continue;
    CHECK(r.separation == 0.0);
    if (r.t > 0.0) CHECK(r.growth > 0.0);
  }
}

TEST_CASE("translation diagnostics: w = xy, anti-diagonal separation is linear") {
  const DiagTable d = translation_diagnostics(kXY, {0.0, 0.025, 0.05, 0.1});
  const DiagFit& f = fit_named(d, "diag-");
  CHECK(f.separation_slope > 0.0);
  CHECK(f.separation_nonlinearity < 0.1);
  for (const DiagRow& r : d.rows)
    if (r.direction == "diag-" && r.t > 0.0) CHECK(r.separation > 0.0);
}

TEST_CASE("translation diagnostics match tensor-quadrature oracles") {
  for (const HomWeight* w : {&kXY, &kX, &kHalfY}) {
    const DiagTable d = translation_diagnostics(*w, {0.0, 0.05, 0.1});
    for (const DiagRow& r : d.rows) {
      const auto dir = std::find_if(d.fits.begin(), d.fits.end(), [&](const DiagFit& f) { return f.direction.name == r.direction; });
      const Vec2 xi = dir->direction.v * r.t;
      const double g = testing::polar_growth_oracle(*w, xi);
      const double s = testing::tensor_separation_oracle(*w, 0.2, 0.4, 0.2, 0.4, xi);
      CHECK(std::abs(r.growth - g) <= 1e-3 * std::max(1e-3, std::abs(g)));
      CHECK(std::abs(r.separation - s) <= 1e-3 * std::max(1e-3, std::abs(s)));
    }
  }
}

TEST_CASE("diag csv header and t = 0 rows") {
  const DiagTable d = translation_diagnostics(kXY, {0.0, 0.05});
  const std::string csv = d.csv();
  CHECK(csv.rfind("direction,t,growth,separation\n", 0) == 0);
  CHECK(csv.find("diag+,0,0,0\n") != std::string::npos);
  CHECK_THROWS_AS(translation_diagnostics(kXY, {}), Error);
}

TEST_CASE("random AM-GM audit") {
  const AmgmAudit a = amgm_random_audit(20000, 3);
  CHECK(a.samples == 20000);
  CHECK(a.violations == 0);
  CHECK(a.worst_margin <= 1e-12);
  const AmgmAudit b = amgm_random_audit(20000, 3);
  CHECK(b.worst_margin == a.worst_margin);
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_number(-INFINITY) == "-inf");
}
