#include "isocone/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "isocone/error.hpp"
#include "isocone/parallel.hpp"

namespace isocone {

namespace {

constexpr double kRatioFloor = 1e-9;
constexpr double kUniqueDelta = 1e-8;
constexpr double kUniqueAsym = 1e-4;

struct Fit {
  double slope;
  double intercept;
};

Fit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i], sy += y[i], sxx += x[i] * x[i], sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) throw Error(Errc::invalid_argument, "degenerate least-squares abscissae");
  const double slope = (n * sxy - sx * sy) / den;
  return {slope, (sy - slope * sx) / n};
}

/// Slope through the origin and the worst relative residual.
std::pair<double, double> origin_fit(const std::vector<double>& t, const std::vector<double>& v) {
  double tt = 0, tv = 0, vmax = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    tt += t[i] * t[i], tv += t[i] * v[i];
    vmax = std::max(vmax, std::abs(v[i]));
  }
  const double slope = tt > 0 ? tv / tt : 0.0;
  if (vmax == 0.0) return {slope, 0.0};
  double worst = 0;
  for (std::size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(v[i] - slope * t[i]));
  return {slope, worst / vmax};
}

SweepRow measure_row(const StarSet& e, double param, std::string label) {
  SweepRow row;
  row.param = param;
  row.label = std::move(label);
  row.delta_w = deficit(e).deficit;
  row.asym = asymmetry(e).value;
  if (row.delta_w > kRatioFloor) row.ratio = row.asym / std::sqrt(row.delta_w);
  return row;
}

void summarize(SweepResult& out, double c_max) {
  std::stable_sort(out.rows.begin(), out.rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.param < b.param; });
  for (const SweepRow& r : out.rows) {
    if (r.ratio) {
      out.max_ratio = out.max_ratio ? std::max(*out.max_ratio, *r.ratio) : *r.ratio;
      if (*r.ratio > c_max) out.within_c_max = false;
    }
    if (r.delta_w <= kUniqueDelta && r.asym > kUniqueAsym) out.uniqueness_ok = false;
  }
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string SweepResult::csv() const {
  std::ostringstream os;
  os << "param,delta_w,asym,ratio\n";
  for (const SweepRow& r : rows) {
    os << format_number(r.param) << ',' << format_number(r.delta_w) << ',' << format_number(r.asym) << ','
       << (r.ratio ? format_number(*r.ratio) : "") << '\n';
  }
  return os.str();
}

std::string SweepResult::coupling_csv() const {
  std::ostringstream os;
  os << "param,hessian,boundary,weight\n";
  for (const SweepRow& r : rows) {
    if (!r.coupling) continue;
    os << format_number(r.param) << ',' << format_number(r.coupling->hessian) << ','
       << format_number(r.coupling->boundary) << ',' << format_number(r.coupling->weight) << '\n';
  }
  return os.str();
}

StarSet perturbed_member(const HomWeight& w, int n_theta, const EtaSpec& eta, double eps) {
  return StarSet::perturbed_ball(w, n_theta, eps, eta.m);
}

SharpnessResult sharpness_sweep(const HomWeight& w, int n_theta, const EtaSpec& eta, std::vector<double> eps) {
  std::sort(eps.begin(), eps.end());
  eps.erase(std::unique(eps.begin(), eps.end()), eps.end());
  if (eps.size() < 3) throw Error(Errc::invalid_argument, "sharpness fit needs at least 3 distinct eps values");
  for (double e : eps) {
    if (!(e > 0.0 && e <= 0.25)) throw Error(Errc::invalid_argument, "eps must lie in (0, 0.25]");
  }
  // Surfaces a vanishing projection before any parallel work.
  (void)perturbed_member(w, 64, eta, eps.front());

  SharpnessResult out;
  out.sweep.rows.resize(eps.size());
  parallel_for(eps.size(), [&](std::size_t i) {
    out.sweep.rows[i] = measure_row(perturbed_member(w, n_theta, eta, eps[i]), eps[i], "eps");
  });
  summarize(out.sweep, std::numeric_limits<double>::infinity());
  out.sweep.manifest.n_theta = n_theta;

  std::vector<double> ld, la, q;
  for (const SweepRow& r : out.sweep.rows) {
    if (!(r.delta_w > kRatioFloor) || !(r.asym > 0.0)) {
      throw Error(Errc::invalid_argument, "sharpness fit needs delta_w > 1e-9 and asym > 0 at every eps");
    }
    ld.push_back(std::log(r.delta_w));
    la.push_back(std::log(r.asym));
    q.push_back(r.delta_w / (r.param * r.param));
  }
  const Fit f = least_squares(ld, la);
  out.slope = f.slope;
  out.intercept = f.intercept;
  const auto [lo, hi] = std::minmax_element(q.begin(), q.end());
  double mean = 0;
  for (double v : q) mean += v;
  mean /= static_cast<double>(q.size());
  out.delta_eps2_spread = (*hi - *lo) / mean;
  return out;
}

std::string CorpusMember::label() const {
  std::ostringstream os;
  switch (kind) {
    case MemberKind::dilated_ball: os << "ball r=" << a; break;
    case MemberKind::perturbed_ball: os << "perturbed m=" << m << " eps=" << a; break;
    case MemberKind::sector_bump: os << "bump c=" << c << " a=" << a << " width=" << width; break;
  }
  return os.str();
}

StarSet CorpusMember::build(const HomWeight& w, int n_theta) const {
  switch (kind) {
    case MemberKind::dilated_ball: return StarSet::ball(w, n_theta, a);
    case MemberKind::perturbed_ball: return StarSet::perturbed_ball(w, n_theta, a, m);
    case MemberKind::sector_bump: break;
  }
  const Cone& cone = w.cone();
  const double lo = cone.angle_lo();
  const double open = cone.is_whole_plane() ? 2.0 * kPi : cone.opening();
  const double amp = a, center = c, wid = width;
  return StarSet::from_function(w, n_theta, [=](double t) {
    const double d = (t - lo) / open - center;
    if (std::abs(d) >= 0.5 * wid) return 1.0;
    const double s = std::cos(kPi * d / wid);
    return 1.0 + amp * s * s;
  });
}

std::vector<CorpusMember> default_corpus() {
  std::vector<CorpusMember> out;
  for (double r : {0.5, 0.75, 1.0, 1.5, 2.0}) out.push_back({MemberKind::dilated_ball, r, 0, 0.5, 0.2});
  for (int m : {1, 2, 3, 4, 6}) {
    for (double e : {0.02, 0.05, 0.1, 0.2}) out.push_back({MemberKind::perturbed_ball, e, m, 0.5, 0.2});
  }
  for (double c : {0.2, 0.35, 0.5, 0.65, 0.8}) out.push_back({MemberKind::sector_bump, 0.1, 0, c, 0.2});
  return out;
}

SweepResult stability_sweep(const HomWeight& w, const std::vector<CorpusMember>& corpus, const StabilityOptions& opt) {
  if (opt.n_theta < 16) throw Error(Errc::invalid_argument, "n_theta must be at least 16");
  SweepResult out;
  out.rows.resize(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    out.rows[i] = measure_row(corpus[i].build(w, opt.n_theta), static_cast<double>(i), corpus[i].label());
  });
  if (opt.coupling) {
    // Coupling runs are parallel internally; members go one at a time.
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (!out.rows[i].ratio) continue;
      const CouplingReport rep = build_coupling(corpus[i].build(w, opt.resolution.n_theta), CouplingMode::weighted(),
                                                opt.resolution);
      out.rows[i].coupling = verify_coupling_estimates(rep, opt.coupling_q);
    }
  }
  summarize(out, opt.c_max);
  out.manifest.n_theta = opt.n_theta;
  out.manifest.mesh_h = opt.resolution.mesh_h;
  out.manifest.n_slope = opt.resolution.n_radial;
  out.manifest.eval_h = opt.resolution.eval_h;
  return out;
}

std::vector<OpeningRow> opening_sweep(const std::vector<double>& openings, int n_theta) {
  std::vector<OpeningRow> out(openings.size());
  parallel_for(openings.size(), [&](std::size_t i) {
    const HomWeight w = HomWeight::unweighted(Cone(0.0, openings[i]));
    double best = 0.0;
    for (int m : {1, 2, 4}) {
      for (double e : {0.05, 0.1, 0.2}) {
        const SweepRow r = measure_row(StarSet::perturbed_ball(w, n_theta, e, m), e, "");
        if (r.ratio) best = std::max(best, *r.ratio);
      }
    }
    out[i] = {openings[i], best};
  });
  return out;
}

std::vector<DiagDirection> diagnostic_directions(const HomWeight& w) {
  const Subspaces s = decompose_subspaces(w.cone(), w);
  std::vector<DiagDirection> out;
  for (std::size_t i = 0; i < s.C.size(); ++i) out.push_back({"C" + std::to_string(i), 'C', s.C[i]});
  for (std::size_t i = 0; i < s.E.size(); ++i) out.push_back({"E" + std::to_string(i), 'E', s.E[i]});
  const double r = 1.0 / std::sqrt(2.0);
  out.push_back({"diag+", 'D', {r, r}});
  out.push_back({"diag-", 'D', {r, -r}});
  return out;
}

std::string DiagTable::csv() const {
  std::ostringstream os;
  os << "direction,t,growth,separation\n";
  for (const DiagRow& r : rows) {
    os << r.direction << ',' << format_number(r.t) << ',' << format_number(r.growth) << ','
       << format_number(r.separation) << '\n';
  }
  return os.str();
}

AmgmAudit amgm_random_audit(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> mdist(1, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AmgmAudit out;
  out.samples = samples;
  std::vector<double> lam, x;
  for (std::size_t it = 0; it < samples; ++it) {
    const int m = mdist(rng);
    lam.assign(m, 0.0);
    x.assign(m, 0.0);
    const double s = 1.0 + 9.0 * u(rng);
    double tot = 0.0;
    for (double& l : lam) tot += (l = 0.05 + u(rng));
    for (double& l : lam) l *= s / tot;
    const double c = 0.1 + 3.0 * u(rng);
    double mean = 0.0;
    for (int i = 0; i < m; ++i) mean += lam[i] * (x[i] = 2.0 * c * u(rng));
    // Scale into the admissible half-space, sometimes onto its boundary.
    if (mean > c * s) {
      const double f = c * s / mean * (u(rng) < 0.2 ? 1.0 : 0.5 + 0.5 * u(rng));
      for (double& v : x) v *= f;
    }
    const AmgmResult r = quantitative_amgm_check(lam, x, c);
    const double margin = (r.lhs - r.rhs) / std::max(1.0, std::abs(r.rhs));
    out.worst_margin = std::max(out.worst_margin, margin);
    if (!r.holds) ++out.violations;
  }
  return out;
}

DiagTable translation_diagnostics(const HomWeight& w, const std::vector<double>& ts, Box q, int n) {
  if (ts.empty()) throw Error(Errc::invalid_argument, "empty t-list");
  for (double t : ts) {
    if (!(t >= 0.0)) throw Error(Errc::invalid_argument, "t must be nonnegative");
  }
  const std::vector<DiagDirection> dirs = diagnostic_directions(w);
  DiagTable out;
  out.rows.resize(dirs.size() * ts.size());
  parallel_for(out.rows.size(), [&](std::size_t k) {
    const DiagDirection& d = dirs[k / ts.size()];
    const double t = ts[k % ts.size()];
    const Vec2 xi = d.v * t;
    out.rows[k] = {d.name, t, ball_volume_growth(w, xi), shifted_weight_separation(w, q, xi, n)};
  });
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    std::vector<double> t(ts.begin(), ts.end()), g, s;
    for (std::size_t j = 0; j < ts.size(); ++j) {
      g.push_back(out.rows[i * ts.size() + j].growth);
      s.push_back(out.rows[i * ts.size() + j].separation);
    }
    const auto [gs, gn] = origin_fit(t, g);
    const auto [ss, sn] = origin_fit(t, s);
    out.fits.push_back({dirs[i], gs, ss, gn, sn});
  }
  return out;
}

}  // namespace isocone
