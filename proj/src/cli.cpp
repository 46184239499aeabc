#include "isocone/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "isocone/analysis.hpp"
#include "isocone/coupling.hpp"
#include "isocone/envelope.hpp"
#include "isocone/error.hpp"
#include "isocone/experiments.hpp"

namespace isocone {

using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kViolation = 2;

// ------------------------------------------------------------ json access

const json& member(const json& obj, const char* key) {
  static const json null_value;
  if (!obj.is_object()) return null_value;
  const auto it = obj.find(key);
  return it == obj.end() ? null_value : *it;
}

double get_number(const json& obj, const char* key, double fallback) {
  const json& v = member(obj, key);
  if (v.is_null()) return fallback;
  if (!v.is_number()) throw Error(Errc::parse, std::string("'") + key + "' must be a number");
  return v.get<double>();
}

int get_int(const json& obj, const char* key, int fallback) {
  const json& v = member(obj, key);
  if (v.is_null()) return fallback;
  if (!v.is_number_integer()) throw Error(Errc::parse, std::string("'") + key + "' must be an integer");
  return v.get<int>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
  const json& v = member(obj, key);
  if (v.is_null()) return fallback;
  if (!v.is_boolean()) throw Error(Errc::parse, std::string("'") + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback) {
  const json& v = member(obj, key);
  if (v.is_null()) return fallback;
  if (!v.is_string()) throw Error(Errc::parse, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> get_numbers(const json& obj, const char* key, std::vector<double> fallback) {
  const json& v = member(obj, key);
  if (v.is_null()) return fallback;
  if (!v.is_array()) throw Error(Errc::parse, std::string("'") + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const json& x : v) {
    if (!x.is_number()) throw Error(Errc::parse, std::string("'") + key + "' must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

Vec2 get_vec2(const json& obj, const char* key, Vec2 fallback) {
  const json& v = member(obj, key);
  if (v.is_null()) return fallback;
  const std::vector<double> xs = get_numbers(obj, key, {});
  if (xs.size() != 2) throw Error(Errc::parse, std::string("'") + key + "' must have 2 entries");
  return {xs[0], xs[1]};
}

Box get_box(const json& obj, const char* key, Box fallback) {
  const json& v = member(obj, key);
  if (v.is_null()) return fallback;
  const std::vector<double> xs = get_numbers(obj, key, {});
  if (xs.size() != 4) throw Error(Errc::parse, std::string("'") + key + "' must be [x0, x1, y0, y1]");
  return {xs[0], xs[1], xs[2], xs[3]};
}

std::vector<IntervalSet::Interval> get_intervals(const json& obj, const char* key,
                                                 std::vector<IntervalSet::Interval> fallback) {
  const json& v = member(obj, key);
  if (v.is_null()) return fallback;
  std::vector<IntervalSet::Interval> out;
  if (!v.is_array()) throw Error(Errc::parse, std::string("'") + key + "' must be a list of [a, b]");
  for (const json& p : v) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw Error(Errc::parse, std::string("'") + key + "' must be a list of [a, b]");
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

void require_keys(const json& obj, std::initializer_list<const char*> allowed, const char* where) {
  if (obj.is_null()) return;
  if (!obj.is_object()) throw Error(Errc::parse, std::string(where) + " must be an object");
  for (const auto& item : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; }) == allowed.end())
      throw Error(Errc::usage, std::string("unknown key '") + item.key() + "' in " + where);
  }
}

// ---------------------------------------------------------------- tables

Cell num(double v) { return Cell{v}; }
Cell opt_num(const std::optional<double>& v) { return v ? Cell{*v} : Cell{}; }
Cell flag(bool b) { return Cell{b ? 1.0 : 0.0}; }

struct Emitter {
  std::filesystem::path dir;
  std::string format;
  std::vector<std::string> files;

  void write_text(const std::string& name, const std::string& text) {
    const std::filesystem::path p = dir / name;
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(Errc::io, "cannot write " + p.string());
    os << text;
    if (!os) throw Error(Errc::io, "write failed for " + p.string());
    files.push_back(name);
  }

  void table(const std::string& stem, const Table& t) {
    if (format == "json") write_text(stem + ".json", to_json(t).dump(2) + "\n");
    else write_text(stem + ".csv", to_csv(t));
  }
};

// ------------------------------------------------------------- set specs

SlopeBody make_body(const json& spec, const Cone& cone) {
  require_keys(spec, {"type", "half_side", "rho", "vertices"}, "body");
  const std::string type = get_string(spec, "type", "sector_disk");
  if (type == "square") return SlopeBody::square(get_number(spec, "half_side", 1.0));
  if (type == "sector_disk") return SlopeBody::sector_disk(cone, get_number(spec, "rho", 1.0));
  if (type == "polygon") {
    std::vector<Vec2> v;
    const json& vs = member(spec, "vertices");
    if (!vs.is_array()) throw Error(Errc::parse, "'vertices' must be a list of [x, y]");
    for (const json& p : vs) {
      if (!p.is_array() || p.size() != 2) throw Error(Errc::parse, "'vertices' must be a list of [x, y]");
      v.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return SlopeBody::polygon(std::move(v));
  }
  throw Error(Errc::usage, "unknown body type '" + type + "'");
}

CorpusMember make_member(const json& spec) {
  require_keys(spec, {"kind", "radius", "eps", "m", "a", "c", "width"}, "corpus member");
  const std::string kind = get_string(spec, "kind", "");
  if (kind == "ball") return {MemberKind::dilated_ball, get_number(spec, "radius", 1.0), 0, 0.5, 0.2};
  if (kind == "perturbed") return {MemberKind::perturbed_ball, get_number(spec, "eps", 0.1), get_int(spec, "m", 4), 0.5, 0.2};
  if (kind == "bump")
    return {MemberKind::sector_bump, get_number(spec, "a", 0.1), 0, get_number(spec, "c", 0.5),
            get_number(spec, "width", 0.2)};
  throw Error(Errc::usage, "unknown corpus member kind '" + kind + "'");
}

std::vector<CorpusMember> make_corpus(const json& spec) {
  if (spec.is_null() || (spec.is_string() && spec.get<std::string>() == "default")) return default_corpus();
  if (!spec.is_array()) throw Error(Errc::parse, "'corpus' must be \"default\" or a list of members");
  std::vector<CorpusMember> out;
  for (const json& m : spec) out.push_back(make_member(m));
  return out;
}

CouplingResolution coupling_resolution(const RunConfig& c) {
  CouplingResolution r;
  r.n_theta = c.resolution.n_theta;
  r.mesh_h = c.resolution.mesh_h;
  r.eval_h = c.resolution.eval_h;
  r.n_radial = c.resolution.n_slope;
  r.n_angular = 2 * c.resolution.n_slope;
  return r;
}

// ----------------------------------------------------------------- verbs

struct VerbContext {
  const RunConfig& cfg;
  Emitter& out;
  json& summary;
};

int verb_measure(VerbContext& v) {
  const HomWeight w = make_weight(v.cfg);
  const StarSet e = make_set(v.cfg, w);
  const MeasureReport m = deficit(e);
  std::optional<AsymmetryResult> a;
  if (!e.cone().is_whole_plane()) a = asymmetry(e);
  Table t{{"w_volume", "w_perimeter", "delta_w", "r_eq", "asym", "x0_1", "x0_2"}, {}};
  t.rows.push_back({num(m.w_volume), num(m.w_perimeter), num(m.deficit), num(m.r_eq),
                    a ? num(a->value) : Cell{}, a ? num(a->x0.x) : Cell{}, a ? num(a->x0.y) : Cell{}});
  v.out.table("measure", t);
  v.summary["delta_w"] = m.deficit;
  // Nonnegativity up to the quadrature floor.
  const double floor = -5.0 / e.size();
  v.summary["nonnegative"] = m.deficit >= floor;
  return m.deficit >= floor ? kOk : kViolation;
}

int verb_couple(VerbContext& v) {
  const json& p = v.cfg.params;
  const HomWeight w = make_weight(v.cfg);
  const StarSet e = make_set(v.cfg, w);
  const json& body = member(p, "body");
  const CouplingMode mode = body.is_null() ? CouplingMode::weighted() : CouplingMode::with_body(make_body(body, w.cone()));
  const CouplingReport r = build_coupling(e, mode, coupling_resolution(v.cfg));

  Table t{{"delta", "perimeter", "volume", "b_E", "h", "eval_h", "slope_spacing", "hessian_l1", "boundary_term",
           "sup_violation", "sup_violation_near_cone", "range_hausdorff", "lip_grad", "convexity_violation",
           "hypothesis_flags"},
          {}};
  t.rows.push_back({num(r.delta), num(r.perimeter), num(r.volume), num(r.b_E), num(r.h), num(r.eval_h),
                    num(r.slope_spacing), num(r.hessian_l1), num(r.boundary_term), num(r.sup_violation),
                    num(r.sup_violation_near_cone), num(r.range_hausdorff), num(r.c11.lip_grad),
                    num(r.c11.convexity_violation), num(r.hypothesis_flags)});
  v.out.table("couple", t);
  v.summary["delta"] = r.delta;
  v.summary["sup_violation"] = r.sup_violation;
  v.summary["range_hausdorff"] = r.range_hausdorff;

  int status = kOk;
  const Box q = get_box(p, "q", {0.2, 0.6, 0.2, 0.6});
  if (r.anisotropic || r.delta > 1e-10) {
    const RatioTable ratios = verify_coupling_estimates(r, q);
    v.out.table("ratios", {{"hessian", "boundary", "weight"}, {{num(ratios.hessian), num(ratios.boundary), num(ratios.weight)}}});
    v.summary["ratios"] = {{"hessian", ratios.hessian}, {"boundary", ratios.boundary}, {"weight", ratios.weight}};
  }
  if (!r.anisotropic) {
    const ChainRecord c = abp_chain_check(r, get_number(p, "chain_tol", 1.0));
    v.out.table("chain", {{"image", "det", "amgm", "local", "terminal", "tol", "ordered"},
                          {{num(c.image), num(c.det), num(c.amgm), num(c.local), num(c.terminal), num(c.tol),
                            flag(c.ordered)}}});
    v.summary["chain_ordered"] = c.ordered;
    if (!c.ordered) {
      v.summary["chain_diagnostic"] = c.diagnostic;
      status = kViolation;
    }
  }
  const double c_sup = get_number(p, "c_sup", -1.0);
  if (c_sup > 0.0 && r.sup_violation > c_sup * (r.h + r.slope_spacing)) status = kViolation;
  if (get_bool(p, "write_fields", false)) {
    v.out.write_text("envelope.csv", r.phi.to_csv());
    v.out.write_text("u.csv", r.u.csv(r.mesh));
  }
  return status;
}

Table sweep_table(const SweepResult& s) {
  Table t{{"param", "delta_w", "asym", "ratio"}, {}};
  for (const SweepRow& r : s.rows) t.rows.push_back({num(r.param), num(r.delta_w), num(r.asym), opt_num(r.ratio)});
  return t;
}

int verb_sweep(VerbContext& v) {
  const json& p = v.cfg.params;
  const HomWeight w = make_weight(v.cfg);
  StabilityOptions opt;
  opt.n_theta = v.cfg.resolution.n_theta;
  opt.c_max = get_number(p, "c_max", 1e300);
  opt.coupling = get_bool(p, "coupling", false);
  opt.resolution = coupling_resolution(v.cfg);
  opt.coupling_q = get_box(p, "q", opt.coupling_q);
  const SweepResult s = stability_sweep(w, make_corpus(member(p, "corpus")), opt);
  v.out.table("sweep", sweep_table(s));
  if (opt.coupling) {
    Table c{{"param", "hessian", "boundary", "weight"}, {}};
    for (const SweepRow& r : s.rows)
      if (r.coupling) c.rows.push_back({num(r.param), num(r.coupling->hessian), num(r.coupling->boundary), num(r.coupling->weight)});
    v.out.table("coupling", c);
  }
  const std::vector<double> openings = get_numbers(p, "openings", {});
  if (!openings.empty()) {
    Table o{{"opening", "max_ratio"}, {}};
    for (const OpeningRow& r : opening_sweep(openings, opt.n_theta)) o.rows.push_back({num(r.opening), num(r.max_ratio)});
    v.out.table("openings", o);
  }
  Table labels{{"param", "label"}, {}};
  for (const SweepRow& r : s.rows) labels.rows.push_back({num(r.param), Cell{r.label}});
  v.out.table("members", labels);
  v.summary["max_ratio"] = s.max_ratio ? json(*s.max_ratio) : json(nullptr);
  v.summary["uniqueness_ok"] = s.uniqueness_ok;
  v.summary["within_c_max"] = s.within_c_max;
  return s.uniqueness_ok && s.within_c_max ? kOk : kViolation;
}

int verb_sharpness(VerbContext& v) {
  const json& p = v.cfg.params;
  const HomWeight w = make_weight(v.cfg);
  const SharpnessResult s = sharpness_sweep(w, v.cfg.resolution.n_theta, EtaSpec{get_int(p, "eta_m", 4)},
                                            get_numbers(p, "eps", {0.02, 0.04, 0.08, 0.16}));
  v.out.table("sweep", sweep_table(s.sweep));
  v.summary["slope"] = s.slope;
  v.summary["intercept"] = s.intercept;
  v.summary["delta_eps2_spread"] = s.delta_eps2_spread;
  v.summary["max_ratio"] = s.sweep.max_ratio ? json(*s.sweep.max_ratio) : json(nullptr);
  return kOk;
}

int verb_diag(VerbContext& v) {
  const json& p = v.cfg.params;
  const HomWeight w = make_weight(v.cfg);
  const double eps_emp = get_number(p, "eps_emp", 0.0);
  const DiagTable d = translation_diagnostics(w, get_numbers(p, "t", {0.0, 0.025, 0.05, 0.1}),
                                              get_box(p, "q", {0.2, 0.4, 0.2, 0.4}), get_int(p, "n", 512));
  Table t{{"direction", "t", "growth", "separation"}, {}};
  for (const DiagRow& r : d.rows) t.rows.push_back({Cell{r.direction}, num(r.t), num(r.growth), num(r.separation)});
  v.out.table("diag", t);
  Table f{{"direction", "kind", "v1", "v2", "growth_slope", "separation_slope", "growth_nonlinearity",
           "separation_nonlinearity"},
          {}};
  for (const DiagFit& x : d.fits)
    f.rows.push_back({Cell{x.direction.name}, Cell{std::string(1, x.direction.kind)}, num(x.direction.v.x),
                      num(x.direction.v.y), num(x.growth_slope), num(x.separation_slope), num(x.growth_nonlinearity),
                      num(x.separation_nonlinearity)});
  v.out.table("diag_fit", f);

  std::map<std::string, char> kind;
  for (const DiagFit& x : d.fits) kind[x.direction.name] = x.direction.kind;
  int bad = 0;
  for (const DiagRow& r : d.rows) {
    if (kind[r.direction] == 'C' && r.growth < -1e-12) ++bad;
    if (kind[r.direction] == 'E' && r.separation < eps_emp * r.t - 1e-12) ++bad;
  }
  v.summary["violations"] = bad;
  return bad == 0 ? kOk : kViolation;
}

int verb_check_amgm(VerbContext& v) {
  const json& p = v.cfg.params;
  if (!member(p, "samples").is_null()) {
    const AmgmAudit a = amgm_random_audit(static_cast<std::size_t>(get_int(p, "samples", 0)), v.cfg.seed);
    v.out.table("amgm", {{"samples", "violations", "worst_margin"},
                         {{num(static_cast<double>(a.samples)), num(static_cast<double>(a.violations)), num(a.worst_margin)}}});
    v.summary["violations"] = a.violations;
    return a.violations == 0 ? kOk : kViolation;
  }
  const AmgmResult r = quantitative_amgm_check(get_numbers(p, "lambda", {}), get_numbers(p, "x", {}),
                                               get_number(p, "c", 1.0));
  v.out.table("amgm", {{"lhs", "rhs", "holds"}, {{num(r.lhs), num(r.rhs), flag(r.holds)}}});
  v.summary["holds"] = r.holds;
  return r.holds ? kOk : kViolation;
}

int verb_check_1d(VerbContext& v) {
  const json& p = v.cfg.params;
  const double c_gamma = get_number(p, "c_gamma", -1.0);
  const json& fam = member(p, "family");
  if (!fam.is_null()) {
    require_keys(fam, {"gamma", "ls", "step", "top", "max_parts"}, "family");
    const double gamma = get_number(fam, "gamma", 0.0);
    const StabilityFamilyResult r = one_dim_stability_family(gamma, get_numbers(fam, "ls", {0.8, 1.0, 1.2}),
                                                             get_number(fam, "step", 0.05), get_number(fam, "top", 3.0),
                                                             get_int(fam, "max_parts", 3));
    v.out.table("stability1d", {{"gamma", "sets", "max_ratio", "worst_l"},
                                {{num(gamma), num(static_cast<double>(r.sets)), num(r.max_ratio), num(r.worst_l)}}});
    v.summary["max_ratio"] = r.max_ratio;
    if (!std::isfinite(r.max_ratio)) return kViolation;
    return c_gamma > 0.0 && r.max_ratio > c_gamma ? kViolation : kOk;
  }
  const StabilityResult r = one_dim_stability_check(IntervalSet(get_intervals(p, "intervals", {{0.0, 0.8}})),
                                                    get_number(p, "l", 1.0), get_number(p, "gamma", 2.0),
                                                    c_gamma > 0.0 ? c_gamma : 1.0, get_bool(p, "include_origin", false));
  v.out.table("stability1d", {{"lhs", "denom", "rhs", "ratio"}, {{num(r.lhs), num(r.denom), num(r.rhs), num(r.ratio)}}});
  v.summary["ratio"] = r.ratio;
  return c_gamma > 0.0 && r.lhs > r.rhs * (1.0 + 1e-12) ? kViolation : kOk;
}

int verb_check_fmp(VerbContext& v) {
  const json& p = v.cfg.params;
  int bad = 0;
  Table f{{"D", "k", "min_margin", "violations"}, {}};
  for (double D : get_numbers(p, "D", {2.5, 3.0, 4.0, 7.2})) {
    const FmpConstants c = psi_k(D);
    double margin = 1e300;
    int viol = 0;
    for (std::size_t i = 0; i < c.t.size(); ++i) {
      if (c.t[i] > 0.5) continue;
      const double m = c.psi[i] - 3.0 * c.k * std::pow(c.t[i], (D - 1.0) / D);
      margin = std::min(margin, m);
      if (m < -1e-15) ++viol;
    }
    bad += viol;
    f.rows.push_back({num(D), num(c.k), num(margin), num(viol)});
  }
  v.out.table("fmp", f);

  const json& ch = member(p, "cheeger");
  require_keys(ch, {"intervals", "gamma"}, "cheeger");
  const IntervalSet e(get_intervals(ch, "intervals", {{1.0, 2.0}}));
  const double gamma = get_number(ch, "gamma", 2.0);
  const CheegerResult c = cheeger_bruteforce_1d(e, gamma);
  v.out.table("cheeger", {{"tau", "tau_minus_one"}, {{num(c.tau), num(c.tau_minus_one)}}});
  v.summary["tau"] = c.tau;

  const json& tr = member(p, "trace");
  require_keys(tr, {"breaks", "values"}, "trace");
  if (e.parts().size() == 1) {
    const PiecewiseConstant g{get_numbers(tr, "breaks", {1.5}), get_numbers(tr, "values", {0.0, 1.0})};
    const TracePoincareReport r = trace_poincare_check_1d(e, g, gamma, c.tau);
    v.out.table("trace", {{"median", "lhs", "trace_rhs", "poincare_rhs", "trace_holds", "poincare_holds"},
                          {{num(r.median), num(r.lhs), num(r.trace_rhs), num(r.poincare_rhs), flag(r.trace_holds),
                            flag(r.poincare_holds)}}});
    bad += !r.trace_holds + !r.poincare_holds;
  }
  v.summary["violations"] = bad;
  return bad == 0 ? kOk : kViolation;
}

int verb_envelope(VerbContext& v) {
  const json& p = v.cfg.params;
  const Cone cone = make_cone(v.cfg.cone);
  const SlopeBody k = make_body(member(p, "body"), cone);

  std::vector<Vec2> pts;
  std::vector<double> u;
  const json& given = member(p, "points");
  if (!given.is_null()) {
    if (!given.is_array()) throw Error(Errc::parse, "'points' must be a list of [x, y, u]");
    for (const json& q : given) {
      if (!q.is_array() || q.size() != 3) throw Error(Errc::parse, "'points' must be a list of [x, y, u]");
      pts.push_back({q[0].get<double>(), q[1].get<double>()});
      u.push_back(q[2].get<double>());
    }
  } else {
    const std::string field = get_string(p, "field", "half_norm2");
    std::function<double(Vec2)> f;
    if (field == "half_norm2") f = [](Vec2 x) { return 0.5 * norm2(x); };
    else if (field == "norm") f = [](Vec2 x) { return norm(x); };
    else if (field == "double_well") f = [](Vec2 x) { return (x.x * x.x - 0.5) * (x.x * x.x - 0.5) + 0.5 * x.y * x.y; };
    else throw Error(Errc::usage, "unknown field '" + field + "'");
    const Box b = get_box(p, "sample_box", {-1.0, 1.0, -1.0, 1.0});
    const int n = get_int(p, "sample_n", 41);
    if (n < 2) throw Error(Errc::invalid_argument, "sample_n must be at least 2");
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec2 x{b.x0 + (b.x1 - b.x0) * i / (n - 1), b.y0 + (b.y1 - b.y0) * j / (n - 1)};
        pts.push_back(x);
        u.push_back(f(x));
      }
  }
  if (pts.empty()) throw Error(Errc::invalid_argument, "no sample points");

  const SlopeGrid grid = make_slope_grid(k, v.cfg.resolution.n_slope, 2 * v.cfg.resolution.n_slope);
  const RestrictedConjugate conj = restricted_conjugate(pts, u, grid);
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (Vec2 q : pts) x0 = std::min(x0, q.x), y0 = std::min(y0, q.y), x1 = std::max(x1, q.x), y1 = std::max(y1, q.y);
  const double h = v.cfg.resolution.eval_h;
  const Vec2 lo = get_vec2(p, "eval_origin", {x0, y0});
  const int nx = get_int(p, "eval_nx", static_cast<int>(std::floor((x1 - lo.x) / h + 1e-9)) + 1);
  const int ny = get_int(p, "eval_ny", static_cast<int>(std::floor((y1 - lo.y) / h + 1e-9)) + 1);
  if (nx < 3 || ny < 3) throw Error(Errc::invalid_argument, "evaluation box needs at least 3 x 3 nodes");
  const EnvelopeField f = k_envelope(conj, grid, EvalBox{lo.x, lo.y, h, nx, ny});
  v.out.write_text("envelope.csv", f.to_csv());
  const C11Report c = check_c11(f);
  v.out.table("c11", {{"lip_grad", "range_hausdorff", "convexity_violation"},
                      {{num(c.lip_grad), num(c.range_hausdorff), num(c.convexity_violation)}}});

  // The envelope is a minorant of u at every sample.
  const auto [umin, umax] = std::minmax_element(u.begin(), u.end());
  const double tol = 1e-12 * std::max(1.0, *umax - *umin);
  int bad = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) bad += f.value_at(pts[i], conj) > u[i] + tol;
  v.summary["minorant_violations"] = bad;
  v.summary["range_hausdorff"] = c.range_hausdorff;
  return bad == 0 ? kOk : kViolation;
}

using VerbFn = int (*)(VerbContext&);

const std::map<std::string, VerbFn>& verb_table() {
  static const std::map<std::string, VerbFn> t{
      {"measure", verb_measure},       {"couple", verb_couple},         {"sweep", verb_sweep},
      {"sharpness", verb_sharpness},   {"diag", verb_diag},             {"check-amgm", verb_check_amgm},
      {"check-1d", verb_check_1d},     {"check-fmp", verb_check_fmp},   {"envelope", verb_envelope},
  };
  return t;
}

std::string line_info(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') ++line, col = 1;
    else ++col;
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

const std::vector<std::string>& known_verbs() {
  static const std::vector<std::string> v{"measure", "couple", "sweep", "sharpness", "diag",
                                          "check-amgm", "check-1d", "check-fmp", "envelope"};
  return v;
}

// ------------------------------------------------------------- config

Cone make_cone(const json& spec) {
  if (spec.is_string()) {
    const std::string s = spec.get<std::string>();
    if (s == "quadrant") return Cone::quadrant();
    if (s == "half_plane") return Cone::upper_half_plane();
    if (s == "whole_plane") return Cone::whole_plane();
    throw Error(Errc::usage, "unknown cone '" + s + "'");
  }
  require_keys(spec, {"angle_lo", "angle_hi"}, "cone");
  if (!spec.is_object()) throw Error(Errc::parse, "cone must be a name or {angle_lo, angle_hi}");
  return Cone(get_number(spec, "angle_lo", 0.0), get_number(spec, "angle_hi", kPi / 2));
}

HomWeight make_weight(const RunConfig& c) {
  require_keys(c.weight, {"monomial"}, "weight");
  const std::vector<double> m = get_numbers(c.weight, "monomial", {0.0, 0.0});
  if (m.size() != 2) throw Error(Errc::parse, "'monomial' must be [a1, a2]");
  const HomWeight w(make_cone(c.cone), Monomial{m[0], m[1]});
  require_admissible(w);
  return w;
}

StarSet make_set(const RunConfig& c, const HomWeight& w) {
  const json& s = c.set;
  require_keys(s, {"type", "radius", "eps", "m", "x0", "a", "c", "width", "r"}, "set");
  const std::string type = get_string(s, "type", "ball");
  const int n = c.resolution.n_theta;
  if (type == "ball") return StarSet::ball(w, n, get_number(s, "radius", 1.0));
  if (type == "perturbed") return StarSet::perturbed_ball(w, n, get_number(s, "eps", 0.1), get_int(s, "m", 4));
  if (type == "translated")
    return StarSet::translated_ball(w, n, get_vec2(s, "x0", {0.0, 0.0}), get_number(s, "radius", 1.0));
  if (type == "bump")
    return CorpusMember{MemberKind::sector_bump, get_number(s, "a", 0.1), 0, get_number(s, "c", 0.5),
                        get_number(s, "width", 0.2)}
        .build(w, n);
  if (type == "square")
    return StarSet::from_function(w, n, [](double t) {
      return 1.0 / std::max(std::abs(std::cos(t)), std::abs(std::sin(t)));
    });
  if (type == "radii") {
    std::vector<double> r = get_numbers(s, "r", {});
    if (static_cast<int>(r.size()) != n) throw Error(Errc::invalid_argument, "'r' must have n_theta entries");
    return StarSet(w, std::move(r));
  }
  throw Error(Errc::usage, "unknown set type '" + type + "'");
}

RunConfig parse_config(const std::string& text, const std::string& verb) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse, "malformed JSON at " + line_info(text, e.byte) + ": " + e.what());
  }
  if (!j.is_object()) throw Error(Errc::parse, "config must be a JSON object");
  require_keys(j, {"verb", "cone", "weight", "set", "resolution", "params", "seed"}, "config");

  RunConfig c;
  c.verb = verb.empty() ? get_string(j, "verb", "") : verb;
  if (std::find(known_verbs().begin(), known_verbs().end(), c.verb) == known_verbs().end())
    throw Error(Errc::usage, "unknown verb '" + c.verb + "'");
  const std::string in_file = get_string(j, "verb", c.verb);
  if (in_file != c.verb) throw Error(Errc::usage, "config is for verb '" + in_file + "', not '" + c.verb + "'");

  if (j.contains("cone")) c.cone = j["cone"];
  if (j.contains("weight")) c.weight = j["weight"];
  if (j.contains("set")) c.set = j["set"];
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw Error(Errc::parse, "'params' must be an object");
    c.params = j["params"];
  }
  const json& res = member(j, "resolution");
  require_keys(res, {"n_theta", "mesh_h", "n_slope", "eval_h"}, "resolution");
  c.resolution.n_theta = get_int(res, "n_theta", c.resolution.n_theta);
  c.resolution.mesh_h = get_number(res, "mesh_h", c.resolution.mesh_h);
  c.resolution.n_slope = get_int(res, "n_slope", c.resolution.n_slope);
  c.resolution.eval_h = get_number(res, "eval_h", c.resolution.eval_h);
  if (c.resolution.n_theta <= 0 || !(c.resolution.mesh_h > 0) || c.resolution.n_slope <= 0 || !(c.resolution.eval_h > 0))
    throw Error(Errc::invalid_argument, "resolutions must be positive");
  const json& seed = member(j, "seed");
  if (!seed.is_null()) {
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
      throw Error(Errc::parse, "'seed' must be a nonnegative integer");
    c.seed = seed.get<std::uint64_t>();
  }
  // Validate the geometric specs once.
  make_set(c, make_weight(c));
  return c;
}

json to_json(const RunConfig& c) {
  return json{{"verb", c.verb},
              {"cone", c.cone},
              {"weight", c.weight},
              {"set", c.set},
              {"resolution",
               {{"n_theta", c.resolution.n_theta},
                {"mesh_h", c.resolution.mesh_h},
                {"n_slope", c.resolution.n_slope},
                {"eval_h", c.resolution.eval_h}}},
              {"params", c.params},
              {"seed", c.seed}};
}

std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ------------------------------------------------------------- tables

std::string to_csv(const Table& t) {
  std::ostringstream os;
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      if (const double* d = std::get_if<double>(&row[i])) os << format_number(*d);
      else if (const std::string* s = std::get_if<std::string>(&row[i])) os << *s;
    }
    os << '\n';
  }
  return os.str();
}

json to_json(const Table& t) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::array();
    for (const Cell& c : row) {
      if (const double* d = std::get_if<double>(&c)) r.push_back(std::isfinite(*d) ? json(*d) : json(nullptr));
      else if (const std::string* s = std::get_if<std::string>(&c)) r.push_back(*s);
      else r.push_back(nullptr);
    }
    rows.push_back(std::move(r));
  }
  return json{{"columns", t.columns}, {"rows", std::move(rows)}};
}

Table table_from_json(const json& j) {
  Table t;
  t.columns = j.at("columns").get<std::vector<std::string>>();
  for (const json& r : j.at("rows")) {
    std::vector<Cell> row;
    for (const json& c : r) {
      if (c.is_number()) row.emplace_back(c.get<double>());
      else if (c.is_string()) row.emplace_back(c.get<std::string>());
      else row.emplace_back(std::monostate{});
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------- run

RunOutcome run(const RunConfig& c) {
  RunOutcome out;
  const auto it = verb_table().find(c.verb);
  if (it == verb_table().end()) throw Error(Errc::usage, "unknown verb '" + c.verb + "'");
  const std::string format = get_string(c.params, "format", "csv");
  if (format != "csv" && format != "json") throw Error(Errc::usage, "format must be csv or json");

  std::error_code ec;
  std::filesystem::create_directories(c.out_dir, ec);
  if (ec || !std::filesystem::is_directory(c.out_dir)) throw Error(Errc::io, "cannot create output directory " + c.out_dir);

  Emitter em{c.out_dir, format, {}};
  VerbContext ctx{c, em, out.summary};
  out.status = it->second(ctx);
  out.files = em.files;
  out.message = out.status == kViolation ? "verification failure" : "ok";

  json manifest{{"version", kVersion},
                {"verb", c.verb},
                {"config_hash", config_hash(c)},
                {"seed", c.seed},
                {"resolution",
                 {{"n_theta", c.resolution.n_theta},
                  {"mesh_h", c.resolution.mesh_h},
                  {"n_slope", c.resolution.n_slope},
                  {"eval_h", c.resolution.eval_h}}},
                {"config", to_json(c)},
                {"files", out.files},
                {"status", out.message},
                {"summary", out.summary}};
  em.write_text("manifest.json", manifest.dump(2) + "\n");
  out.files = em.files;
  return out;
}

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weighted isoperimetric inequalities in convex cones: numerical verification."};
  std::string verb, config_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  app.add_option("verb", verb, "measure | couple | sweep | sharpness | diag | check-amgm | check-1d | check-fmp | envelope")
      ->required();
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "overrides the config seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    std::ifstream is(config_path, std::ios::binary);
    if (!is) throw Error(Errc::io, "cannot read config " + config_path);
    std::stringstream buf;
    buf << is.rdbuf();
    RunConfig c = parse_config(buf.str(), verb);
    if (seed) c.seed = *seed;
    c.out_dir = out_dir;
    const RunOutcome r = run(c);
    out << c.verb << ": " << r.message << " (" << r.files.size() << " files in " << out_dir << ")\n";
    return r.status;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace isocone
