#include "isocone/cone_weight.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "isocone/error.hpp"
#include "isocone/quadrature.hpp"

namespace isocone {

namespace {

constexpr double kAngleTol = 1e-12;

double signed_pow(double base, double e) {
  if (e == 0.0) return 1.0;
  if (base < 0.0 && base > -1e-12) base = 0.0;
  return std::pow(base, e);
}

Vec2 canonical(Vec2 v) {
  if (std::abs(v.x) < 1e-14) v.x = 0.0;
  if (std::abs(v.y) < 1e-14) v.y = 0.0;
  v = v / norm(v);
  if (v.x < 0.0 || (v.x == 0.0 && v.y < 0.0)) v = -v;
  return v;
}

// Interior sample points used by the sampled invariant checks.
std::vector<Vec2> interior_samples(const Cone& cone, int n_angles, std::initializer_list<double> radii) {
  std::vector<Vec2> pts;
  const double span = cone.is_whole_plane() ? 2.0 * kPi : cone.opening();
  for (int i = 0; i < n_angles; ++i) {
    const double t = cone.angle_lo() + span * (i + 0.5) / n_angles;
    for (double r : radii) pts.push_back(unit(t) * r);
  }
  return pts;
}

// Linear interpolation of samples on an arc grid (periodic for the plane).
double interp_arc(const Cone& cone, const std::vector<double>& vals, double angle) {
  const int n = static_cast<int>(vals.size());
  if (cone.is_whole_plane()) {
    const double h = 2.0 * kPi / n;
    double s = std::fmod(angle - cone.angle_lo(), 2.0 * kPi);
    if (s < 0.0) s += 2.0 * kPi;
    const double q = s / h;
    const int i = std::min(static_cast<int>(q), n - 1);
    const double f = q - i;
    return (1.0 - f) * vals[i] + f * vals[(i + 1) % n];
  }
  const double h = cone.opening() / (n - 1);
  const double q = std::clamp((angle - cone.angle_lo()) / h, 0.0, static_cast<double>(n - 1));
  const int i = std::min(static_cast<int>(q), n - 2);
  const double f = q - i;
  return (1.0 - f) * vals[i] + f * vals[i + 1];
}

}  // namespace

// ---------------------------------------------------------------- Cone

Cone::Cone(double angle_lo, double angle_hi) : lo_(angle_lo), hi_(angle_hi) {
  const double open = hi_ - lo_;
  if (!(open > 0.0) || open > kPi + kAngleTol)
    throw Error(Errc::invalid_argument, "cone opening must lie in (0, pi]");
  half_ = std::abs(open - kPi) <= kAngleTol;
  if (half_) hi_ = lo_ + kPi;
}

Cone Cone::whole_plane() {
  Cone c;
  c.lo_ = 0.0;
  c.hi_ = 2.0 * kPi;
  c.whole_ = true;
  return c;
}

double Cone::relative_angle(Vec2 x) const {
  const Vec2 d = ray_lo();
  return std::atan2(cross(d, x), dot(d, x));
}

bool Cone::contains(Vec2 x, double tol) const {
  if (whole_) return true;
  const double r = norm(x);
  if (r == 0.0) return true;
  return dot(inward_normal_lo(), x) >= -tol * r && dot(inward_normal_hi(), x) >= -tol * r;
}

bool Cone::contains_interior(Vec2 x) const {
  if (whole_) return true;
  return dot(inward_normal_lo(), x) > 0.0 && dot(inward_normal_hi(), x) > 0.0;
}

double Cone::distance_to_boundary(Vec2 x) const {
  if (whole_) return std::numeric_limits<double>::infinity();
  auto ray_dist = [&](Vec2 d) { return dot(x, d) >= 0.0 ? std::abs(cross(d, x)) : norm(x); };
  return std::min(ray_dist(ray_lo()), ray_dist(ray_hi()));
}

std::vector<double> Cone::arc_grid(int n) const {
  if (n < 2) throw Error(Errc::invalid_argument, "arc grid needs at least two points");
  std::vector<double> g(n);
  if (whole_) {
    for (int i = 0; i < n; ++i) g[i] = lo_ + 2.0 * kPi * i / n;
  } else {
    for (int i = 0; i < n; ++i) g[i] = lo_ + (hi_ - lo_) * i / (n - 1);
    g.back() = hi_;
  }
  return g;
}

// ----------------------------------------------------------- HomWeight

HomWeight::HomWeight(const Cone& cone, Monomial m) : cone_(cone), alpha_(m.a1 + m.a2), form_(m) {
  if (!(m.a1 >= 0.0) || !(m.a2 >= 0.0)) throw Error(Errc::invalid_argument, "monomial exponents must be >= 0");
  for (double t : cone_.arc_grid(257)) {
    const double v = value(unit(t));
    if (!std::isfinite(v) || v < 0.0)
      throw Error(Errc::inadmissible_input, "monomial weight is negative or undefined on the cone");
  }
}

HomWeight::HomWeight(const Cone& cone, double alpha, SphericalProfile p)
    : cone_(cone), alpha_(alpha), form_(std::move(p)) {
  const auto& s = std::get<SphericalProfile>(form_).samples;
  if (!(alpha >= 0.0)) throw Error(Errc::invalid_argument, "alpha must be >= 0");
  if (s.size() < 3) throw Error(Errc::invalid_argument, "profile needs at least three samples");
  for (double v : s)
    if (!std::isfinite(v) || v < 0.0) throw Error(Errc::inadmissible_input, "profile samples must be finite and >= 0");
}

double HomWeight::on_arc(double angle) const {
  if (const auto* m = monomial()) return signed_pow(std::cos(angle), m->a1) * signed_pow(std::sin(angle), m->a2);
  return interp_arc(cone_, profile()->samples, angle);
}

double HomWeight::value(Vec2 x) const {
  if (const auto* m = monomial()) return signed_pow(x.x, m->a1) * signed_pow(x.y, m->a2);
  const double r = norm(x);
  if (r == 0.0) return alpha_ == 0.0 ? on_arc(cone_.angle_lo()) : 0.0;
  return std::pow(r, alpha_) * on_arc(cone_.angle_lo() + cone_.relative_angle(x));
}

double HomWeight::root(Vec2 x) const {
  if (alpha_ == 0.0) return 1.0;
  return std::pow(value(x), 1.0 / alpha_);
}

double HomWeight::unit_ball_volume() const {
  const double d = D();
  const Monomial* m = monomial();
  if (cone_.is_whole_plane() && m && m->a1 == 0.0 && m->a2 == 0.0) return kPi;
  if (m && std::abs(cone_.angle_lo()) < 1e-15 && std::abs(cone_.opening() - kPi / 2) < 1e-15) {
    // Quadrant: (1/D) * B((a1+1)/2, (a2+1)/2) / 2.
    const double p = 0.5 * (m->a1 + 1.0), q = 0.5 * (m->a2 + 1.0);
    return std::exp(std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q)) / (2.0 * d);
  }
  const double span = cone_.is_whole_plane() ? 2.0 * kPi : cone_.opening();
  const double lo = cone_.angle_lo();
  return integrate([&](double t) { return on_arc(t); }, lo, lo + span, 512, 16) / d;
}

double HomWeight::c_star() const { return D() * std::pow(unit_ball_volume(), 1.0 / D()); }

ValueGrad weight_eval_grad(const HomWeight& w, Vec2 x) {
  if (!w.cone().contains(x, 1e-12)) throw Error(Errc::outside_cone, "weight evaluated outside the closed cone");
  if (const auto* m = w.monomial()) {
    const double px = signed_pow(x.x, m->a1), py = signed_pow(x.y, m->a2);
    const double gx = m->a1 == 0.0 ? 0.0 : m->a1 * signed_pow(x.x, m->a1 - 1.0) * py;
    const double gy = m->a2 == 0.0 ? 0.0 : m->a2 * px * signed_pow(x.y, m->a2 - 1.0);
    return {px * py, {gx, gy}};
  }
  const double r = norm(x);
  if (r == 0.0) return {w.value(x), {0.0, 0.0}};
  const Cone& c = w.cone();
  const auto& s = w.profile()->samples;
  const double theta = c.angle_lo() + c.relative_angle(x);
  const int n = static_cast<int>(s.size());
  const double h = c.is_whole_plane() ? 2.0 * kPi / n : c.opening() / (n - 1);
  double ta = theta - h, tb = theta + h;
  if (!c.is_whole_plane()) {
    ta = std::max(ta, c.angle_lo());
    tb = std::min(tb, c.angle_hi());
  }
  const double p = w.on_arc(theta);
  const double dp = (w.on_arc(tb) - w.on_arc(ta)) / (tb - ta);
  const double ra = std::pow(r, w.alpha() - 1.0);
  const Vec2 er = unit(theta), et = perp(er);
  return {w.value(x), er * (w.alpha() * ra * p) + et * (ra * dp)};
}

double check_concavity_condition(const HomWeight& w, Vec2 x, Vec2 z) {
  if (w.alpha() <= 0.0) throw Error(Errc::invalid_argument, "concavity condition needs alpha > 0");
  const ValueGrad vx = weight_eval_grad(w, x);
  if (!(vx.value > 0.0)) throw Error(Errc::degenerate_point, "w(x) = 0 in the concavity condition");
  const double wz = weight_eval_grad(w, z).value;
  const double lhs = w.alpha() * std::pow(wz / vx.value, 1.0 / w.alpha());
  const double rhs = dot(vx.grad, z) / vx.value;
  return rhs - lhs;
}

double homogeneity_error(const HomWeight& w) {
  double worst = 0.0;
  for (Vec2 x : interior_samples(w.cone(), 37, {0.3, 1.0, 2.5})) {
    const double wx = w.value(x);
    for (double t : {0.5, 2.0, 7.0}) {
      const double want = std::pow(t, w.alpha()) * wx;
      const double got = w.value(x * t);
      const double scale = std::max(std::abs(want), std::numeric_limits<double>::min());
      worst = std::max(worst, std::abs(got - want) / scale);
    }
  }
  return worst;
}

AdmissionReport admission_check(const HomWeight& w, std::uint64_t seed) {
  AdmissionReport rep{homogeneity_error(w), 0.0, true};
  if (w.alpha() > 0.0) {
    const Cone& c = w.cone();
    const double span = c.is_whole_plane() ? 2.0 * kPi : c.opening();
    const double margin = c.is_whole_plane() ? 0.0 : 1e-3 * span;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ang(c.angle_lo() + margin, c.angle_lo() + span - margin);
    std::uniform_real_distribution<double> rad(0.2, 2.0);
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 10000; ++i) {
      const Vec2 x = unit(ang(rng)) * rad(rng);
      const Vec2 z = unit(ang(rng)) * rad(rng);
      if (!(w.value(x) > 0.0)) continue;
      worst = std::min(worst, check_concavity_condition(w, x, z));
    }
    rep.worst_concavity_residual = worst;
  }
  rep.admissible = rep.homogeneity_error <= 1e-12 && rep.worst_concavity_residual >= -1e-10;
  return rep;
}

void require_admissible(const HomWeight& w) {
  const AdmissionReport r = admission_check(w);
  if (!r.admissible)
    throw Error(Errc::inadmissible_input, "weight fails homogeneity or the concavity condition (worst residual " +
                                              std::to_string(r.worst_concavity_residual) + ")");
}

Subspaces decompose_subspaces(const Cone& cone, const HomWeight& w) {
  if (homogeneity_error(w) > 1e-12) throw Error(Errc::inadmissible_input, "weight is not homogeneous");
  Subspaces out;
  if (cone.is_whole_plane()) {
    out.L = {{1.0, 0.0}, {0.0, 1.0}};
    return out;
  }
  if (cone.is_half_plane()) out.L.push_back(canonical(cone.ray_lo()));

  const std::vector<Vec2> pts = interior_samples(cone, 41, {0.4, 1.0, 1.7});
  auto constant_along = [&](Vec2 dir) {
    for (Vec2 x : pts) {
      const double wx = w.value(x);
      for (double t : {-0.3, -0.1, 0.1, 0.3}) {
        const Vec2 y = x + dir * (t * norm(x));
        if (!cone.contains(y, 0.0)) continue;
        if (std::abs(w.value(y) - wx) > 1e-10 * std::max(1.0, std::abs(wx))) return false;
      }
    }
    return true;
  };

  std::vector<Vec2> candidates;
  if (!out.L.empty()) {
    candidates.push_back(canonical(perp(out.L[0])));
  } else {
    Sym2 m;
    int used = 0;
    for (Vec2 x : pts) {
      const Vec2 g = weight_eval_grad(w, x).grad;
      const double gn = norm(g);
      if (!(gn > 0.0) || !std::isfinite(gn)) continue;
      const Vec2 u = g / gn;
      m = m + Sym2{u.x * u.x, u.x * u.y, u.y * u.y};
      ++used;
    }
    if (used == 0) {
      candidates = {{1.0, 0.0}, {0.0, 1.0}};
    } else {
      double lmin, lmax;
      m.eigenvalues(lmin, lmax);
      if (lmin <= 1e-12 * used) {
        Vec2 a{m.xy, lmin - m.xx}, b{lmin - m.yy, m.xy};
        Vec2 v = norm2(a) >= norm2(b) ? a : b;
        if (norm(v) < 1e-300) v = m.xx <= m.yy ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
        candidates.push_back(canonical(v));
      }
    }
  }
  for (Vec2 c : candidates)
    if (constant_along(c)) out.C.push_back(c);

  std::vector<Vec2> taken = out.L;
  taken.insert(taken.end(), out.C.begin(), out.C.end());
  if (taken.empty()) {
    out.E = {{1.0, 0.0}, {0.0, 1.0}};
  } else if (taken.size() == 1) {
    out.E = {canonical(perp(taken[0]))};
  }
  return out;
}

// -------------------------------------------------------- ConcaveHomFn

ConcaveHomFn::ConcaveHomFn(const Cone& cone, std::vector<double> values)
    : cone_(cone), values_(std::move(values)) {
  if (values_.size() < 2) throw Error(Errc::invalid_argument, "ConcaveHomFn needs at least two samples");
  angles_ = cone_.arc_grid(static_cast<int>(values_.size()));
}

double ConcaveHomFn::on_arc(double angle) const { return interp_arc(cone_, values_, angle); }

double ConcaveHomFn::operator()(Vec2 x) const {
  const double r = norm(x);
  if (r == 0.0) return 0.0;
  double rel = cone_.relative_angle(x);
  if (!cone_.is_whole_plane() && rel < -kPi / 2) rel += 2.0 * kPi;
  return r * on_arc(cone_.angle_lo() + rel);
}

ConcaveHomFn pointwise_min(const ConcaveHomFn& a, const ConcaveHomFn& b) {
  if (a.values().size() != b.values().size() || a.cone().angle_lo() != b.cone().angle_lo() ||
      a.cone().angle_hi() != b.cone().angle_hi())
    throw Error(Errc::invalid_argument, "pointwise_min needs identical grids");
  std::vector<double> v(a.values().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::min(a.values()[i], b.values()[i]);
  return ConcaveHomFn(a.cone(), std::move(v));
}

ConcaveHomFn rotate(const ConcaveHomFn& v, double angle) {
  if (v.cone().is_whole_plane()) throw Error(Errc::invalid_argument, "rotation of the whole-plane grid");
  return ConcaveHomFn(Cone(v.cone().angle_lo() + angle, v.cone().angle_hi() + angle), v.values());
}

double spherical_concavity_check(const ConcaveHomFn& v, std::size_t n_triples) {
  const auto& th = v.angles();
  const auto& f = v.values();
  const std::size_t n = f.size();
  if (n < 16) throw Error(Errc::invalid_argument, "spherical concavity check needs at least 16 samples");
  double worst = -std::numeric_limits<double>::infinity();
  auto eval = [&](std::size_t i, std::size_t j, std::size_t k) {
    const double s = th[j] - th[i], t = th[k] - th[j];
    if (s + t >= kPi - 1e-12) return;
    const double val = (std::sin(t) * f[i] + std::sin(s) * f[k]) / std::sin(s + t) - f[j];
    worst = std::max(worst, val);
  };
  const double total = static_cast<double>(n) * (n - 1) * (n - 2) / 6.0;
  if (total <= static_cast<double>(n_triples)) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) eval(i, j, k);
  } else {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t m = 0; m < n_triples; ++m) {
      std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
      if (a == b || b == c || a == c) continue;
      if (a > b) std::swap(a, b);
      if (b > c) std::swap(b, c);
      if (a > b) std::swap(a, b);
      eval(a, b, c);
    }
  }
  return worst;
}

ConcaveHomFn zero_trace_extension(const ConcaveHomFn& v, const Cone& inner) {
  const Cone& c = v.cone();
  if (c.is_whole_plane() || inner.is_whole_plane())
    throw Error(Errc::invalid_argument, "zero-trace extension needs proper sectors");
  if (!(inner.angle_lo() > c.angle_lo() + 1e-12 && inner.angle_hi() < c.angle_hi() - 1e-12))
    throw Error(Errc::invalid_argument, "inner cone is not compactly contained");
  for (double x : v.values())
    if (x < 0.0) throw Error(Errc::invalid_argument, "zero-trace extension needs v >= 0");

  // Constraints a . xi >= b on the slope xi of a linear majorant.
  struct HalfPlane {
    Vec2 a;
    double b;
  };
  std::vector<HalfPlane> cons;
  double vmax = 0.0, margin = 1.0;
  auto add_point = [&](double t) {
    const Vec2 y = unit(t);
    const double b = v.on_arc(t);
    cons.push_back({y, b});
    vmax = std::max(vmax, b);
    margin = std::min({margin, dot(c.inward_normal_lo(), y), dot(c.inward_normal_hi(), y)});
  };
  add_point(inner.angle_lo());
  for (double t : v.angles())
    if (t > inner.angle_lo() && t < inner.angle_hi()) add_point(t);
  add_point(inner.angle_hi());
  cons.push_back({c.ray_lo(), 0.0});
  cons.push_back({c.ray_hi(), 0.0});

  const double B = 4.0 * (vmax / margin + 1.0);
  std::vector<Vec2> poly{{-B, -B}, {B, -B}, {B, B}, {-B, B}};
  for (const HalfPlane& hp : cons) {
    std::vector<Vec2> next;
    const std::size_t m = poly.size();
    for (std::size_t i = 0; i < m; ++i) {
      const Vec2 p = poly[i], q = poly[(i + 1) % m];
      const double fp = dot(hp.a, p) - hp.b, fq = dot(hp.a, q) - hp.b;
      if (fp >= 0.0) next.push_back(p);
      if ((fp >= 0.0) != (fq >= 0.0)) next.push_back(p + (q - p) * (fp / (fp - fq)));
    }
    poly = std::move(next);
    if (poly.empty()) throw Error(Errc::inadmissible_input, "no linear majorant exists");
  }

  std::vector<double> out(v.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Vec2 d = unit(v.angles()[i]);
    double best = std::numeric_limits<double>::infinity();
    for (Vec2 q : poly) best = std::min(best, dot(q, d));
    out[i] = std::max(best, 0.0);
  }
  return ConcaveHomFn(c, std::move(out));
}

}  // namespace isocone
