#include "isocone/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>

#include "isocone/error.hpp"
#include "isocone/quadrature.hpp"

namespace isocone {

namespace {

std::vector<double> arc_quadrature(const Cone& c, int n) {
  if (c.is_whole_plane()) return std::vector<double>(n, 2.0 * kPi / n);
  return trapezoid_weights(n, c.angle_lo(), c.angle_hi());
}

std::vector<double> arc_weight_samples(const HomWeight& w, const std::vector<double>& theta) {
  std::vector<double> out(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) out[j] = w.on_arc(theta[j]);
  return out;
}

double ray_measure(double a, double b, double D) { return (std::pow(b, D) - std::pow(a, D)) / D; }

}  // namespace

// ------------------------------------------------------------- StarSet

StarSet::StarSet(HomWeight w, std::vector<double> r, double radius_cap)
    : w_(std::move(w)), r_(std::move(r)), cap_(radius_cap) {
  const int n = static_cast<int>(r_.size());
  if (n < 3) throw Error(Errc::invalid_argument, "star set needs at least three samples");
  for (double v : r_)
    if (!(v > 0.0) || !(v <= cap_)) throw Error(Errc::invalid_argument, "radial values must lie in (0, radius_cap]");
  theta_ = cone().arc_grid(n);
  q_ = arc_quadrature(cone(), n);
  wa_ = arc_weight_samples(w_, theta_);
}

StarSet StarSet::ball(const HomWeight& w, int n_theta, double radius) {
  return StarSet(w, std::vector<double>(n_theta, radius));
}

StarSet StarSet::from_function(const HomWeight& w, int n_theta, const std::function<double(double)>& r_of_theta) {
  std::vector<double> r;
  r.reserve(n_theta);
  for (double t : w.cone().arc_grid(n_theta)) r.push_back(r_of_theta(t));
  return StarSet(w, std::move(r));
}

std::vector<double> project_mean_zero(const HomWeight& w, int n_theta, std::vector<double> eta) {
  const Cone& c = w.cone();
  const auto theta = c.arc_grid(n_theta);
  const auto q = arc_quadrature(c, n_theta);
  double num = 0.0, den = 0.0;
  for (int j = 0; j < n_theta; ++j) {
    const double wj = w.on_arc(theta[j]);
    num += q[j] * wj * eta[j];
    den += q[j] * wj;
  }
  const double mean = num / den;
  for (double& e : eta) e -= mean;
  return eta;
}

StarSet StarSet::perturbed_ball(const HomWeight& w, int n_theta, double eps, int m) {
  const Cone& c = w.cone();
  const auto theta = c.arc_grid(n_theta);
  std::vector<double> eta(n_theta);
  for (int j = 0; j < n_theta; ++j) {
    const double hat = c.is_whole_plane() ? theta[j] : (theta[j] - c.angle_lo()) / c.opening();
    eta[j] = std::cos(m * hat);
  }
  eta = project_mean_zero(w, n_theta, std::move(eta));
  double amp = 0.0;
  for (double e : eta) amp = std::max(amp, std::abs(e));
  if (amp < 1e-12) throw Error(Errc::invalid_argument, "perturbation vanishes after mean-zero projection");
  std::vector<double> r(n_theta);
  for (int j = 0; j < n_theta; ++j) r[j] = 1.0 + eps * eta[j];
  return StarSet(w, std::move(r));
}

StarSet StarSet::translated_ball(const HomWeight& w, int n_theta, Vec2 x0, double r) {
  if (!(norm(x0) < r)) throw Error(Errc::unsupported_translation, "translated ball must contain the origin");
  return from_function(w, n_theta, [&](double t) { return ray_ball_interval(unit(t), x0, r)->second; });
}

std::vector<double> StarSet::radial_derivative() const {
  const int n = size();
  std::vector<double> d(n);
  if (cone().is_whole_plane()) {
    const double h = 2.0 * kPi / n;
    for (int j = 0; j < n; ++j) d[j] = (r_[(j + 1) % n] - r_[(j + n - 1) % n]) / (2.0 * h);
    return d;
  }
  const double h = cone().opening() / (n - 1);
  for (int j = 1; j < n - 1; ++j) d[j] = (r_[j + 1] - r_[j - 1]) / (2.0 * h);
  d[0] = (-3.0 * r_[0] + 4.0 * r_[1] - r_[2]) / (2.0 * h);
  d[n - 1] = (3.0 * r_[n - 1] - 4.0 * r_[n - 2] + r_[n - 3]) / (2.0 * h);
  return d;
}

double StarSet::radius_at(double angle) const {
  const int n = size();
  if (cone().is_whole_plane()) {
    const double h = 2.0 * kPi / n;
    double s = std::fmod(angle - cone().angle_lo(), 2.0 * kPi);
    if (s < 0.0) s += 2.0 * kPi;
    const int i = std::min(static_cast<int>(s / h), n - 1);
    const double f = s / h - i;
    return (1.0 - f) * r_[i] + f * r_[(i + 1) % n];
  }
  const double h = cone().opening() / (n - 1);
  const double q = std::clamp((angle - cone().angle_lo()) / h, 0.0, static_cast<double>(n - 1));
  const int i = std::min(static_cast<int>(q), n - 2);
  const double f = q - i;
  return (1.0 - f) * r_[i] + f * r_[i + 1];
}

StarSet StarSet::scaled(double lambda) const {
  std::vector<double> r(r_);
  for (double& v : r) v *= lambda;
  return StarSet(w_, std::move(r), cap_ * std::max(1.0, lambda));
}

std::string StarSet::to_csv() const {
  std::string out = "theta,r\n";
  char buf[64];
  for (int j = 0; j < size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", theta_[j], r_[j]);
    out += buf;
  }
  return out;
}

// ------------------------------------------------------------ measures

double discrete_unit_ball_volume(const HomWeight& w, int n_theta) {
  const auto theta = w.cone().arc_grid(n_theta);
  const auto q = arc_quadrature(w.cone(), n_theta);
  double s = 0.0;
  for (int j = 0; j < n_theta; ++j) s += q[j] * w.on_arc(theta[j]);
  return s / w.D();
}

double discrete_c_star(const HomWeight& w, int n_theta) {
  return w.D() * std::pow(discrete_unit_ball_volume(w, n_theta), 1.0 / w.D());
}

double weighted_volume(const StarSet& e) {
  const double D = e.weight().D();
  const auto& r = e.radii();
  double s = 0.0;
  for (int j = 0; j < e.size(); ++j) s += e.arc_weights()[j] * std::pow(r[j], D) * e.arc_weight_values()[j];
  return s / D;
}

double weighted_perimeter(const StarSet& e) {
  return boundary_weighted_integral(e, [](Vec2) { return 1.0; });
}

double boundary_weighted_integral(const StarSet& e, const std::function<double(Vec2)>& g) {
  const double D = e.weight().D();
  const auto& r = e.radii();
  const auto dr = e.radial_derivative();
  double s = 0.0;
  for (int j = 0; j < e.size(); ++j) {
    const double stretch = std::sqrt(1.0 + dr[j] * dr[j] / (r[j] * r[j]));
    s += e.arc_weights()[j] * g(e.boundary_point(j)) * std::pow(r[j], D - 1.0) * stretch *
         e.arc_weight_values()[j];
  }
  return s;
}

MeasureReport deficit(const StarSet& e) {
  const double D = e.weight().D();
  const double vol = weighted_volume(e);
  if (!(vol > 0.0)) throw Error(Errc::invalid_argument, "deficit of a set with zero weighted volume");
  const double per = weighted_perimeter(e);
  const double ball = discrete_unit_ball_volume(e.weight(), e.size());
  const double cstar = D * std::pow(ball, 1.0 / D);
  // Per / (c* vol^{(D-1)/D}) written so that exact balls cancel to rounding.
  const double delta = per / (cstar * std::pow(vol, (D - 1.0) / D)) - 1.0;
  return {vol, per, delta, std::pow(vol / ball, 1.0 / D)};
}

std::optional<std::pair<double, double>> ray_ball_interval(Vec2 u, Vec2 x0, double r) {
  const double b = dot(u, x0);
  const double disc = b * b - norm2(x0) + r * r;
  if (disc <= 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double hi = b + sq;
  if (hi <= 0.0) return std::nullopt;
  // Stable smaller root: (|x0|^2 - r^2) / hi.
  const double lo = std::max(0.0, (norm2(x0) - r * r) / hi);
  return std::make_pair(lo, hi);
}

double symdiff_with_ball_general(const StarSet& e, Vec2 x0, double r) {
  const double D = e.weight().D();
  const auto& rr = e.radii();
  double s = 0.0;
  for (int j = 0; j < e.size(); ++j) {
    const double wj = e.arc_weight_values()[j];
    if (wj == 0.0) continue;
    const double me = ray_measure(0.0, rr[j], D);
    double val = me;
    if (auto iv = ray_ball_interval(unit(e.angles()[j]), x0, r)) {
      const double mb = ray_measure(iv->first, iv->second, D);
      const double lo = iv->first, hi = std::min(iv->second, rr[j]);
      const double mi = hi > lo ? ray_measure(lo, hi, D) : 0.0;
      val = me + mb - 2.0 * mi;
    }
    s += e.arc_weights()[j] * wj * std::max(val, 0.0);
  }
  return s;
}

double symdiff_with_ball(const StarSet& e, Vec2 x0, double r) {
  if (!(norm(x0) < r)) throw Error(Errc::unsupported_translation, "symdiff_with_ball needs |x0| < r");
  return symdiff_with_ball_general(e, x0, r);
}

AsymmetryResult asymmetry(const StarSet& e) {
  const MeasureReport m = deficit(e);
  const Cone& c = e.cone();
  if (c.is_whole_plane()) throw Error(Errc::invalid_argument, "asymmetry is defined for sectors only");
  if (!c.is_half_plane()) {
    const double a = symdiff_with_ball_general(e, {0.0, 0.0}, m.r_eq) / m.w_volume;
    return {std::clamp(a, 0.0, 2.0), {0.0, 0.0}};
  }
  Vec2 dir = c.ray_lo();
  if (dir.x < 0.0 || (dir.x == 0.0 && dir.y < 0.0)) dir = -dir;
  auto f = [&](double t) { return symdiff_with_ball_general(e, dir * t, m.r_eq) / m.w_volume; };
  const double span = 2.0 * m.r_eq;
  const int coarse = 41;
  int best = 0;
  std::vector<double> vals(coarse);
  for (int i = 0; i < coarse; ++i) {
    vals[i] = f(-span + 2.0 * span * i / (coarse - 1));
    if (vals[i] < vals[best]) best = i;
  }
  const double step = 2.0 * span / (coarse - 1);
  double a = -span + step * std::max(best - 1, 0), b = -span + step * std::min(best + 1, coarse - 1);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > 1e-6 * m.r_eq) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    }
  }
  double t = 0.5 * (a + b), ft = f(t);
  const double t0 = -span + step * best;
  if (vals[best] < ft) {
    t = t0;
    ft = vals[best];
  }
  return {std::clamp(ft, 0.0, 2.0), dir * t};
}

double resolution_self_check(const HomWeight& w, int n_theta, const std::function<double(double)>& r_of_theta) {
  const StarSet a = StarSet::from_function(w, n_theta, r_of_theta);
  const StarSet b = StarSet::from_function(w, 2 * n_theta - 1, r_of_theta);
  return std::max(std::abs(weighted_volume(a) - weighted_volume(b)),
                  std::abs(weighted_perimeter(a) - weighted_perimeter(b)));
}

// ------------------------------------------------------------- GridSet

GridSet::GridSet(Cone cone, double x0, double y0, double h, int nx, int ny, std::vector<std::uint8_t> cells)
    : cone_(cone), x0_(x0), y0_(y0), h_(h), nx_(nx), ny_(ny), cells_(std::move(cells)) {
  if (!(h > 0.0) || nx <= 0 || ny <= 0 || cells_.size() != static_cast<std::size_t>(nx) * ny)
    throw Error(Errc::invalid_argument, "malformed grid set");
  if (count() == 0) throw Error(Errc::invalid_argument, "grid set is empty");
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i)
      if (occupied(i, j) && !cone_.contains(center(i, j), 1e-12))
        throw Error(Errc::outside_cone, "occupied cell center outside the cone");
}

GridSet GridSet::rasterize(const Cone& cone, double x0, double y0, double h, int nx, int ny,
                           const std::function<bool(Vec2)>& inside) {
  std::vector<std::uint8_t> cells(static_cast<std::size_t>(nx) * ny, 0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Vec2 c{x0 + (i + 0.5) * h, y0 + (j + 0.5) * h};
      cells[static_cast<std::size_t>(j) * nx + i] = cone.contains(c, 0.0) && inside(c) ? 1 : 0;
    }
  return GridSet(cone, x0, y0, h, nx, ny, std::move(cells));
}

int GridSet::count() const {
  int n = 0;
  for (auto c : cells_) n += c != 0;
  return n;
}

double GridSet::weighted_volume(const HomWeight& w) const {
  double s = 0.0;
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i)
      if (occupied(i, j)) s += w.value(center(i, j));
  return s * h_ * h_;
}

bool is_indecomposable(const GridSet& g) {
  const int nx = g.nx(), ny = g.ny();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(nx) * ny, 0);
  std::queue<std::pair<int, int>> q;
  for (int j = 0; j < ny && q.empty(); ++j)
    for (int i = 0; i < nx; ++i)
      if (g.occupied(i, j)) {
        q.push({i, j});
        seen[static_cast<std::size_t>(j) * nx + i] = 1;
        break;
      }
  int reached = 0;
  while (!q.empty()) {
    auto [i, j] = q.front();
    q.pop();
    ++reached;
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int a = i + di[k], b = j + dj[k];
      if (g.occupied(a, b) && !seen[static_cast<std::size_t>(b) * nx + a]) {
        seen[static_cast<std::size_t>(b) * nx + a] = 1;
        q.push({a, b});
      }
    }
  }
  return reached == g.count();
}

}  // namespace isocone
