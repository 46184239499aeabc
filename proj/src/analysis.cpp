#include "isocone/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "isocone/error.hpp"
#include "isocone/parallel.hpp"
#include "isocone/quadrature.hpp"

namespace isocone {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double tpow(double t, double g) { return g == 0.0 ? 1.0 : std::pow(t, g); }

}  // namespace

// ------------------------------------------------------ quantitative AM-GM

AmgmResult quantitative_amgm_check(const std::vector<double>& lambda, const std::vector<double>& x, double c) {
  if (lambda.empty() || lambda.size() != x.size()) throw Error(Errc::invalid_argument, "lambda and x differ in length");
  if (!(c > 0.0)) throw Error(Errc::invalid_argument, "c must be positive");
  double s = 0.0, mean = 0.0, lmin = kInf, log_prod = 0.0;
  bool zero = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(lambda[i] > 0.0) || !(x[i] >= 0.0)) throw Error(Errc::invalid_argument, "need lambda > 0 and x >= 0");
    s += lambda[i];
    mean += lambda[i] * x[i];
    lmin = std::min(lmin, lambda[i]);
    if (x[i] == 0.0) zero = true;
    else log_prod += lambda[i] * std::log(x[i]);
  }
  if (s < 1.0) throw Error(Errc::inadmissible_input, "sum of lambda must be at least 1");
  if (mean > c * s * (1.0 + 1e-15)) throw Error(Errc::inadmissible_input, "sum lambda_i x_i exceeds c * s");
  double lhs = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) lhs += lambda[i] * (x[i] - c) * (x[i] - c);
  const double prod = zero ? 0.0 : std::exp(log_prod);
  const double rhs = (8.0 / 3.0) * std::pow(c, 2.0 - s) * s * s * s / (lmin * lmin) * (std::pow(c, s) - prod);
  return {lhs, rhs, lhs <= rhs + 1e-12 * std::max(1.0, std::abs(rhs))};
}

// ------------------------------------------------------------ 1-D toolkit

IntervalSet::IntervalSet(std::vector<Interval> parts) : parts_(std::move(parts)) {
  if (parts_.size() > 16) throw Error(Errc::invalid_argument, "at most 16 intervals");
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    if (!(parts_[i].first >= 0.0) || !(parts_[i].second > parts_[i].first))
      throw Error(Errc::invalid_argument, "intervals need 0 <= a < b");
    if (i > 0 && !(parts_[i].first > parts_[i - 1].second))
      throw Error(Errc::invalid_argument, "intervals must be sorted and separated");
  }
}

std::vector<double> IntervalSet::boundary(bool include_origin) const {
  std::vector<double> out;
  for (const auto& [a, b] : parts_) {
    if (a > 0.0 || include_origin) out.push_back(a);
    out.push_back(b);
  }
  return out;
}

double power_integral(double a, double b, double gamma) {
  return (std::pow(b, gamma + 1.0) - std::pow(a, gamma + 1.0)) / (gamma + 1.0);
}

double IntervalSet::measure(double gamma) const {
  double s = 0.0;
  for (const auto& [a, b] : parts_) s += power_integral(a, b, gamma);
  return s;
}

bool IntervalSet::contains(double t) const {
  for (const auto& [a, b] : parts_)
    if (t > a && t < b) return true;
  return false;
}

namespace {

// Integral of t^gamma over E ∩ [0, x].
double measure_below(const IntervalSet& e, double x, double gamma) {
  double s = 0.0;
  for (const auto& [a, b] : e.parts()) {
    if (a >= x) break;
    s += power_integral(a, std::min(b, x), gamma);
  }
  return s;
}

}  // namespace

StabilityResult one_dim_stability_check(const IntervalSet& e, double l, double gamma, double c_gamma,
                                        bool include_origin) {
  if (l < 0.75 || l > 1.25) throw Error(Errc::invalid_argument, "l must lie in [3/4, 5/4]");
  if (!(gamma >= 0.0)) throw Error(Errc::invalid_argument, "gamma must be >= 0");
  const double lhs = e.measure(gamma) + power_integral(0.0, l, gamma) - 2.0 * measure_below(e, l, gamma);
  double denom = power_integral(0.0, 0.5, gamma) - measure_below(e, 0.5, gamma);
  for (double t : e.boundary(include_origin)) denom += tpow(t, gamma) * std::abs(l - t);
  const double lhs_c = std::max(lhs, 0.0);
  double ratio = 0.0;
  if (lhs_c > 0.0) ratio = denom > 0.0 ? lhs_c / denom : kInf;
  return {lhs_c, denom, c_gamma * denom, ratio};
}

StabilityFamilyResult one_dim_stability_family(double gamma, const std::vector<double>& ls, double step, double top,
                                               int max_parts) {
  const int n = static_cast<int>(std::llround(top / step)) + 1;
  if (max_parts < 1 || max_parts > 3) throw Error(Errc::invalid_argument, "family supports 1 to 3 intervals");
  std::vector<double> t(n), P(n), W(n);
  for (int i = 0; i < n; ++i) {
    t[i] = i * step;
    P[i] = power_integral(0.0, t[i], gamma);
    W[i] = tpow(t[i], gamma);
  }
  const double half = power_integral(0.0, 0.5, gamma);

  struct Acc {
    double ratio = 0.0;
    double l = 0.0;
    std::size_t count = 0;
    std::vector<int> ends;
  };
  std::vector<Acc> acc(ls.size());

  parallel_for(ls.size(), [&](std::size_t li) {
    const double l = ls[li];
    const double Pl = power_integral(0.0, l, gamma);
    // Clipped antiderivatives at l and 1/2 for each grid point.
    std::vector<double> Pcl(n), Pch(n), G(n);
    for (int i = 0; i < n; ++i) {
      Pcl[i] = P[i] < Pl ? P[i] : Pl;
      Pch[i] = t[i] < 0.5 ? P[i] : half;
      G[i] = W[i] * std::abs(l - t[i]);
    }
    Acc& out = acc[li];
    std::vector<int> ends(6);
    auto visit = [&](int parts, double m, double inl, double inh, double bsum) {
      const double lhs = m + Pl - 2.0 * inl;
      const double denom = (half - inh) + bsum;
      ++out.count;
      if (lhs <= 1e-15) return;
      const double r = denom > 0.0 ? lhs / denom : kInf;
      if (r > out.ratio) {
        out.ratio = r;
        out.l = l;
        out.ends.assign(ends.begin(), ends.begin() + 2 * parts);
      }
    };
    // Boundary contribution of a left endpoint: 0 is excluded.
    auto left_b = [&](int a) { return a == 0 ? 0.0 : G[a]; };
    for (int a1 = 0; a1 < n; ++a1)
      for (int b1 = a1 + 1; b1 < n; ++b1) {
        const double m1 = P[b1] - P[a1], l1 = Pcl[b1] - Pcl[a1], h1 = Pch[b1] - Pch[a1];
        const double s1 = left_b(a1) + G[b1];
        ends[0] = a1;
        ends[1] = b1;
        visit(1, m1, l1, h1, s1);
        if (max_parts < 2) continue;
        for (int a2 = b1 + 1; a2 < n; ++a2)
          for (int b2 = a2 + 1; b2 < n; ++b2) {
            const double m2 = m1 + P[b2] - P[a2], l2 = l1 + Pcl[b2] - Pcl[a2], h2 = h1 + Pch[b2] - Pch[a2];
            const double s2 = s1 + G[a2] + G[b2];
            ends[2] = a2;
            ends[3] = b2;
            visit(2, m2, l2, h2, s2);
            if (max_parts < 3) continue;
            for (int a3 = b2 + 1; a3 < n; ++a3) {
              const double Pa3 = P[a3], Pla3 = Pcl[a3], Pha3 = Pch[a3], Ga3 = G[a3];
              ends[4] = a3;
              for (int b3 = a3 + 1; b3 < n; ++b3) {
                ends[5] = b3;
                visit(3, m2 + P[b3] - Pa3, l2 + Pcl[b3] - Pla3, h2 + Pch[b3] - Pha3, s2 + Ga3 + G[b3]);
              }
            }
          }
      }
  });

  StabilityFamilyResult res{0.0, 0, 0.0, {}};
  for (const Acc& a : acc) {
    res.sets += a.count;
    if (a.ratio > res.max_ratio) {
      res.max_ratio = a.ratio;
      res.worst_l = a.l;
      res.worst_set.clear();
      for (std::size_t k = 0; k + 1 < a.ends.size(); k += 2) res.worst_set.emplace_back(t[a.ends[k]], t[a.ends[k + 1]]);
    }
  }
  return res;
}

namespace {

double pl_eval(const std::vector<std::pair<double, double>>& eta, double t) {
  if (t <= eta.front().first) return eta.front().second;
  if (t >= eta.back().first) return eta.back().second;
  auto it = std::upper_bound(eta.begin(), eta.end(), t, [](double v, const auto& p) { return v < p.first; });
  const auto& [t1, v1] = *it;
  const auto& [t0, v0] = *(it - 1);
  return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
}

// Integral of |g| over [a, b] for linear g with end values ga, gb.
double abs_linear(double ga, double gb, double len) {
  if ((ga >= 0.0) == (gb >= 0.0)) return 0.5 * len * std::abs(ga + gb);
  const double z = len * std::abs(ga) / (std::abs(ga) + std::abs(gb));
  return 0.5 * (z * std::abs(ga) + (len - z) * std::abs(gb));
}

}  // namespace

ShiftBound shift_lower_bound(const std::vector<std::pair<double, double>>& eta, double a, double b, double eps) {
  if (eta.size() < 2 || !(b > a) || !(eps > 0.0)) throw Error(Errc::invalid_argument, "malformed shift-bound input");
  std::vector<double> cuts{a, b};
  for (const auto& [tk, vk] : eta) {
    (void)vk;
    for (double c : {tk, tk - eps})
      if (c > a && c < b) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  double lhs = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double u = cuts[i], v = cuts[i + 1];
    if (v <= u) continue;
    lhs += abs_linear(pl_eval(eta, u + eps) - pl_eval(eta, u), pl_eval(eta, v + eps) - pl_eval(eta, v), v - u);
  }
  auto window = [&](double c, bool want_min) {
    double best = pl_eval(eta, c - eps);
    auto take = [&](double v) { best = want_min ? std::min(best, v) : std::max(best, v); };
    take(pl_eval(eta, c + eps));
    for (const auto& [tk, vk] : eta)
      if (tk > c - eps && tk < c + eps) take(vk);
    return best;
  };
  return {lhs, eps * (window(b, true) - window(a, false))};
}

double polar_slice_volume(const StarSet& e) {
  double s = 0.0;
  const double D = e.weight().D();
  for (int j = 0; j < e.size(); ++j) {
    // Slice E_theta = (0, r_j); measure with density t^{D-1}.
    const IntervalSet slice({{0.0, e.radii()[j]}});
    s += e.arc_weights()[j] * e.arc_weight_values()[j] * slice.measure(D - 1.0);
  }
  return s;
}

// -------------------------------------------------- translation estimates

TranslatedBallControl translated_ball_control_check(const StarSet& e, Vec2 x0) {
  if (norm(x0) > 0.2) throw Error(Errc::invalid_argument, "translation must satisfy |x0| <= 0.2");
  std::vector<double> clipped(e.radii());
  for (double& r : clipped) r = std::min(r, 0.5);
  const double inner = weighted_volume(StarSet(e.weight(), clipped));
  const double half_ball = weighted_volume(StarSet::ball(e.weight(), e.size(), 0.5));
  TranslatedBallControl out{};
  out.hypothesis_holds = inner >= 0.5 * half_ball;
  out.lhs = symdiff_with_ball(e, x0, 1.0);
  out.rhs = boundary_weighted_integral(e, [&](Vec2 p) { return std::abs(norm(p - x0) - 1.0); });
  out.ratio_defined = out.rhs > 1e-14;
  out.ratio = out.ratio_defined ? out.lhs / out.rhs : std::numeric_limits<double>::quiet_NaN();
  return out;
}

double shifted_ball_volume(const HomWeight& w, Vec2 c, double radius) {
  const Cone& cone = w.cone();
  std::vector<Vec2> normals;
  if (!cone.is_whole_plane()) normals = {cone.inward_normal_lo(), cone.inward_normal_hi()};

  // Column x: y-range of disk ∩ cone.
  auto column = [&](double x, double s) -> std::pair<double, double> {
    double y0 = c.y - s, y1 = c.y + s;
    for (Vec2 n : normals) {
      // n.x * x + n.y * y >= 0
      if (std::abs(n.y) < 1e-15) {
        if (n.x * x < 0.0) return {0.0, 0.0};
      } else if (n.y > 0.0) {
        y0 = std::max(y0, -n.x * x / n.y);
      } else {
        y1 = std::min(y1, -n.x * x / n.y);
      }
    }
    return {y0, std::max(y0, y1)};
  };

  const Monomial* mono = w.monomial();
  auto col_integral = [&](double x, double y0, double y1) {
    if (y1 <= y0) return 0.0;
    if (mono) {
      const double fx = mono->a1 == 0.0 ? 1.0 : std::pow(std::max(x, 0.0), mono->a1);
      const double e = mono->a2 + 1.0;
      auto F = [&](double y) {
        if (mono->a2 == 0.0) return y;
        return std::pow(y, e) / e;
      };
      return fx * (F(y1) - F(y0));
    }
    return integrate([&](double y) { return w.value({x, y}); }, y0, y1, 4, 20);
  };

  // Breakpoints in phi, x = c.x - r cos(phi).
  std::vector<double> phis{0.0, kPi};
  auto add_x = [&](double x) {
    const double q = (c.x - x) / radius;
    if (q > -1.0 && q < 1.0) phis.push_back(std::acos(q));
  };
  add_x(0.0);
  if (!cone.is_whole_plane()) {
    for (Vec2 d : {cone.ray_lo(), cone.ray_hi()}) {
      const double b = dot(d, c), disc = b * b - norm2(c) + radius * radius;
      if (disc > 0.0) {
        add_x((b + std::sqrt(disc)) * d.x);
        add_x((b - std::sqrt(disc)) * d.x);
      }
    }
  }
  std::sort(phis.begin(), phis.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < phis.size(); ++i) {
    if (phis[i + 1] - phis[i] < 1e-15) continue;
    total += integrate(
        [&](double phi) {
          const double x = c.x - radius * std::cos(phi);
          const double s = radius * std::sin(phi);
          const auto [y0, y1] = column(x, s);
          return col_integral(x, y0, y1) * radius * std::sin(phi);
        },
        phis[i], phis[i + 1], 8, 20);
  }
  return total;
}

double ball_volume_growth(const HomWeight& w, Vec2 xi) {
  if (norm(xi) > 0.5 + 1e-12) throw Error(Errc::invalid_argument, "ball growth needs |xi| <= 0.5");
  return shifted_ball_volume(w, xi) - shifted_ball_volume(w, {0.0, 0.0});
}

double shifted_weight_separation(const HomWeight& w, const Box& q, Vec2 xi, int n) {
  if (w.alpha() <= 0.0) throw Error(Errc::invalid_argument, "separation needs alpha > 0");
  if (!(q.x1 > q.x0) || !(q.y1 > q.y0) || n < 1) throw Error(Errc::invalid_argument, "malformed box");
  const Cone& c = w.cone();
  double dist = kInf;
  const int m = 100;
  for (int i = 0; i <= m; ++i) {
    const double fx = q.x0 + (q.x1 - q.x0) * i / m, fy = q.y0 + (q.y1 - q.y0) * i / m;
    for (Vec2 p : {Vec2{fx, q.y0}, Vec2{fx, q.y1}, Vec2{q.x0, fy}, Vec2{q.x1, fy}}) {
      if (!c.contains_interior(p) || !c.contains_interior(p + xi))
        throw Error(Errc::outside_cone, "box or translated box leaves the cone");
      dist = std::min(dist, c.distance_to_boundary(p));
    }
  }
  if (norm(xi) > 0.5 * dist + 1e-12)
    throw Error(Errc::invalid_argument, "translation exceeds half the box distance to the cone boundary");
  if (norm(xi) == 0.0) return 0.0;
  const double hx = (q.x1 - q.x0) / n, hy = (q.y1 - q.y0) / n;
  std::vector<double> rows(n);
  parallel_for(n, [&](std::size_t i) {
    double s = 0.0;
    const double x = q.x0 + (i + 0.5) * hx;
    for (int j = 0; j < n; ++j) {
      const Vec2 p{x, q.y0 + (j + 0.5) * hy};
      s += std::abs(w.root(p + xi) - w.root(p));
    }
    rows[i] = s;
  });
  return std::accumulate(rows.begin(), rows.end(), 0.0) * hx * hy;
}

// ------------------------------------------------------ Cheeger and FMP

double psi(double D, double t) {
  const double e = (D - 1.0) / D;
  return std::pow(t, e) + std::pow(1.0 - t, e) - 1.0;
}

double k_of_D(double D) {
  if (!(D > 1.0)) throw Error(Errc::invalid_argument, "D must exceed 1");
  return (2.0 - std::pow(2.0, (D - 1.0) / D)) / 3.0;
}

FmpConstants psi_k(double D) {
  FmpConstants f{D, k_of_D(D), {}, {}};
  for (int i = 0; i <= 1000; ++i) {
    const double t = i / 1000.0;
    f.t.push_back(t);
    f.psi.push_back(psi(D, t));
  }
  f.psi.front() = f.psi.back() = 0.0;
  return f;
}

double cheeger_ratio_1d(const IntervalSet& e, const IntervalSet& f, double gamma) {
  const auto eb = e.boundary(false);
  double per = 0.0, shared = 0.0;
  for (double p : f.boundary(false)) {
    const double wp = tpow(p, gamma);
    per += wp;
    if (std::find(eb.begin(), eb.end(), p) != eb.end()) shared += wp;
  }
  if (shared <= 0.0) return kInf;
  return per / shared;
}

CheegerResult cheeger_bruteforce_1d(const IntervalSet& e, double gamma, int grid_points) {
  if (e.parts().size() > 4 || grid_points > 200)
    throw Error(Errc::search_space_too_large, "1-D Cheeger search limited to 4 intervals and 200 grid points");
  const double W = e.measure(gamma);
  const double half = 0.5 * W;
  const double g1 = gamma + 1.0;
  auto forward = [&](double p, double v) { return std::pow(std::pow(p, g1) + g1 * v, 1.0 / g1); };
  auto backward = [&](double q, double v) {
    const double z = std::pow(q, g1) - g1 * v;
    return z >= 0.0 ? std::pow(z, 1.0 / g1) : -1.0;
  };

  // Candidate pieces: [a_j, x], [x, b_j], [a_j, b_j].
  struct Piece {
    double a, b, vol;
    int comp;
  };
  std::vector<Piece> pieces;
  double total_len = 0.0;
  for (const auto& [a, b] : e.parts()) total_len += b - a;
  const auto& parts = e.parts();
  for (int j = 0; j < static_cast<int>(parts.size()); ++j) {
    const auto [a, b] = parts[j];
    const int g = std::max(2, static_cast<int>(std::lround(grid_points * (b - a) / total_len)));
    std::vector<double> xs;
    for (int i = 1; i < g; ++i) xs.push_back(a + (b - a) * i / g);
    const std::size_t base = xs.size();
    for (std::size_t i = 0; i < base; ++i) {
      for (double v : {half}) {
        const double f = forward(xs[i], v), bk = backward(xs[i], v);
        if (f > a && f < b) xs.push_back(f);
        if (bk > a && bk < b) xs.push_back(bk);
      }
    }
    for (double v : {half}) {
      const double f = forward(a, v), bk = backward(b, v);
      if (f > a && f < b) xs.push_back(f);
      if (bk > a && bk < b) xs.push_back(bk);
    }
    for (double x : xs) {
      pieces.push_back({a, x, power_integral(a, x, gamma), j});
      pieces.push_back({x, b, power_integral(x, b, gamma), j});
    }
    pieces.push_back({a, b, power_integral(a, b, gamma), j});
  }

  CheegerResult best{kInf, kInf, {}};
  auto consider = [&](std::vector<IntervalSet::Interval> f) {
    std::sort(f.begin(), f.end());
    for (std::size_t i = 1; i < f.size(); ++i)
      if (!(f[i].first > f[i - 1].second)) return;
    const IntervalSet F(f);
    const double v = F.measure(gamma);
    if (!(v > 0.0) || v > half * (1.0 + 1e-12)) return;
    const double r = cheeger_ratio_1d(e, F, gamma);
    if (r < best.tau) {
      best.tau = r;
      best.best = f;
    }
  };
  for (const Piece& p : pieces) consider({{p.a, p.b}});
  // Unions of two pieces, plus volume-critical completions of the second.
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const Piece& p = pieces[i];
    if (p.vol >= half) continue;
    for (std::size_t k = i + 1; k < pieces.size(); ++k) {
      const Piece& q = pieces[k];
      if (p.vol + q.vol > half * (1.0 + 1e-12)) continue;
      consider({{p.a, p.b}, {q.a, q.b}});
    }
    const double rest = half - p.vol;
    for (int j = 0; j < static_cast<int>(parts.size()); ++j) {
      const auto [a, b] = parts[j];
      const double f = forward(a, rest), bk = backward(b, rest);
      if (f > a && f < b) consider({{p.a, p.b}, {a, f}});
      if (bk > a && bk < b) consider({{p.a, p.b}, {bk, b}});
    }
  }
  best.tau_minus_one = best.tau - 1.0;
  return best;
}

CheegerResult cheeger_bruteforce_2d(const GridSet& e, const HomWeight& w) {
  const int n = e.count();
  if (n > 24) throw Error(Errc::search_space_too_large, "2-D Cheeger search limited to 24 cells");
  std::vector<std::pair<int, int>> cells;
  std::vector<int> index(static_cast<std::size_t>(e.nx()) * e.ny(), -1);
  for (int j = 0; j < e.ny(); ++j)
    for (int i = 0; i < e.nx(); ++i)
      if (e.occupied(i, j)) {
        index[static_cast<std::size_t>(j) * e.nx() + i] = static_cast<int>(cells.size());
        cells.emplace_back(i, j);
      }
  const double h = e.h();
  const GaussRule& g = cached_gauss_legendre(8);
  auto edge_weight = [&](Vec2 p, Vec2 q) {
    double s = 0.0;
    for (std::size_t k = 0; k < g.nodes.size(); ++k) s += g.weights[k] * w.value(p + (q - p) * (0.5 * (g.nodes[k] + 1.0)));
    return 0.5 * norm(q - p) * s;
  };
  auto on_cone_boundary = [&](Vec2 p, Vec2 q) {
    const Vec2 m = (p + q) * 0.5;
    return e.cone().distance_to_boundary(m) < 1e-12 * h;
  };

  std::vector<double> cell_w(n), ext(n, 0.0);
  std::vector<std::uint32_t> nb(n, 0);
  std::vector<std::vector<std::pair<int, double>>> inner(n);
  for (int c = 0; c < n; ++c) {
    const auto [i, j] = cells[c];
    const Vec2 lo{e.x0() + i * h, e.y0() + j * h};
    double s = 0.0;
    for (std::size_t a = 0; a < g.nodes.size(); ++a)
      for (std::size_t b = 0; b < g.nodes.size(); ++b)
        s += g.weights[a] * g.weights[b] *
             w.value({lo.x + 0.5 * h * (g.nodes[a] + 1.0), lo.y + 0.5 * h * (g.nodes[b] + 1.0)});
    cell_w[c] = 0.25 * h * h * s;
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      Vec2 p, q;
      if (di[k] == 1) p = {lo.x + h, lo.y}, q = {lo.x + h, lo.y + h};
      if (di[k] == -1) p = {lo.x, lo.y}, q = {lo.x, lo.y + h};
      if (dj[k] == 1) p = {lo.x, lo.y + h}, q = {lo.x + h, lo.y + h};
      if (dj[k] == -1) p = {lo.x, lo.y}, q = {lo.x + h, lo.y};
      const int a = i + di[k], b = j + dj[k];
      if (e.occupied(a, b)) {
        const int other = index[static_cast<std::size_t>(b) * e.nx() + a];
        nb[c] |= 1u << other;
        inner[c].emplace_back(other, edge_weight(p, q));
      } else if (!on_cone_boundary(p, q)) {
        ext[c] += edge_weight(p, q);
      }
    }
  }
  const double W = std::accumulate(cell_w.begin(), cell_w.end(), 0.0);

  const std::uint32_t full = n == 32 ? ~0u : ((1u << n) - 1u);
  // Split the mask space by top bits for deterministic parallel reduction.
  const int split_bits = std::min(n, 6);
  const std::size_t chunks = std::size_t{1} << split_bits;
  std::vector<double> best(chunks, kInf);
  std::vector<std::uint32_t> arg(chunks, 0);
  parallel_for(chunks, [&](std::size_t ch) {
    const int low_bits = n - split_bits;
    const std::uint32_t base = static_cast<std::uint32_t>(ch) << low_bits;
    const std::uint32_t count = 1u << low_bits;
    for (std::uint32_t lowm = 0; lowm < count; ++lowm) {
      const std::uint32_t mask = base | lowm;
      if (mask == 0 || mask == full) continue;
      double v = 0.0;
      for (std::uint32_t m = mask; m; m &= m - 1) v += cell_w[__builtin_ctz(m)];
      if (!(v > 0.0) || v > 0.5 * W * (1.0 + 1e-12)) continue;
      std::uint32_t reach = mask & (~mask + 1u), prev = 0;
      while (reach != prev) {
        prev = reach;
        for (std::uint32_t m = reach; m; m &= m - 1) reach |= nb[__builtin_ctz(m)] & mask;
      }
      if (reach != mask) continue;
      double shared = 0.0, per = 0.0;
      for (std::uint32_t m = mask; m; m &= m - 1) {
        const int c = __builtin_ctz(m);
        shared += ext[c];
        for (const auto& [o, ew] : inner[c])
          if (!(mask >> o & 1u)) per += ew;
      }
      per += shared;
      if (shared <= 0.0) continue;
      const double r = per / shared;
      if (r < best[ch]) {
        best[ch] = r;
        arg[ch] = mask;
      }
    }
  });
  CheegerResult out{kInf, kInf, {}};
  for (std::size_t ch = 0; ch < chunks; ++ch)
    if (best[ch] < out.tau) out.tau = best[ch];
  out.tau_minus_one = out.tau - 1.0;
  return out;
}

RemovalReport removal_lemma_check(const StarSet& e, int i0, int i1) {
  const int n = e.size();
  if (e.cone().is_whole_plane()) throw Error(Errc::invalid_argument, "removal check needs a sector cone");
  if (!(0 <= i0 && i0 < i1 && i1 < n)) throw Error(Errc::invalid_argument, "sector indices out of range");
  const double D = e.weight().D();
  const auto& r = e.radii();
  const auto dr = e.radial_derivative();
  const double h = e.cone().opening() / (n - 1);

  auto vol_density = [&](int j) { return std::pow(r[j], D) * e.arc_weight_values()[j] / D; };
  auto per_density = [&](int j) {
    return std::pow(r[j], D - 1.0) * std::sqrt(1.0 + dr[j] * dr[j] / (r[j] * r[j])) * e.arc_weight_values()[j];
  };
  auto trap = [&](auto&& f, int a, int b) {
    double s = 0.5 * (f(a) + f(b));
    for (int j = a + 1; j < b; ++j) s += f(j);
    return s * h;
  };
  // Weighted length of the radial segment {t u(theta_j) : 0 < t < r_j}.
  auto radial = [&](int j) {
    if (j == 0 || j == n - 1) return 0.0;  // lies on ∂Σ
    return std::pow(r[j], D - 1.0) * e.arc_weight_values()[j] / (D - 1.0);
  };

  RemovalReport rep{};
  rep.k = k_of_D(D);
  const MeasureReport m = deficit(e);
  rep.w_E = m.w_volume;
  rep.per_E = m.w_perimeter;
  rep.delta_E = m.deficit;
  rep.w_F = trap(vol_density, i0, i1);
  rep.shared = trap(per_density, i0, i1);
  rep.per_F = rep.shared + radial(i0) + radial(i1);
  rep.applicable = rep.w_F > 0.0 && rep.w_F < 0.5 * rep.w_E && rep.per_F <= (1.0 + rep.k) * rep.shared;

  rep.per_E_minus_F = rep.per_E - rep.shared + radial(i0) + radial(i1);
  const double cstar = discrete_c_star(e.weight(), n);
  rep.delta_E_minus_F = rep.per_E_minus_F / (cstar * std::pow(rep.w_E - rep.w_F, (D - 1.0) / D)) - 1.0;

  const double bound_i = std::pow(std::max(rep.delta_E, 0.0) / rep.k, D / (D - 1.0)) * rep.w_E;
  rep.slack_i = bound_i - rep.w_F;
  rep.slack_ii = rep.per_E - rep.per_E_minus_F;
  rep.iii_applicable = rep.delta_E <= rep.k;
  rep.slack_iii = 3.0 / rep.k * rep.delta_E - rep.delta_E_minus_F;
  const double tol = 1e-12 * std::max(1.0, rep.per_E);
  rep.i_holds = rep.slack_i >= -tol;
  rep.ii_holds = rep.slack_ii >= -tol;
  rep.iii_holds = !rep.iii_applicable || rep.slack_iii >= -1e-12;
  return rep;
}

double PiecewiseConstant::at(double t) const {
  const auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
  return values[static_cast<std::size_t>(it - breaks.begin())];
}

TracePoincareReport trace_poincare_check_1d(const IntervalSet& e, const PiecewiseConstant& f, double gamma,
                                            double tau) {
  if (f.values.size() != f.breaks.size() + 1 || f.values.size() > 8)
    throw Error(Errc::invalid_argument, "f needs breaks.size() + 1 <= 8 values");
  if (!std::is_sorted(f.breaks.begin(), f.breaks.end())) throw Error(Errc::invalid_argument, "breaks must be sorted");
  const double D = 1.0 + gamma;
  const double W = e.measure(gamma);

  // Pieces of E on which f is constant.
  struct Piece {
    double a, b, v;
  };
  std::vector<Piece> pieces;
  for (const auto& [a, b] : e.parts()) {
    double lo = a;
    for (double br : f.breaks) {
      if (br <= lo || br >= b) continue;
      pieces.push_back({lo, br, f.at(0.5 * (lo + br))});
      lo = br;
    }
    pieces.push_back({lo, b, f.at(0.5 * (lo + b))});
  }
  // Weighted median: smallest value v with w({f <= v}) >= W/2.
  std::vector<double> vals;
  for (const Piece& p : pieces) vals.push_back(p.v);
  std::sort(vals.begin(), vals.end());
  double c = vals.back();
  for (double v : vals) {
    double below = 0.0;
    for (const Piece& p : pieces)
      if (p.v <= v) below += power_integral(p.a, p.b, gamma);
    if (below >= 0.5 * W * (1.0 - 1e-15)) {
      c = v;
      break;
    }
  }

  TracePoincareReport rep{};
  rep.median = c;
  for (std::size_t i = 0; i + 1 < pieces.size(); ++i)
    if (pieces[i].b == pieces[i + 1].a) rep.lhs += std::abs(pieces[i + 1].v - pieces[i].v) * tpow(pieces[i].b, gamma);
  double trace = 0.0;
  for (const auto& [a, b] : e.parts()) {
    if (a > 0.0) trace += std::abs(f.at(a + 1e-12 * (b - a) + 1e-300) - c) * tpow(a, gamma);
    trace += std::abs(f.at(b - 1e-12 * (b - a)) - c) * tpow(b, gamma);
  }
  rep.trace_rhs = (tau - 1.0) * trace;
  double lp = 0.0;
  for (const Piece& p : pieces) lp += std::pow(std::abs(p.v - c), D / (D - 1.0)) * power_integral(p.a, p.b, gamma);
  rep.poincare_rhs = D * (1.0 - 1.0 / tau) * std::pow(lp, (D - 1.0) / D);
  const double tol = 1e-12 * std::max(1.0, rep.lhs);
  rep.trace_holds = rep.trace_rhs <= rep.lhs + tol;
  rep.poincare_holds = rep.poincare_rhs <= rep.lhs + tol;
  return rep;
}

}  // namespace isocone
