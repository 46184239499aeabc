#pragma once

// Test-only helpers and independent oracles. Nothing here calls the library
// routine it is used to check.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "isocone/cone_weight.hpp"
#include "isocone/geometry.hpp"
#include "isocone/quadrature.hpp"

namespace isocone::testing {

/// Smooth random radial function: 1 + sum of 6 Fourier modes in theta^,
/// amplitudes shrinking like 1/m, scaled so r stays in [0.5, 1.5].
inline std::function<double(double)> random_radial(const Cone& cone, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> a(7), b(7);
  for (int m = 1; m <= 6; ++m) {
    a[m] = u(rng) / m;
    b[m] = u(rng) / m;
  }
  double total = 0.0;
  for (int m = 1; m <= 6; ++m) total += std::abs(a[m]) + std::abs(b[m]);
  const double amp = std::uniform_real_distribution<double>(0.02, 0.45)(rng) / total;
  const double scale = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
  const double lo = cone.angle_lo(), open = cone.is_whole_plane() ? 2.0 * kPi : cone.opening();
  const double period = cone.is_whole_plane() ? 1.0 : 0.5;
  return [=](double t) {
    const double s = 2.0 * kPi * period * (t - lo) / open;
    double r = 1.0;
    for (int m = 1; m <= 6; ++m) r += amp * (a[m] * std::cos(m * s) + b[m] * std::sin(m * s));
    return scale * r;
  };
}

/// Midpoint rule over [x0, x1] x [y0, y1] restricted to the open cone.
inline double midpoint_integral(const Cone& cone, double x0, double x1, double y0, double y1, double h,
                                const std::function<double(Vec2)>& f) {
  const int nx = static_cast<int>(std::ceil((x1 - x0) / h));
  const int ny = static_cast<int>(std::ceil((y1 - y0) / h));
  const double hx = (x1 - x0) / nx, hy = (y1 - y0) / ny;
  double s = 0.0;
  for (int i = 0; i < nx; ++i) {
    double col = 0.0;
    for (int j = 0; j < ny; ++j) {
      const Vec2 p{x0 + (i + 0.5) * hx, y0 + (j + 0.5) * hy};
      if (cone.contains_interior(p)) col += f(p);
    }
    s += col;
  }
  return s * hx * hy;
}

/// Gauss-Legendre polar oracle for integrals over the arc with an analytic
/// radial function and its derivative.
inline double polar_boundary_oracle(const HomWeight& w, const std::function<double(double)>& r,
                                    const std::function<double(double)>& dr, const std::function<double(Vec2)>& g) {
  const Cone& c = w.cone();
  const double D = w.D();
  return integrate(
      [&](double t) {
        const double rv = r(t), d = dr(t);
        return g(unit(t) * rv) * std::pow(rv, D - 1.0) * std::sqrt(1.0 + d * d / (rv * rv)) * w.on_arc(t);
      },
      c.angle_lo(), c.angle_hi(), 256, 20);
}

}  // namespace isocone::testing

namespace isocone::testing {

inline double smoothstep5(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (x * (6.0 * x - 15.0) + 10.0);
}

struct RemovalCase {
  StarSet set;
  int i0, i1;
};

/// Unit balls with a narrow notch (depth to r_min) near the upper ray, cut at
/// the notch, and unit balls with a tall spike, cut around the spike. The
/// notched cuts are short, which is what makes the removal hypothesis hold.
inline std::vector<RemovalCase> removal_family(int n = 4097) {
  std::vector<RemovalCase> out;
  const Cone q = Cone::quadrant();
  for (Monomial m : {Monomial{1, 0}, Monomial{1, 1}}) {
    const HomWeight w(q, m);
    for (double ta : {1.2, 1.4, 1.5})
      for (double rmin : {0.05, 0.2})
        for (double hw : {0.005, 0.03}) {
          auto f = [&](double t) {
            return 1.0 - (1.0 - rmin) * (1.0 - smoothstep5((std::abs(t - ta) - hw) / 0.02));
          };
          StarSet e = StarSet::from_function(w, n, f);
          const int j = static_cast<int>(std::lround(ta / (kPi / 2) * (n - 1)));
          out.push_back({e, j, n - 1});
          out.push_back({e, j - 64, n - 1});
          out.push_back({e, j, j + 256 < n ? j + 256 : n - 1});
        }
    for (double c : {0.8, 1.4}) {
      auto f = [&](double t) { return 1.0 + 2.0 * (1.0 - smoothstep5((std::abs(t - c) - 0.05) / 0.01)); };
      StarSet e = StarSet::from_function(w, n, f);
      const int a = static_cast<int>((c - 0.065) / (kPi / 2) * (n - 1));
      const int b = static_cast<int>((c + 0.065) / (kPi / 2) * (n - 1)) + 1;
      out.push_back({e, a, std::min(b, n - 1)});
    }
  }
  return out;
}

/// Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre_rule(int n, std::vector<double>& x, std::vector<double>& wt) {
  x.assign(n, 0.0);
  wt.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5)), dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1, p1 = p2;
      }
      if (n == 1) p1 = z, p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    wt[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

/// Composite Gauss-Legendre on [a, b]: `panels` panels of `order` points.
inline double composite_gl(const std::function<double(double)>& f, double a, double b, int panels, int order) {
  std::vector<double> x, wt;
  gauss_legendre_rule(order, x, wt);
  const double h = (b - a) / panels;
  double s = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (int k = 0; k < order; ++k) s += wt[k] * f(mid + 0.5 * h * x[k]);
  }
  return 0.5 * h * s;
}

/// w(B1(xi) ∩ Σ) - w(B1 ∩ Σ) in polar coordinates about the origin, |xi| < 1:
/// each ray meets B1(xi) in [0, t+] with t+ = u.xi + sqrt((u.xi)^2 + 1 - |xi|^2).
inline double polar_growth_oracle(const HomWeight& w, Vec2 xi) {
  const Cone& c = w.cone();
  const double D = w.D();
  const double q = 1.0 - norm2(xi);
  return composite_gl(
      [&](double t) {
        const Vec2 u = unit(t);
        const double b = dot(u, xi);
        const double tp = b + std::sqrt(b * b + q);
        return w.on_arc(t) * (std::pow(tp, D) - 1.0) / D;
      },
      c.angle_lo(), c.angle_hi(), 256, 8);
}

/// Tensor Gauss-Legendre value of the integral over Q of |w^{1/a}(x + xi) - w^{1/a}(x)|.
inline double tensor_separation_oracle(const HomWeight& w, double x0, double x1, double y0, double y1, Vec2 xi) {
  return composite_gl(
      [&](double x) {
        return composite_gl(
            [&](double y) {
              const Vec2 p{x, y};
              return std::abs(w.root(p + xi) - w.root(p));
            },
            y0, y1, 96, 6);
      },
      x0, x1, 96, 6);
}

}  // namespace isocone::testing
