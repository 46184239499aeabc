#include "isocone/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "isocone/cone_weight.hpp"
#include "isocone/error.hpp"

namespace isocone {

GaussRule gauss_legendre(int n) {
  if (n < 1) throw Error(Errc::invalid_argument, "gauss_legendre needs n >= 1");
  GaussRule g;
  g.nodes.resize(n);
  g.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double wgt = 2.0 / ((1.0 - x * x) * dp * dp);
    g.nodes[i] = -x;
    g.nodes[n - 1 - i] = x;
    g.weights[i] = wgt;
    g.weights[n - 1 - i] = wgt;
  }
  if (n % 2 == 1) g.nodes[n / 2] = 0.0;
  return g;
}

const GaussRule& cached_gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_legendre(n)).first;
  return it->second;
}

std::vector<double> trapezoid_weights(int n, double a, double b) {
  if (n < 2) throw Error(Errc::invalid_argument, "trapezoid needs at least two points");
  const double h = (b - a) / (n - 1);
  std::vector<double> w(n, h);
  w.front() = w.back() = 0.5 * h;
  return w;
}

}  // namespace isocone
