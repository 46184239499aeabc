#pragma once

#include <vector>

namespace isocone {

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule by Newton iteration on P_n.
GaussRule gauss_legendre(int n);

/// Composite Gauss-Legendre on [a, b] with `panels` equal panels.
template <class F>
double integrate(F&& f, double a, double b, int panels = 64, int order = 16);

/// Trapezoid weights for a uniform grid of n points spanning [a, b].
std::vector<double> trapezoid_weights(int n, double a, double b);

// ---------------------------------------------------------------------------

const GaussRule& cached_gauss_legendre(int n);

template <class F>
double integrate(F&& f, double a, double b, int panels, int order) {
  const GaussRule& g = cached_gauss_legendre(order);
  const double hpan = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double c = a + (p + 0.5) * hpan;
    double s = 0.0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) s += g.weights[i] * f(c + 0.5 * hpan * g.nodes[i]);
    total += 0.5 * hpan * s;
  }
  return total;
}

}  // namespace isocone
