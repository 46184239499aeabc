#pragma once

#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "isocone/cone_weight.hpp"
#include "isocone/geometry.hpp"

namespace isocone {

// ------------------------------------------------------ quantitative AM-GM

struct AmgmResult {
  double lhs;
  double rhs;
  bool holds;
};

/// lhs = sum l_i (x_i - c)^2,
/// rhs = (8/3) c^{2-s} s^3 / (min l)^2 (c^s - prod x_i^{l_i}), s = sum l_i.
/// Requires s >= 1 and sum l_i x_i <= c s (inadmissible_input otherwise).
AmgmResult quantitative_amgm_check(const std::vector<double>& lambda, const std::vector<double>& x, double c);

// ------------------------------------------------------------ 1-D toolkit

/// Disjoint sorted intervals (a_i, b_i) in [0, inf), at most 16, separated
/// by positive gaps.
class IntervalSet {
 public:
  using Interval = std::pair<double, double>;
  explicit IntervalSet(std::vector<Interval> parts);

  const std::vector<Interval>& parts() const { return parts_; }
  /// Endpoints inside the open half-line. An interval starting at 0 does not
  /// put 0 in the reduced boundary unless include_origin is set.
  std::vector<double> boundary(bool include_origin = false) const;
  /// Integral of t^gamma over the set.
  double measure(double gamma) const;
  bool contains(double t) const;

 private:
  std::vector<Interval> parts_;
};

/// Integral of t^gamma over [a, b] (a, b >= 0).
double power_integral(double a, double b, double gamma);

struct StabilityResult {
  double lhs;    ///< integral of t^gamma over E Δ [0, l]
  double denom;  ///< integral over [0,1/2] \ E plus boundary sum of t^gamma |l - t|
  double rhs;    ///< C_gamma * denom
  double ratio;  ///< lhs / denom (0 when lhs = 0, inf when only denom = 0)
};

StabilityResult one_dim_stability_check(const IntervalSet& e, double l, double gamma, double c_gamma = 1.0,
                                        bool include_origin = false);

/// Exhaustive family: unions of at most max_parts intervals with endpoints on
/// the grid k * step in [0, top], every l in ls. Returns the largest ratio.
struct StabilityFamilyResult {
  double max_ratio;
  std::size_t sets;
  double worst_l;
  std::vector<IntervalSet::Interval> worst_set;
};
StabilityFamilyResult one_dim_stability_family(double gamma, const std::vector<double>& ls, double step = 0.05,
                                               double top = 3.0, int max_parts = 3);

struct ShiftBound {
  double lhs;  ///< integral_a^b |eta(t + eps) - eta(t)| dt
  double rhs;  ///< eps (inf_{|t-b|<=eps} eta - sup_{|t-a|<=eps} eta)
};

/// Piecewise-linear eta given by nodes (t_k, eta_k), constant beyond the ends.
ShiftBound shift_lower_bound(const std::vector<std::pair<double, double>>& eta, double a, double b, double eps);

/// Integrates the per-ray slices {t : t u(theta) in E} of a star set.
double polar_slice_volume(const StarSet& e);

// -------------------------------------------------- translation estimates

struct TranslatedBallControl {
  double lhs;
  double rhs;
  double ratio;
  bool ratio_defined;
  bool hypothesis_holds;
};

/// lhs = w(E Δ B1(x0)), rhs = boundary integral of ||x - x0| - 1|.
/// Requires |x0| <= 0.2 (invalid_argument otherwise); the hypothesis
/// w(E ∩ B_{1/2}) >= w(B_{1/2} ∩ Σ)/2 is evaluated and reported.
TranslatedBallControl translated_ball_control_check(const StarSet& e, Vec2 x0);

/// w(B1(xi) ∩ Σ) - w(B1 ∩ Σ) by column-wise Gauss-Legendre quadrature.
double ball_volume_growth(const HomWeight& w, Vec2 xi);
/// w(B_r(c) ∩ Σ) by the same quadrature.
double shifted_ball_volume(const HomWeight& w, Vec2 center, double radius = 1.0);

struct Box {
  double x0, x1, y0, y1;
};

/// integral over Q of |w^{1/a}(x + xi) - w^{1/a}(x)| by an n x n midpoint rule.
/// Requires Q and Q + xi inside Σ and |xi| <= dist(Q, ∂Σ)/2.
double shifted_weight_separation(const HomWeight& w, const Box& q, Vec2 xi, int n = 512);

// ------------------------------------------------------ Cheeger and FMP

struct FmpConstants {
  double D;
  double k;
  std::vector<double> t;    ///< 1001 points on [0, 1]
  std::vector<double> psi;  ///< Psi(t) = t^{(D-1)/D} + (1-t)^{(D-1)/D} - 1
};

FmpConstants psi_k(double D);
double psi(double D, double t);
double k_of_D(double D);

struct CheegerResult {
  double tau;
  double tau_minus_one;
  std::vector<IntervalSet::Interval> best;  ///< minimizing F (1-D only)
};

/// Per_w(F) / H_w(∂F ∩ ∂E) for F ⊆ E on the half-line with w = t^gamma;
/// inf when nothing is shared.
double cheeger_ratio_1d(const IntervalSet& e, const IntervalSet& f, double gamma);

/// Brute force over F made of at most two intervals, endpoints on a grid of
/// `grid_points` points in E augmented by E's endpoints and volume-critical
/// points with w(F) = w(E)/2. Limits: 4 intervals, 200 grid points.
CheegerResult cheeger_bruteforce_1d(const IntervalSet& e, double gamma, int grid_points = 200);

/// Exhaustive over 4-connected cell subsets F with 0 < w(F) <= w(E)/2.
/// Limit: 24 cells.
CheegerResult cheeger_bruteforce_2d(const GridSet& e, const HomWeight& w);

struct RemovalReport {
  bool applicable;
  double w_E, w_F, per_E, per_F, shared;
  double delta_E;
  double per_E_minus_F, delta_E_minus_F;
  double k;
  bool i_holds, ii_holds, iii_holds;
  bool iii_applicable;  ///< (iii) is asserted when delta_E <= k
  double slack_i, slack_ii, slack_iii;
};

/// F = E ∩ {theta in [grid angle i0, grid angle i1]}.
RemovalReport removal_lemma_check(const StarSet& e, int i0, int i1);

struct PiecewiseConstant {
  std::vector<double> breaks;  ///< interior breakpoints, sorted
  std::vector<double> values;  ///< breaks.size() + 1 values
  double at(double t) const;
};

struct TracePoincareReport {
  double median;
  double lhs;
  double trace_rhs;
  double poincare_rhs;
  bool trace_holds;
  bool poincare_holds;
};

/// E a single interval on the half-line with w = t^gamma, D = 1 + gamma.
TracePoincareReport trace_poincare_check_1d(const IntervalSet& e, const PiecewiseConstant& f, double gamma,
                                            double tau);

}  // namespace isocone
