#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "isocone/cone_weight.hpp"

namespace isocone {

/// E_(r) = { t u(theta) : 0 < t < r(theta) } sampled on the arc grid of the
/// weight's cone. Invariant: 0 < r_j <= radius_cap.
class StarSet {
 public:
  static constexpr double kDefaultRadiusCap = 1e6;

  StarSet(HomWeight w, std::vector<double> r, double radius_cap = kDefaultRadiusCap);

  static StarSet ball(const HomWeight& w, int n_theta, double radius = 1.0);
  static StarSet from_function(const HomWeight& w, int n_theta, const std::function<double(double)>& r_of_theta);
  /// r = 1 + eps * eta~, eta~ the w-mean-zero projection of cos(m * theta^)
  /// with theta^ = (theta - lo) / opening in [0, 1] (theta itself on the
  /// periodic plane).
  static StarSet perturbed_ball(const HomWeight& w, int n_theta, double eps, int m);
  /// Translated ball B_r(x0) with |x0| < r, which is star-shaped about 0.
  static StarSet translated_ball(const HomWeight& w, int n_theta, Vec2 x0, double r = 1.0);

  const HomWeight& weight() const { return w_; }
  const Cone& cone() const { return w_.cone(); }
  int size() const { return static_cast<int>(r_.size()); }
  const std::vector<double>& radii() const { return r_; }
  const std::vector<double>& angles() const { return theta_; }
  /// Quadrature weights matching angles().
  const std::vector<double>& arc_weights() const { return q_; }
  /// w on the unit arc at angles().
  const std::vector<double>& arc_weight_values() const { return wa_; }
  /// dr/dtheta by second-order finite differences.
  std::vector<double> radial_derivative() const;
  double radius_cap() const { return cap_; }
  /// Linear interpolation of r at an arbitrary angle of the cone.
  double radius_at(double angle) const;
  Vec2 boundary_point(int j) const { return unit(theta_[j]) * r_[j]; }

  StarSet scaled(double lambda) const;

  std::string to_csv() const;

 private:
  HomWeight w_;
  std::vector<double> r_;
  std::vector<double> theta_;
  std::vector<double> q_;
  std::vector<double> wa_;
  double cap_;
};

/// w(E_j) quadrature weights and mean-zero projection on the set's own grid.
std::vector<double> project_mean_zero(const HomWeight& w, int n_theta, std::vector<double> eta);

/// (1/D) sum_j q_j w(theta_j) on an n-point grid: the quadrature-consistent
/// w(B1 ∩ Σ).
double discrete_unit_ball_volume(const HomWeight& w, int n_theta);
double discrete_c_star(const HomWeight& w, int n_theta);

double weighted_volume(const StarSet& e);
double weighted_perimeter(const StarSet& e);

struct MeasureReport {
  double w_volume;
  double w_perimeter;
  double deficit;
  double r_eq;
};

MeasureReport deficit(const StarSet& e);

/// Open interval of the ray {t u : t > 0} inside B_r(x0); nullopt when empty.
std::optional<std::pair<double, double>> ray_ball_interval(Vec2 u, Vec2 x0, double r);

/// w(E Δ (B_r(x0) ∩ Σ)) by per-ray interval algebra. Accepts any x0.
double symdiff_with_ball_general(const StarSet& e, Vec2 x0, double r);
/// As above but restricted to |x0| < r (unsupported_translation otherwise).
double symdiff_with_ball(const StarSet& e, Vec2 x0, double r);

struct AsymmetryResult {
  double value;
  Vec2 x0;
};

/// Translations restricted to the cone's line subspace; golden-section on
/// |t| <= 2 r_eq when the cone is a half-plane.
AsymmetryResult asymmetry(const StarSet& e);

/// Integral of g w dH^1 over the boundary curve inside the open cone.
double boundary_weighted_integral(const StarSet& e, const std::function<double(Vec2)>& g);

/// Largest change of (volume, perimeter) when n_theta is doubled.
double resolution_self_check(const HomWeight& w, int n_theta, const std::function<double(double)>& r_of_theta);

/// Cell bitmask on a uniform grid. Cell (i, j) has center
/// (x0 + (i + 1/2) h, y0 + (j + 1/2) h).
class GridSet {
 public:
  GridSet(Cone cone, double x0, double y0, double h, int nx, int ny, std::vector<std::uint8_t> cells);

  static GridSet rasterize(const Cone& cone, double x0, double y0, double h, int nx, int ny,
                           const std::function<bool(Vec2)>& inside);

  const Cone& cone() const { return cone_; }
  double h() const { return h_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double x0() const { return x0_; }
  double y0() const { return y0_; }
  bool occupied(int i, int j) const {
    return i >= 0 && j >= 0 && i < nx_ && j < ny_ && cells_[static_cast<std::size_t>(j) * nx_ + i] != 0;
  }
  Vec2 center(int i, int j) const { return {x0_ + (i + 0.5) * h_, y0_ + (j + 0.5) * h_}; }
  int count() const;
  /// Midpoint rule for w(E).
  double weighted_volume(const HomWeight& w) const;

 private:
  Cone cone_;
  double x0_, y0_, h_;
  int nx_, ny_;
  std::vector<std::uint8_t> cells_;
};

/// True iff the occupied cells form one 4-connected component.
bool is_indecomposable(const GridSet& g);

}  // namespace isocone
