#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "isocone/vec2.hpp"

namespace isocone {

inline constexpr double kPi = 3.14159265358979323846;

/// Planar convex cone stored as the angular sector [angle_lo, angle_hi].
/// The whole plane is a separate periodic variant used by anisotropic runs.
class Cone {
 public:
  /// Proper wedge (opening < pi) or half-plane (opening == pi).
  Cone(double angle_lo, double angle_hi);

  static Cone quadrant() { return Cone(0.0, kPi / 2); }
  static Cone upper_half_plane() { return Cone(0.0, kPi); }
  static Cone whole_plane();

  double angle_lo() const { return lo_; }
  double angle_hi() const { return hi_; }
  double opening() const { return hi_ - lo_; }
  bool is_whole_plane() const { return whole_; }
  bool is_half_plane() const { return !whole_ && half_; }
  /// Number of line directions contained in the cone.
  int line_count() const { return whole_ ? 2 : (half_ ? 1 : 0); }

  Vec2 ray_lo() const { return unit(lo_); }
  Vec2 ray_hi() const { return unit(hi_); }
  /// Unit normals pointing into the cone from each boundary ray.
  Vec2 inward_normal_lo() const { return perp(ray_lo()); }
  Vec2 inward_normal_hi() const { return -perp(ray_hi()); }

  /// Angle of x measured from angle_lo, in (-pi, pi].
  double relative_angle(Vec2 x) const;
  bool contains(Vec2 x, double tol = 1e-12) const;
  bool contains_interior(Vec2 x) const;
  /// Euclidean distance from x (inside the cone) to the cone boundary.
  double distance_to_boundary(Vec2 x) const;

  /// Uniform arc grid: n points with both endpoints for sectors; n points
  /// on [lo, lo + 2pi) for the periodic whole plane.
  std::vector<double> arc_grid(int n) const;

 private:
  Cone() = default;
  double lo_ = 0.0;
  double hi_ = 0.0;
  bool half_ = false;
  bool whole_ = false;
};

/// w(x) = x^A1 * y^A2 (a zero exponent contributes the factor 1).
struct Monomial {
  double a1 = 0.0;
  double a2 = 0.0;
};

/// w(x) = |x|^alpha * p(theta), p sampled on the cone's arc grid and
/// interpolated linearly in angle.
struct SphericalProfile {
  std::vector<double> samples;
};

class HomWeight {
 public:
  HomWeight(const Cone& cone, Monomial m);
  HomWeight(const Cone& cone, double alpha, SphericalProfile p);

  static HomWeight unweighted(const Cone& cone) { return HomWeight(cone, Monomial{0.0, 0.0}); }

  const Cone& cone() const { return cone_; }
  double alpha() const { return alpha_; }
  /// Effective dimension 2 + alpha.
  double D() const { return 2.0 + alpha_; }
  bool is_monomial() const { return std::holds_alternative<Monomial>(form_); }
  const Monomial* monomial() const { return std::get_if<Monomial>(&form_); }
  const SphericalProfile* profile() const { return std::get_if<SphericalProfile>(&form_); }

  /// Value only; no cone-membership check (callers on hot paths pass points
  /// they already know are admissible).
  double value(Vec2 x) const;
  /// Angular profile w(cos t, sin t).
  double on_arc(double angle) const;
  /// w^{1/alpha}; for alpha == 0 returns 1.
  double root(Vec2 x) const;

  /// Closed-form w(B1 ∩ Σ) for monomials, fine trapezoid otherwise.
  double unit_ball_volume() const;
  /// D * w(B1 ∩ Σ)^{1/D} from unit_ball_volume().
  double c_star() const;

 private:
  Cone cone_;
  double alpha_;
  std::variant<Monomial, SphericalProfile> form_;
};

struct ValueGrad {
  double value;
  Vec2 grad;
};

/// Throws outside_cone when x is not in the closed cone.
ValueGrad weight_eval_grad(const HomWeight& w, Vec2 x);

/// RHS minus LHS of alpha (w(z)/w(x))^{1/alpha} <= grad w(x).z / w(x).
double check_concavity_condition(const HomWeight& w, Vec2 x, Vec2 z);

/// Largest relative error of w(tx) = t^alpha w(x) over t in {0.5, 2, 7}
/// at a fixed sample of cone points.
double homogeneity_error(const HomWeight& w);

struct AdmissionReport {
  double homogeneity_error;
  double worst_concavity_residual;
  bool admissible;
};

/// Samples 10^4 interior pairs (fixed seed) against the concavity condition.
AdmissionReport admission_check(const HomWeight& w, std::uint64_t seed = 1);
/// Throws inadmissible_input when admission_check fails.
void require_admissible(const HomWeight& w);

struct Subspaces {
  std::vector<Vec2> L;
  std::vector<Vec2> C;
  std::vector<Vec2> E;
};

Subspaces decompose_subspaces(const Cone& cone, const HomWeight& w);

/// One-homogeneous v sampled on cone.arc_grid(values.size()).
class ConcaveHomFn {
 public:
  ConcaveHomFn(const Cone& cone, std::vector<double> values);

  /// Samples f(unit(theta)) on an n-point arc grid.
  template <class F>
  static ConcaveHomFn sample(const Cone& cone, int n, F&& f) {
    std::vector<double> vals;
    vals.reserve(n);
    for (double t : cone.arc_grid(n)) vals.push_back(f(unit(t)));
    return ConcaveHomFn(cone, std::move(vals));
  }

  const Cone& cone() const { return cone_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& angles() const { return angles_; }
  double on_arc(double angle) const;
  double operator()(Vec2 x) const;

 private:
  Cone cone_;
  std::vector<double> values_;
  std::vector<double> angles_;
};

ConcaveHomFn pointwise_min(const ConcaveHomFn& a, const ConcaveHomFn& b);
/// v∘R^{-1} on the rotated cone R(Σ).
ConcaveHomFn rotate(const ConcaveHomFn& v, double angle);

/// Worst sampled value of
/// [sin t v(g(-s)) + sin s v(g(t))] / sin(s+t) - v(g(0)) over grid triples.
/// All triples are used when there are at most n_triples of them; otherwise
/// n_triples random ones (fixed seed). Triples with s + t >= pi are skipped.
double spherical_concavity_check(const ConcaveHomFn& v, std::size_t n_triples);

/// Smallest nonnegative concave 1-homogeneous majorant of v on the inner
/// cone, sampled on v's grid. Vanishes on the boundary rays of v's cone.
ConcaveHomFn zero_trace_extension(const ConcaveHomFn& v, const Cone& inner);

}  // namespace isocone
