#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "isocone/cone_weight.hpp"
#include "isocone/envelope.hpp"
#include "isocone/geometry.hpp"

namespace isocone {

enum class EdgeTag { free_part, cone_part };

/// Boundary edge oriented with the domain on its left.
struct BoundaryEdge {
  int a, b;
  EdgeTag tag;
};

struct TriMesh {
  Cone cone = Cone::quadrant();
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> tris;  ///< positively oriented
  std::vector<BoundaryEdge> boundary;
  double h = 0.0;          ///< largest triangle diameter
  double min_angle = 0.0;  ///< smallest interior angle, radians
  int rings = 0;

  double area() const;
  std::string vertices_csv() const;
  std::string triangles_csv() const;
};

/// Annular triangulation: ring k (k = 1..N) holds k*m + 1 points at radius
/// (k/N) r(θ) (k*m points, periodic, for the whole plane), consecutive rings
/// stitched in angle order. N grows until the largest diameter is <= target_h.
/// Throws mesh_infeasible when the smallest angle falls below 20 degrees.
TriMesh fan_triangulate(const StarSet& set, double target_h);

struct WeightedProblem {
  HomWeight w;
};
struct AnisotropicProblem {
  SlopeBody K;
};

struct NodalField {
  std::vector<double> values;
  std::vector<double> mass;  ///< ∫ w φ_i, the gauge weights
  double b_E = 0.0;
  double compatibility = 0.0;  ///< |Σ rhs| / ||rhs||_1
  double residual = 0.0;       ///< final relative residual
  int iterations = 0;
  std::string csv(const TriMesh& mesh) const;
};

/// P1 Galerkin solution of ∫ w ∇u.∇v = −b ∫ w v + ∫_FREE w v (3-point
/// edge-midpoint rule on triangles, Simpson on edges); b from the same
/// quadrature unless overridden. Gauge: weighted mean zero.
NodalField solve_neumann(const TriMesh& mesh, const WeightedProblem& p, std::optional<double> b_override = {});
/// Unweighted analogue with boundary data |ν|_{K*} on FREE edges.
NodalField solve_neumann(const TriMesh& mesh, const AnisotropicProblem& p, std::optional<double> b_override = {});

/// sqrt(∫ w |∇u_h − ∇u|^2) by the edge-midpoint rule; w may be empty (≡ 1).
double energy_error(const TriMesh& mesh, const std::vector<double>& u, const std::function<double(Vec2)>& w,
                    const std::function<Vec2(Vec2)>& grad_exact);

/// Gradient of the P1 field on triangle t.
Vec2 p1_gradient(const TriMesh& mesh, const std::vector<double>& u, int t);

}  // namespace isocone
