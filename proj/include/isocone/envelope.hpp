#pragma once

#include <functional>
#include <string>
#include <vector>

#include "isocone/cone_weight.hpp"

namespace isocone {

/// Compact convex body K of admissible slopes: a polygon (counterclockwise
/// vertices; two vertices give a segment) or closure(B_rho ∩ Σ).
class SlopeBody {
 public:
  static SlopeBody polygon(std::vector<Vec2> ccw_vertices);
  static SlopeBody sector_disk(const Cone& cone, double rho = 1.0);
  static SlopeBody square(double half_side = 1.0);

  bool is_polygon() const { return !vertices_.empty(); }
  bool is_segment() const { return vertices_.size() == 2; }
  const std::vector<Vec2>& vertices() const { return vertices_; }
  const Cone& cone() const { return cone_; }
  double rho() const { return rho_; }

  /// sup over K of v.x.
  double support(Vec2 v) const;
  bool contains(Vec2 xi, double tol = 1e-12) const;
  /// Nearest point of K.
  Vec2 project(Vec2 p) const;
  double distance(Vec2 p) const { return norm(p - project(p)); }
  /// Generators of N(xi, K); empty for interior points.
  std::vector<Vec2> normal_cone(Vec2 xi, double tol = 1e-9) const;
  double area() const;

 private:
  SlopeBody(Cone cone) : cone_(cone) {}
  std::vector<Vec2> vertices_;
  Cone cone_;
  double rho_ = 0.0;
};

double support_function(const SlopeBody& k, Vec2 v);

/// Slope samples xi_m. Sector-disks use a polar grid with both rays and the
/// arc; polygons use a square lattice plus boundary samples.
struct SlopeGrid {
  std::vector<double> x, y;     ///< structure-of-arrays slope coordinates
  std::vector<double> cell;     ///< area element attached to each sample
  double spacing = 0.0;         ///< largest gap between neighbouring samples
  std::size_t size() const { return x.size(); }
  Vec2 at(std::size_t m) const { return {x[m], y[m]}; }
};

/// Sector-disk: n_radial rings and n_angular angles (n_angular points on the
/// closed arc, periodic for the whole plane). Polygon: lattice spacing
/// diameter / n_radial.
SlopeGrid make_slope_grid(const SlopeBody& k, int n_radial, int n_angular);

struct RestrictedConjugate {
  std::vector<double> a;  ///< a(xi_m) = min_y (u(y) - xi_m . y)
  std::vector<int> arg;   ///< attaining sample index
};

/// Optional continuous refinement of min_y (u(y) - xi . y) started from the
/// best sample; returns a value <= current or current itself.
using ConjugateRefiner = std::function<double(int sample, Vec2 xi, double current)>;

RestrictedConjugate restricted_conjugate(const std::vector<Vec2>& pts, const std::vector<double>& u,
                                         const SlopeGrid& grid, const ConjugateRefiner& refine = {});

struct EvalBox {
  double x0, y0;  ///< lower-left node
  double h;
  int nx, ny;
  Vec2 node(int i, int j) const { return {x0 + i * h, y0 + j * h}; }
};

/// phi(x) = max_m (a_m + xi_m . x) on the nodes of an evaluation box.
struct EnvelopeField {
  EvalBox box;
  std::vector<double> phi;
  std::vector<int> arg;  ///< maximizing slope index, lowest on ties
  const SlopeGrid* grid = nullptr;

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * box.nx + i; }
  Vec2 xi_star(int i, int j) const { return grid->at(arg[index(i, j)]); }
  /// Second differences of phi (axes and mixed); valid for interior nodes.
  Sym2 hessian(int i, int j) const;
  /// Central differences of phi; valid for interior nodes.
  Vec2 gradient(int i, int j) const;
  /// Envelope value at an arbitrary point (exact max over slopes).
  double value_at(Vec2 p, const RestrictedConjugate& conj) const;

  std::string to_csv() const;
};

EnvelopeField k_envelope(const RestrictedConjugate& conj, const SlopeGrid& grid, const EvalBox& box);

/// Sub-grid maximizer of a(xi) + xi . x: least-squares quadratic through a
/// 5x5 spread of slope samples around xi*, its vertex projected onto K. Falls back to
/// xi* when the fit is not concave or the vertex leaves the stencil.
struct RefinedGradient {
  std::vector<Vec2> grad;
  std::vector<double> phi;
};
RefinedGradient refine_gradient(const EnvelopeField& f, const RestrictedConjugate& conj, const SlopeBody& k);
/// Same refinement at arbitrary points (exact argmax first).
RefinedGradient envelope_gradient_at(const std::vector<Vec2>& xs, const RestrictedConjugate& conj, const SlopeGrid& g,
                                     const SlopeBody& k);

struct C11Report {
  double lip_grad;             ///< max |xi*(p) - xi*(q)| / |p - q| over grid neighbours
  double range_hausdorff;      ///< Hausdorff distance between {xi*} and the slope samples
  double convexity_violation;  ///< max(0, -min second difference) over axes and diagonals
};

/// `mask` (optional, size nx*ny) restricts the nodes whose slopes form the
/// gradient cloud; empty means every node.
C11Report check_c11(const EnvelopeField& f, const std::vector<char>& mask = {});

/// Largest distance from any slope sample to the nearest member of `cloud`.
double coverage_distance(const SlopeGrid& grid, const std::vector<int>& cloud);

struct ContactData {
  std::vector<int> contact;        ///< indices of S_xi
  std::vector<Vec2> normal_cone;   ///< generators of N(xi, K)
  bool witness_found = false;
  std::vector<std::pair<int, double>> lambda;  ///< (contact index, weight)
  std::vector<double> mu;                      ///< normal-cone coefficients
  Sym2 H;                                      ///< sum lambda_i hess(s_i)
};

/// Contact set within tol_contact (relative to max u - min u; <= 0 picks the
/// default 1e-8) and a Caratheodory witness x - sum lambda_i s_i ∈ N(xi, K)
/// over at most three columns. A missing witness is reported, not thrown.
ContactData contact_data(const std::vector<Vec2>& pts, const std::vector<double>& u,
                         const std::vector<Sym2>& hess, const SlopeBody& k, Vec2 xi, Vec2 x,
                         double tol_contact = -1.0);

}  // namespace isocone
