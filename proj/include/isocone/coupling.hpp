#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "isocone/analysis.hpp"
#include "isocone/envelope.hpp"
#include "isocone/geometry.hpp"
#include "isocone/pde.hpp"

namespace isocone {

struct CouplingResolution {
  int n_theta = 4096;    ///< boundary samples of the set
  double mesh_h = 0.02;  ///< target triangle diameter
  double eval_h = 0.01;  ///< envelope evaluation spacing
  int n_radial = 128;    ///< slope rings (lattice divisions for polygons)
  int n_angular = 256;   ///< slope angles
  int sample_level = 2;  ///< barycentric subdivisions per triangle for u samples
};

/// Weighted mode uses K = closure(B1 ∩ Σ); anisotropic mode takes K and an
/// unweighted set.
struct CouplingMode {
  std::optional<SlopeBody> anisotropic;
  static CouplingMode weighted() { return {}; }
  static CouplingMode with_body(SlopeBody k) { return {std::move(k)}; }
};

/// Per-node data of the evaluation grid.
struct CouplingNode {
  double cell = 0.0;    ///< Lebesgue measure of E ∩ cell
  double cell_w = 0.0;  ///< w-measure of E ∩ cell
  bool near_cone = false;
  Vec2 grad{0, 0};  ///< refined ∇φ
  Sym2 hess{0, 0, 0};
};

struct CouplingReport {
  CouplingReport(StarSet s, SlopeBody k) : set(std::move(s)), K(std::move(k)) {}
  bool anisotropic = false;
  StarSet set;  ///< rescaled input
  double scale = 1.0;
  SlopeBody K;
  TriMesh mesh;
  NodalField u;
  std::shared_ptr<const SlopeGrid> grid;
  RestrictedConjugate conj;
  EnvelopeField phi;
  std::vector<CouplingNode> nodes;

  double delta = 0.0;  ///< δ_w (weighted) or anisotropic deficit
  double perimeter = 0.0, volume = 0.0, b_E = 0.0;
  double slope_spacing = 0.0, h = 0.0, eval_h = 0.0;
  double hessian_l1 = 0.0;
  double boundary_term = 0.0;
  double sup_violation = 0.0;            ///< nodes farther than eval_h from ∂Σ
  double sup_violation_near_cone = 0.0;  ///< excluded nodes, disclosed; NaN when none
  double range_hausdorff = 0.0;
  C11Report c11{};
  int hypothesis_flags = 0;  ///< interior slopes touching only FREE boundary samples
  int interior_slopes = 0;
};

/// Rescales E to w(E) = w(B1 ∩ Σ) (|E| = |K| in anisotropic mode), solves the
/// Neumann problem, and evaluates the K-envelope of the reconstructed u.
CouplingReport build_coupling(const StarSet& set, const CouplingMode& mode, const CouplingResolution& res = {});

/// ∫_{E∩Q} |w(∇φ)^{1/α} − w^{1/α}| dx; Q must lie inside the open cone.
double weight_term(const CouplingReport& r, const Box& q);

struct RatioTable {
  bool anisotropic = false;
  double hessian = 0.0;   ///< hessian_l1 / δ^{1/2}, or hessian_l1 / (b_E |E|)
  double boundary = 0.0;  ///< boundary_term / δ
  double weight = 0.0;    ///< weight_term(Q) / δ^{1/2}
};

/// Throws minimizer_degenerate when δ <= 1e-10 in weighted mode.
RatioTable verify_coupling_estimates(const CouplingReport& r, const Box& q);

struct ChainRecord {
  double image = 0.0;     ///< w(∇φ(E)) from covered slope cells
  double det = 0.0;       ///< ∫ det(∇²φ⁺) w(∇φ)
  double amgm = 0.0;      ///< ∫ (Δφ⁺/2)² (w(∇φ)/w) w
  double local = 0.0;     ///< ∫ ((Δφ⁺ + α q)/D)^D w
  double terminal = 0.0;  ///< (b_E/D)^D w(E) = (1+δ)^D w(B1∩Σ) up to quadrature
  double tol = 0.0;
  bool ordered = false;
  std::string diagnostic;
  double max_relative_gap() const;
};

/// Requires weighted mode. tol = c_tol (h + slope spacing) terminal.
ChainRecord abp_chain_check(const CouplingReport& r, double c_tol = 1.0);

/// Per_K(E) and |E| over the boundary polygon of a star set.
double anisotropic_perimeter(const StarSet& e, const SlopeBody& k);
double polygon_area(const StarSet& e);
/// Per_K(E) / (2 |K|^{1/2} |E|^{1/2}) − 1.
double anisotropic_deficit(const StarSet& e, const SlopeBody& k);

bool star_contains(const StarSet& e, Vec2 x, double tol = 1e-12);

}  // namespace isocone
