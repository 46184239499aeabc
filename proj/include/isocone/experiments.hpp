#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isocone/analysis.hpp"
#include "isocone/coupling.hpp"
#include "isocone/geometry.hpp"

namespace isocone {

/// Fixed-format float: 12 significant digits, "nan"/"inf" spelled out.
std::string format_number(double v);

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  int n_theta = 4096;
  double mesh_h = 0.02;
  int n_slope = 128;
  double eval_h = 0.01;
};

struct SweepRow {
  double param = 0.0;
  std::string label;
  double delta_w = 0.0;
  double asym = 0.0;
  /// asym / sqrt(delta_w); empty when delta_w <= 1e-9.
  std::optional<double> ratio;
  std::optional<RatioTable> coupling;
};

struct SweepResult {
  std::vector<SweepRow> rows;  ///< sorted by param
  RunManifest manifest;
  /// Largest defined ratio; empty when no row has one.
  std::optional<double> max_ratio;
  /// Every row with delta_w <= 1e-8 has asym <= 1e-4.
  bool uniqueness_ok = true;
  /// No defined ratio exceeds the configured ceiling.
  bool within_c_max = true;

  /// Header "param,delta_w,asym,ratio"; undefined ratios are empty fields.
  std::string csv() const;
  /// Header "param,hessian,boundary,weight"; rows without coupling data are skipped.
  std::string coupling_csv() const;
};

/// eta = cos(m * theta^) before projection; theta^ as in StarSet::perturbed_ball.
struct EtaSpec {
  int m = 4;
};

/// r = 1 + eps * eta~ on the weight's arc grid. Throws invalid_argument when
/// eta~ vanishes after the mean-zero projection.
StarSet perturbed_member(const HomWeight& w, int n_theta, const EtaSpec& eta, double eps);

struct SharpnessResult {
  SweepResult sweep;
  /// Least-squares fit log A = slope * log delta + intercept.
  double slope = 0.0;
  double intercept = 0.0;
  /// (max - min) / mean of delta / eps^2 over the list.
  double delta_eps2_spread = 0.0;
};

/// Requires at least 3 distinct eps in (0, 0.25] and delta_w > 1e-9 on each.
SharpnessResult sharpness_sweep(const HomWeight& w, int n_theta, const EtaSpec& eta, std::vector<double> eps);

enum class MemberKind { dilated_ball, perturbed_ball, sector_bump };

/// dilated_ball: a = radius. perturbed_ball: a = eps, m = mode.
/// sector_bump: r = 1 + a cos^2(pi (theta^ - c) / width) on |theta^ - c| < width/2.
struct CorpusMember {
  MemberKind kind = MemberKind::dilated_ball;
  double a = 1.0;
  int m = 0;
  double c = 0.5;
  double width = 0.2;

  std::string label() const;
  StarSet build(const HomWeight& w, int n_theta) const;
};

/// 5 dilated balls, 20 perturbed balls (m in {1,2,3,4,6}, eps in
/// {0.02,0.05,0.1,0.2}), 5 sector bumps (c in {0.2,...,0.8}).
std::vector<CorpusMember> default_corpus();

struct StabilityOptions {
  int n_theta = 4096;
  /// Ceiling on asym / sqrt(delta_w); infinite disables the check.
  double c_max = 1e300;
  /// Also run the coupling pipeline (weighted mode) on members with delta_w > 1e-9.
  bool coupling = false;
  CouplingResolution resolution;
  Box coupling_q{0.2, 0.6, 0.2, 0.6};
};

/// Members are evaluated in parallel; param is the corpus index.
SweepResult stability_sweep(const HomWeight& w, const std::vector<CorpusMember>& corpus, const StabilityOptions& opt);

struct OpeningRow {
  double opening;
  double max_ratio;
};

/// Unweighted sectors of the given openings; for each, the largest
/// asym / sqrt(delta) over perturbed balls (m in {1,2,4}, eps in {0.05,0.1,0.2}).
std::vector<OpeningRow> opening_sweep(const std::vector<double>& openings, int n_theta);

struct DiagDirection {
  std::string name;  ///< "C0", "E0", "diag+", "diag-"
  char kind;         ///< 'C', 'E' or 'D'
  Vec2 v;
};

/// Bases of the cone's C and E subspaces plus the two diagonals.
std::vector<DiagDirection> diagnostic_directions(const HomWeight& w);

struct DiagRow {
  std::string direction;
  double t;
  double growth;
  double separation;
};

struct DiagFit {
  DiagDirection direction;
  /// Least-squares slopes through the origin of value against t.
  double growth_slope;
  double separation_slope;
  /// max |value - slope t| / max |value| (0 when the column vanishes).
  double growth_nonlinearity;
  double separation_nonlinearity;
};

struct DiagTable {
  std::vector<DiagRow> rows;
  std::vector<DiagFit> fits;

  /// Header "direction,t,growth,separation".
  std::string csv() const;
};

struct AmgmAudit {
  std::size_t samples = 0;
  std::size_t violations = 0;
  /// Largest (lhs - rhs) / max(1, |rhs|); negative when every sample holds strictly.
  double worst_margin = -1e300;
};

/// Random admissible inputs: m in [1, 6] entries, sum lambda in [1, 10],
/// c in [0.1, 3.1], x rescaled into sum lambda_i x_i <= c s.
AmgmAudit amgm_random_audit(std::size_t samples, std::uint64_t seed);

/// Q defaults to [0.2, 0.4]^2; every t |v| must satisfy the separation
/// precondition |xi| <= dist(Q, boundary)/2.
DiagTable translation_diagnostics(const HomWeight& w, const std::vector<double>& ts, Box q = {0.2, 0.4, 0.2, 0.4},
                                  int n = 512);

}  // namespace isocone
