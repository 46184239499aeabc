#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "isocone/geometry.hpp"
#include "json.hpp"

namespace isocone {

inline constexpr const char* kVersion = "isocone 1.0.0";

/// Recognized verbs, in help order.
const std::vector<std::string>& known_verbs();

struct ResolutionSpec {
  int n_theta = 4096;
  double mesh_h = 0.02;
  int n_slope = 128;  ///< slope rings; angles are 2 * n_slope
  double eval_h = 0.01;

  bool operator==(const ResolutionSpec&) const = default;
};

/// Cone, weight and set stay in their JSON form so the config round-trips
/// exactly; parse_config validates them by building the objects once.
struct RunConfig {
  std::string verb;
  nlohmann::json cone = "quadrant";
  nlohmann::json weight = nlohmann::json::object();
  nlohmann::json set = nlohmann::json::object();
  ResolutionSpec resolution;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

/// Throws parse (with line and column) on malformed JSON, usage on an unknown
/// verb or key, invalid_argument on non-positive resolutions.
RunConfig parse_config(const std::string& text, const std::string& verb);
/// Canonical form without the output directory.
nlohmann::json to_json(const RunConfig& c);
/// FNV-1a 64 of the canonical dump, 16 hex digits.
std::string config_hash(const RunConfig& c);

Cone make_cone(const nlohmann::json& spec);
HomWeight make_weight(const RunConfig& c);
StarSet make_set(const RunConfig& c, const HomWeight& w);

using Cell = std::variant<std::monostate, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

/// Numbers with 12 significant digits; monostate cells are empty fields.
std::string to_csv(const Table& t);
/// {"columns": [...], "rows": [[...]]}; monostate and non-finite numbers become null.
nlohmann::json to_json(const Table& t);
Table table_from_json(const nlohmann::json& j);

struct RunOutcome {
  int status = 0;  ///< 0 success, 1 usage or precondition, 2 verification failure
  std::string message;
  std::vector<std::string> files;
  nlohmann::json summary = nlohmann::json::object();
};

/// Dispatches the verb, writes tables plus manifest.json into out_dir.
RunOutcome run(const RunConfig& c);

/// `isocone <verb> --config path [--out dir] [--seed n]`.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace isocone
