#pragma once

#include <stdexcept>
#include <string>

namespace isocone {

enum class Errc {
  invalid_argument,
  outside_cone,
  degenerate_point,
  inadmissible_input,
  unsupported_translation,
  minimizer_degenerate,
  search_space_too_large,
  mesh_infeasible,
  singular_system,
  compatibility,
  hypothesis_failure,
  io,
  parse,
  usage,
};

const char* to_string(Errc code);

/// Library error. The code lets callers (the CLI in particular) map failures
/// to exit statuses without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::outside_cone: return "point outside closed cone";
    case Errc::degenerate_point: return "degenerate point";
    case Errc::inadmissible_input: return "inadmissible input";
    case Errc::unsupported_translation: return "unsupported translation";
    case Errc::minimizer_degenerate: return "minimizer-degenerate";
    case Errc::search_space_too_large: return "search space too large";
    case Errc::mesh_infeasible: return "mesh infeasible";
    case Errc::singular_system: return "singular system";
    case Errc::compatibility: return "compatibility violation";
    case Errc::hypothesis_failure: return "hypothesis failure";
    case Errc::io: return "i/o error";
    case Errc::parse: return "parse error";
    case Errc::usage: return "usage error";
  }
  return "error";
}

}  // namespace isocone
