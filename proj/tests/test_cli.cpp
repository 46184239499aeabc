#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "isocone/cli.hpp"
#include "isocone/error.hpp"

using namespace isocone;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("isocone_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream s;
  s << is.rdbuf();
  return s.str();
}

struct Invocation {
  int status;
  std::string out, err;
};

Invocation invoke(const std::string& verb, const std::string& config, const fs::path& dir,
                  std::vector<std::string> extra = {}) {
  const fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << config;
  std::vector<std::string> args{"isocone", verb, "--config", cfg.string(), "--out", (dir / "out").string()};
  args.insert(args.end(), extra.begin(), extra.end());
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int s = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {s, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

const char* kBall = R"({"cone": "quadrant", "weight": {"monomial": [1, 1]}, "set": {"type": "ball"}})";

}  // namespace

TEST_CASE("measure on the unit ball") {
  const fs::path d = scratch("measure");
  const Invocation r = invoke("measure", kBall, d);
  CHECK(r.status == 0);
  const auto csv = lines(slurp(d / "out" / "measure.csv"));
  REQUIRE(csv.size() == 2);
  CHECK(csv[0] == "w_volume,w_perimeter,delta_w,r_eq,asym,x0_1,x0_2");
  std::istringstream row(csv[1]);
  std::string cell;
  for (int i = 0; i < 3; ++i) std::getline(row, cell, ',');
  CHECK(std::abs(std::stod(cell)) <= 1e-9);
  const nlohmann::json m = nlohmann::json::parse(slurp(d / "out" / "manifest.json"));
  CHECK(m["version"] == kVersion);
  CHECK(m["status"] == "ok");
  CHECK(m["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("check-amgm rejects an inadmissible input") {
  const fs::path d = scratch("amgm");
  const Invocation r = invoke("check-amgm", R"({"params": {"lambda": [1, 1], "x": [2, 1], "c": 1}})", d);
  CHECK(r.status == 1);
  CHECK(r.err.find("inadmissible input") != std::string::npos);
}

TEST_CASE("sweep on the default corpus is deterministic") {
  const char* cfg = R"({"cone": "quadrant", "weight": {"monomial": [1, 1]}, "params": {"corpus": "default"}})";
  const fs::path a = scratch("sweep_a"), b = scratch("sweep_b");
  REQUIRE(invoke("sweep", cfg, a).status == 0);
  REQUIRE(invoke("sweep", cfg, b).status == 0);
  const auto csv = lines(slurp(a / "out" / "sweep.csv"));
  CHECK(csv.size() == 31);
  CHECK(csv[0] == "param,delta_w,asym,ratio");
  for (const char* f : {"sweep.csv", "members.csv", "manifest.json"}) CHECK(slurp(a / "out" / f) == slurp(b / "out" / f));
}

TEST_CASE("verification failures exit with status 2") {
  const fs::path d = scratch("verify");
  // The worked 1-D ratio is about 1.271, above a ceiling of 1.
  const Invocation r = invoke("check-1d", R"({"params": {"intervals": [[0, 0.8]], "l": 1, "gamma": 2, "c_gamma": 1}})", d);
  CHECK(r.status == 2);
  const nlohmann::json m = nlohmann::json::parse(slurp(d / "out" / "manifest.json"));
  CHECK(m["status"] == "verification failure");
  CHECK(invoke("check-1d", R"({"params": {"intervals": [[0, 0.8]], "l": 1, "gamma": 2, "c_gamma": 1.3}})", d).status == 0);
}

TEST_CASE("usage and parse errors exit with status 1") {
  const fs::path d = scratch("usage");
  CHECK(invoke("frobnicate", kBall, d).status == 1);
  const Invocation bad = invoke("measure", "{\n  \"cone\": \"quadrant\",\n  \"set\": {\"type\": }\n}", d);
  CHECK(bad.status == 1);
  CHECK(bad.err.find("line 3") != std::string::npos);
  CHECK(invoke("measure", R"({"cone": "quadrant", "colour": 1})", d).status == 1);
  CHECK(invoke("measure", R"({"resolution": {"n_theta": 0}})", d).status == 1);
  CHECK(invoke("measure", R"({"verb": "sweep"})", d).status == 1);

  std::vector<std::string> args{"isocone", "measure"};
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  CHECK(cli_main(2, argv.data(), out, err) == 1);
}

TEST_CASE("unwritable output directory") {
  RunConfig c = parse_config(kBall, "measure");
  c.out_dir = "/proc/isocone-not-writable";
  CHECK_THROWS_AS(run(c), Error);
}

TEST_CASE("config round-trips and hashes") {
  const RunConfig c = parse_config(R"({"cone": {"angle_lo": 0, "angle_hi": 1.2}, "weight": {"monomial": [0.5, 0]},
      "set": {"type": "perturbed", "eps": 0.1, "m": 3}, "resolution": {"n_theta": 2048, "eval_h": 0.02},
      "params": {"c_max": 3}, "seed": 11})",
                                   "sweep");
  CHECK(c.resolution.n_theta == 2048);
  CHECK(c.resolution.mesh_h == 0.02);
  CHECK(c.seed == 11);
  const RunConfig back = parse_config(to_json(c).dump(), "sweep");
  CHECK(back == c);
  CHECK(config_hash(back) == config_hash(c));
  RunConfig other = c;
  other.seed = 12;
  CHECK(config_hash(other) != config_hash(c));
  // The output directory is not part of the hash.
  other = c;
  other.out_dir = "elsewhere";
  CHECK(config_hash(other) == config_hash(c));
}

TEST_CASE("seed override is recorded") {
  const fs::path d = scratch("seed");
  REQUIRE(invoke("check-amgm", R"({"params": {"samples": 1000}, "seed": 1})", d, {"--seed", "5"}).status == 0);
  const nlohmann::json m = nlohmann::json::parse(slurp(d / "out" / "manifest.json"));
  CHECK(m["seed"] == 5);
  CHECK(m["config"]["seed"] == 5);
}

TEST_CASE("table emission") {
  const Table empty{{"param", "delta_w", "asym", "ratio"}, {}};
  CHECK(to_csv(empty) == "param,delta_w,asym,ratio\n");

  const Table t{{"a", "b", "c"}, {{Cell{0.1}, Cell{}, Cell{std::string("x")}}, {Cell{1e-300}, Cell{2.0 / 3.0}, Cell{-4.0}}}};
  CHECK(to_csv(t) == "a,b,c\n0.1,,x\n1e-300,0.666666666667,-4\n");
  const Table back = table_from_json(nlohmann::json::parse(to_json(t).dump()));
  CHECK(back.columns == t.columns);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) CHECK(back.rows[i] == t.rows[i]);
}

TEST_CASE("json output format") {
  const fs::path d = scratch("json");
  REQUIRE(invoke("sharpness", R"({"cone": "quadrant", "weight": {"monomial": [1, 1]}, "resolution": {"n_theta": 1024},
      "params": {"format": "json"}})",
                 d)
              .status == 0);
  const nlohmann::json j = nlohmann::json::parse(slurp(d / "out" / "sweep.json"));
  CHECK(j["columns"] == nlohmann::json({"param", "delta_w", "asym", "ratio"}));
  CHECK(j["rows"].size() == 4);
}

TEST_CASE("remaining verbs run") {
  const fs::path d = scratch("verbs");
  CHECK(invoke("diag", R"({"cone": "quadrant", "weight": {"monomial": [1, 0]}})", d).status == 0);
  CHECK(lines(slurp(d / "out" / "diag.csv")).front() == "direction,t,growth,separation");
  CHECK(invoke("check-fmp", "{}", d).status == 0);
  CHECK(invoke("check-1d", R"({"params": {"family": {"gamma": 0, "ls": [1], "step": 0.25, "top": 2, "max_parts": 2}}})", d)
            .status == 0);
  CHECK(invoke("envelope", R"({"cone": "whole_plane", "resolution": {"n_slope": 32, "eval_h": 0.1},
      "params": {"body": {"type": "square", "half_side": 0.5}, "sample_n": 21}})",
               d)
            .status == 0);
  CHECK(invoke("envelope", R"({"cone": "whole_plane", "params": {"field": "cubic"}})", d).status == 1);
}

TEST_CASE("couple writes the chain and ratio tables") {
  const fs::path d = scratch("couple");
  const Invocation r = invoke("couple", R"({"cone": "quadrant", "weight": {"monomial": [1, 1]},
      "set": {"type": "perturbed", "eps": 0.1, "m": 4},
      "resolution": {"n_theta": 2048, "mesh_h": 0.04, "n_slope": 64, "eval_h": 0.02}})",
                              d);
  CHECK(r.status == 0);
  CHECK(lines(slurp(d / "out" / "chain.csv")).front() == "image,det,amgm,local,terminal,tol,ordered");
  CHECK(lines(slurp(d / "out" / "ratios.csv")).front() == "hessian,boundary,weight");
  const nlohmann::json m = nlohmann::json::parse(slurp(d / "out" / "manifest.json"));
  CHECK(m["summary"]["chain_ordered"] == true);
}
