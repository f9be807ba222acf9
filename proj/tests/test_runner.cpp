#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qhdboot/error.hpp"
#include "qhdboot/runner.hpp"

using namespace qhdboot;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({
  "schema_version": 1,
  "seed": 11,
  "model": {"kind": "uniform", "lower": 0.0, "upper": 1.0},
  "functional": {"kind": "avar", "alpha": 0.9},
  "scheme": "efron",
  "n_ladder": [100, 200, 400],
  "R": 100,
  "B": 100,
  "grid_points": 40,
  "tolerance": 0.5
})";

bool mentions(const std::vector<Diagnostic>& d, const std::string& key, Diagnostic::Severity s) {
  for (const auto& x : d) {
    if (x.severity == s && x.key.find(key) != std::string::npos) return true;
  }
  return false;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qhdboot_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string with(const std::string& patch) {
  auto j = nlohmann::json::parse(kSmall);
  j.merge_patch(nlohmann::json::parse(patch));
  return j.dump();
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("valid config has no errors") {
  const auto d = validate_config_text(kSmall);
  CHECK_FALSE(has_errors(d));
  CHECK(d.empty());
}

TEST_CASE("schema errors name their key") {
  using S = Diagnostic::Severity;
  auto d = validate_config_text(with(R"({"model": {"kind": "ar1", "rho": 0.5}, "scheme": "blockwise", "gamma": 0.7})"));
  CHECK(has_errors(d));
  CHECK(mentions(d, "gamma", S::error));
  CHECK(format_diagnostics(d).find("gamma") != std::string::npos);

  d = validate_config_text(with(R"({"functional": {"kind": "avar", "alpha": null}})"));
  CHECK(mentions(d, "alpha", S::error));

  d = validate_config_text(with(R"({"schema_version": 2})"));
  CHECK(mentions(d, "schema_version", S::error));

  d = validate_config_text("{ not json");
  CHECK(has_errors(d));

  d = validate_config_text(with(R"({"scheme": "blockwise", "gamma": 0.4})"));
  CHECK(mentions(d, "scheme", S::error));

  try {
    parse_experiment(with(R"({"R": 5})"));
    FAIL("expected ConfigInvalid");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_invalid);
    CHECK(std::string(e.what()).find("R") != std::string::npos);
  }
}

TEST_CASE("missing alpha is an error") {
  auto j = nlohmann::json::parse(kSmall);
  j["functional"].erase("alpha");
  const auto d = validate_config_text(j.dump());
  CHECK(mentions(d, "alpha", Diagnostic::Severity::error));
}

TEST_CASE("warnings") {
  using S = Diagnostic::Severity;
  auto d = validate_config_text(with(R"({"model": {"kind": "ar1", "rho": 0.5}})"));
  CHECK_FALSE(has_errors(d));
  CHECK(mentions(d, "scheme", S::warning));
  bool iid = false;
  for (const auto& x : d) iid = iid || x.message.find("i.i.d.") != std::string::npos;
  CHECK(iid);
  d = validate_config_text(with(R"({"colour": "blue"})"));
  CHECK_FALSE(has_errors(d));
  CHECK(mentions(d, "colour", S::warning));
}

TEST_CASE("parse builds the experiment") {
  const auto cfg = parse_experiment(kSmall);
  CHECK(cfg.seed == 11);
  CHECK(cfg.n_ladder == std::vector<std::size_t>{100, 200, 400});
  CHECK(cfg.replications == 100);
  CHECK(cfg.avar.alpha == 0.9);
  CHECK(cfg.scheme == Scheme::efron);
  CHECK_FALSE(cfg.dependent());
}

TEST_CASE("config hash ignores key order and whitespace") {
  const std::string a = R"({"b": 1, "a": [1, 2], "c": {"y": 2, "x": 1}})";
  const std::string b = "{\"c\":{\"x\":1,\"y\":2},\n \"a\":[1,2],\"b\":1}";
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(R"({"b": 2, "a": [1, 2], "c": {"y": 2, "x": 1}})"));
}

TEST_CASE("consistency run writes reproducible outputs") {
  const fs::path dir = scratch("consistency");
  std::ofstream(dir / "config.json") << kSmall;
  RunOptions opt;
  opt.subcommand = "consistency";
  opt.config_path = dir / "config.json";
  opt.out_dir = dir / "a";
  std::ostringstream log;
  const int code = run(opt, log);
  CHECK((code == kExitPass || code == kExitFail));
  for (const char* f : {"report.csv", "report.json", "manifest.json"}) CHECK(fs::exists(opt.out_dir / f));
  const auto manifest = nlohmann::json::parse(slurp(opt.out_dir / "manifest.json"));
  CHECK(manifest["seed"] == 11);
  CHECK(manifest["subcommand"] == "consistency");
  CHECK(manifest["config_hash"] == config_hash(kSmall));
  CHECK(manifest.contains("artifact_version"));

  opt.out_dir = dir / "b";
  std::ostringstream log2;
  CHECK(run(opt, log2) == code);
  CHECK(slurp(dir / "a" / "report.csv") == slurp(dir / "b" / "report.csv"));

  opt.out_dir = dir / "c";
  opt.seed = 12;
  std::ostringstream log3;
  run(opt, log3);
  CHECK(nlohmann::json::parse(slurp(opt.out_dir / "manifest.json"))["seed"] == 12);
  CHECK(slurp(dir / "a" / "report.csv") != slurp(dir / "c" / "report.csv"));
  fs::remove_all(dir);
}

TEST_CASE("format selects the outputs") {
  const fs::path dir = scratch("format");
  std::ofstream(dir / "config.json") << kSmall;
  RunOptions opt;
  opt.subcommand = "consistency";
  opt.config_path = dir / "config.json";
  opt.out_dir = dir / "out";
  opt.format = parse_format("csv");
  std::ostringstream log;
  run(opt, log);
  CHECK(fs::exists(opt.out_dir / "report.csv"));
  CHECK_FALSE(fs::exists(opt.out_dir / "report.json"));
  CHECK(fs::exists(opt.out_dir / "manifest.json"));
  CHECK_THROWS_AS(parse_format("xml"), Error);
  fs::remove_all(dir);
}

TEST_CASE("errors give exit code 1") {
  const fs::path dir = scratch("errors");
  std::ofstream(dir / "bad.json") << with(R"({"gamma": 0.7, "scheme": "blockwise", "model": {"kind": "ar1", "rho": 0.5}})");
  RunOptions opt;
  opt.subcommand = "consistency";
  opt.config_path = dir / "bad.json";
  opt.out_dir = dir / "out";
  std::ostringstream log;
  CHECK(run(opt, log) == kExitError);
  CHECK(log.str().find("gamma") != std::string::npos);
  opt.config_path = dir / "missing.json";
  std::ostringstream log2;
  CHECK(run(opt, log2) == kExitError);
  opt.config_path = dir / "bad.json";
  opt.subcommand = "frobnicate";
  std::ostringstream log3;
  CHECK(run(opt, log3) == kExitError);
  fs::remove_all(dir);
}

TEST_CASE("weights audit and limit sample subcommands") {
  const fs::path dir = scratch("audit");
  std::ofstream(dir / "w.json") << R"({
    "schema_version": 1, "seed": 4,
    "model": {"kind": "ar1", "rho": 0.5},
    "functional": {"kind": "avar", "alpha": 0.9},
    "scheme": "blockwise",
    "weights_audit": {"n": 20, "block_length": 3, "draws": 20000}
  })";
  RunOptions opt;
  opt.subcommand = "weights-audit";
  opt.config_path = dir / "w.json";
  opt.out_dir = dir / "w";
  std::ostringstream log;
  CHECK(run(opt, log) == kExitPass);
  for (const char* f : {"weights.csv", "audit.csv", "audit.json", "manifest.json"}) CHECK(fs::exists(opt.out_dir / f));

  std::ofstream(dir / "l.json") << R"({
    "schema_version": 1, "seed": 4,
    "model": {"kind": "uniform", "lower": 0.0, "upper": 1.0},
    "functional": {"kind": "avar", "alpha": 0.9},
    "grid_points": 50,
    "limit_sample": {"paths": 500}
  })";
  opt.subcommand = "limit-sample";
  opt.config_path = dir / "l.json";
  opt.out_dir = dir / "l";
  std::ostringstream log2;
  CHECK(run(opt, log2) == kExitPass);
  const std::string samples = slurp(opt.out_dir / "limit_samples.csv");
  CHECK(std::count(samples.begin(), samples.end(), '\n') == 501);
  fs::remove_all(dir);
}

TEST_CASE("derivative check subcommand picks the kink") {
  const fs::path dir = scratch("kink");
  std::ofstream(dir / "k.json") << R"({
    "schema_version": 1, "seed": 7,
    "model": {"kind": "uniform", "lower": 0.0, "upper": 1.0},
    "functional": {"kind": "avar", "alpha": 0.9},
    "derivative_check": {
      "direction_atoms": [0.25, 0.95], "direction_masses": [0.5, 0.5],
      "kinks": [0.9, 0.1], "n_ladder": [4, 6, 8, 10, 12, 14],
      "epsilon_base": 2.0, "tolerance": 0.005
    }
  })";
  RunOptions opt;
  opt.subcommand = "derivative-check";
  opt.config_path = dir / "k.json";
  opt.out_dir = dir / "out";
  std::ostringstream log;
  CHECK(run(opt, log) == kExitPass);
  const auto doc = nlohmann::json::parse(slurp(opt.out_dir / "derivative_check.json"));
  CHECK(doc["winning_kink"] == 0.9);
  CHECK(fs::exists(opt.out_dir / "convergence_kink_0.9.csv"));
  fs::remove_all(dir);
}

}
