#include "qhdboot/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qhdboot/derivatives.hpp"
#include "qhdboot/error.hpp"
#include "qhdboot/limits.hpp"
#include "qhdboot/parallel.hpp"
#include "qhdboot/rng.hpp"

namespace qhdboot {

namespace {

using json = nlohmann::json;

const std::set<std::string> kTopKeys = {
    "schema_version", "seed", "model", "functional", "scheme", "scheme_override", "gamma",
    "block_length", "n_ladder", "R", "B", "phi_lambda", "tolerance", "omegas", "limit_paths",
    "grid_points", "lag_truncation", "mc_len", "derivative_check", "weights_audit",
    "limit_sample", "description"};

struct DerivativeCheckSection {
  std::vector<double> atoms{0.25, 0.6, 0.95};
  std::vector<double> masses{0.2, 0.3, 0.5};
  std::vector<double> kinks;  // empty: {alpha, 1 - alpha}
  std::vector<std::size_t> n_ladder{4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
  double epsilon_base = 2.0;
  double tolerance = 5e-3;
};

struct WeightsAuditSection {
  std::size_t n = 100;
  std::optional<std::size_t> block_length;
  std::size_t draws = 100000;
};

struct LimitSampleSection {
  std::size_t paths = 10000;
};

struct FullConfig {
  ExperimentConfig experiment;
  bool scheme_override = false;
  DerivativeCheckSection derivative_check;
  WeightsAuditSection weights_audit;
  LimitSampleSection limit_sample;
  json raw;
};

// Reads typed fields, recording a diagnostic instead of throwing so that one
// pass reports every problem.
class Reader {
 public:
  explicit Reader(std::vector<Diagnostic>& out) : out_(out) {}

  void error(const std::string& key, const std::string& message) {
    out_.push_back({Diagnostic::Severity::error, key, message});
  }
  void warning(const std::string& key, const std::string& message) {
    out_.push_back({Diagnostic::Severity::warning, key, message});
  }

  const json* find(const json& obj, const std::string& key, const std::string& path, bool required) {
    if (obj.is_object()) {
      const auto it = obj.find(key);
      if (it != obj.end()) return &*it;
    }
    if (required) error(path, "missing required key");
    return nullptr;
  }

  double number(const json& obj, const std::string& key, const std::string& path, double fallback,
                bool required = false) {
    const json* v = find(obj, key, path, required);
    if (!v) return fallback;
    if (!v->is_number()) {
      error(path, "must be a number");
      return fallback;
    }
    return v->get<double>();
  }

  std::size_t count(const json& obj, const std::string& key, const std::string& path,
                    std::size_t fallback, bool required = false) {
    const json* v = find(obj, key, path, required);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) {
      error(path, "must be a non-negative integer");
      return fallback;
    }
    return v->get<std::size_t>();
  }

  std::string text(const json& obj, const std::string& key, const std::string& path,
                   const std::string& fallback, bool required = false) {
    const json* v = find(obj, key, path, required);
    if (!v) return fallback;
    if (!v->is_string()) {
      error(path, "must be a string");
      return fallback;
    }
    return v->get<std::string>();
  }

  bool flag(const json& obj, const std::string& key, const std::string& path, bool fallback) {
    const json* v = find(obj, key, path, false);
    if (!v) return fallback;
    if (!v->is_boolean()) {
      error(path, "must be true or false");
      return fallback;
    }
    return v->get<bool>();
  }

  template <class T>
  std::vector<T> list(const json& obj, const std::string& key, const std::string& path,
                      std::vector<T> fallback) {
    const json* v = find(obj, key, path, false);
    if (!v) return fallback;
    if (!v->is_array()) {
      error(path, "must be an array");
      return fallback;
    }
    std::vector<T> out;
    for (const auto& item : *v) {
      const bool ok = std::is_integral_v<T> ? item.is_number_unsigned() : item.is_number();
      if (!ok) {
        error(path, std::is_integral_v<T> ? "entries must be non-negative integers"
                                          : "entries must be numbers");
        return fallback;
      }
      out.push_back(item.get<T>());
    }
    return out;
  }

  // Runs a factory that validates its own arguments, turning its error into a diagnostic.
  template <class F>
  bool guarded(const std::string& path, F&& factory) {
    try {
      factory();
      return true;
    } catch (const Error& e) {
      error(path, e.what());
      return false;
    }
  }

 private:
  std::vector<Diagnostic>& out_;
};

std::optional<DataModel> read_model(Reader& r, const json& root) {
  const json* m = r.find(root, "model", "model", true);
  if (!m) return std::nullopt;
  if (!m->is_object()) {
    r.error("model", "must be an object");
    return std::nullopt;
  }
  const std::string kind = r.text(*m, "kind", "model.kind", "", true);
  std::optional<DataModel> out;
  auto num = [&](const char* key) {
    return r.number(*m, key, std::string("model.") + key, std::nan(""), true);
  };
  if (kind == "normal") {
    const double mean = num("mean");
    const double sd = num("sd");
    r.guarded("model", [&] { out = ContinuousModel::normal(mean, sd); });
  } else if (kind == "exponential") {
    const double rate = num("rate");
    r.guarded("model", [&] { out = ContinuousModel::exponential(rate); });
  } else if (kind == "uniform") {
    const double lower = num("lower");
    const double upper = num("upper");
    r.guarded("model", [&] { out = ContinuousModel::uniform(lower, upper); });
  } else if (kind == "pareto") {
    const double scale = num("scale");
    const double tail = num("tail_index");
    r.guarded("model", [&] { out = ContinuousModel::pareto(scale, tail); });
  } else if (kind == "ar1") {
    const double rho = num("rho");
    const double sd = r.number(*m, "innovation_sd", "model.innovation_sd", 1.0);
    r.guarded("model", [&] { out = Ar1Model(rho, sd); });
  } else if (!kind.empty()) {
    r.error("model.kind", "unknown model '" + kind + "'");
  }
  return out;
}

std::optional<CountModel> read_count(Reader& r, const json& f) {
  const json* c = r.find(f, "count", "functional.count", true);
  if (!c) return std::nullopt;
  const std::string kind = r.text(*c, "kind", "functional.count.kind", "", true);
  std::optional<CountModel> out;
  if (kind == "poisson") {
    const double mean = r.number(*c, "mean", "functional.count.mean", std::nan(""), true);
    r.guarded("functional.count", [&] { out = CountModel::poisson(mean); });
  } else if (kind == "geometric") {
    const double q = r.number(*c, "q", "functional.count.q", std::nan(""), true);
    r.guarded("functional.count", [&] { out = CountModel::geometric(q); });
  } else if (kind == "binomial") {
    const std::size_t trials = r.count(*c, "trials", "functional.count.trials", 0, true);
    const double q = r.number(*c, "q", "functional.count.q", std::nan(""), true);
    r.guarded("functional.count", [&] { out = CountModel::binomial(trials, q); });
  } else if (kind == "deterministic") {
    const std::size_t value = r.count(*c, "value", "functional.count.value", 0, true);
    r.guarded("functional.count", [&] { out = CountModel::deterministic(value); });
  } else if (!kind.empty()) {
    r.error("functional.count.kind", "unknown count model '" + kind + "'");
  }
  return out;
}

void read_functional(Reader& r, const json& root, ExperimentConfig& cfg) {
  const json* f = r.find(root, "functional", "functional", true);
  if (!f) return;
  const std::string kind = r.text(*f, "kind", "functional.kind", "", true);
  if (kind.empty()) return;
  try {
    cfg.functional = parse_functional(kind);
  } catch (const Error&) {
    r.error("functional.kind", "unknown functional '" + kind + "'");
    return;
  }
  if (cfg.functional == FunctionalKind::mean) return;
  cfg.avar.alpha = r.number(*f, "alpha", "alpha", 0.9, true);
  cfg.avar.kink = r.number(*f, "kink", "kink", cfg.avar.alpha);
  if (cfg.functional != FunctionalKind::composition) return;
  CompoundParams params;
  if (const auto count = read_count(r, *f)) params.count = *count;
  params.lattice_step = r.number(*f, "lattice_step", "functional.lattice_step", 0.01);
  params.tail_budget = r.number(*f, "tail_budget", "functional.tail_budget", 1e-10);
  if (r.find(*f, "truncation", "functional.truncation", false)) {
    params.truncation = r.count(*f, "truncation", "functional.truncation", 0);
  }
  if (r.find(*f, "range", "functional.range", false)) {
    const auto range = r.list<double>(*f, "range", "functional.range", {});
    if (range.size() != 2) {
      r.error("functional.range", "must hold two numbers [a, b]");
    } else {
      params.range = std::make_pair(range[0], range[1]);
    }
  }
  r.guarded("functional", [&] { params.validate(); });
  cfg.compound = params;
}

FullConfig build(const json& root, std::vector<Diagnostic>& diagnostics) {
  Reader r(diagnostics);
  FullConfig full;
  full.raw = root;
  if (!root.is_object()) {
    r.error("", "config must be a JSON object");
    return full;
  }
  for (const auto& [key, value] : root.items()) {
    if (!kTopKeys.count(key)) r.warning(key, "unknown key is ignored");
  }
  const std::size_t version = r.count(root, "schema_version", "schema_version", 0, true);
  if (root.contains("schema_version") && version != 1) {
    r.error("schema_version", "only schema version 1 is supported");
  }

  ExperimentConfig& cfg = full.experiment;
  cfg.seed = r.count(root, "seed", "seed", 1);
  if (const auto model = read_model(r, root)) cfg.model = *model;
  read_functional(r, root, cfg);

  const std::string scheme = r.text(root, "scheme", "scheme", "efron");
  try {
    cfg.scheme = parse_scheme(scheme);
  } catch (const Error&) {
    r.error("scheme", "unknown scheme '" + scheme + "'");
  }
  full.scheme_override = r.flag(root, "scheme_override", "scheme_override", false);
  cfg.gamma = r.number(root, "gamma", "gamma", 0.4);
  if (root.contains("gamma") && !(cfg.gamma > 0.0 && cfg.gamma < 0.5)) {
    r.error("gamma", "block exponent must lie in (0, 0.5)");
  }
  if (root.contains("block_length")) {
    cfg.block_length = r.count(root, "block_length", "block_length", 1);
  }
  cfg.n_ladder = r.list<std::size_t>(root, "n_ladder", "n_ladder", cfg.n_ladder);
  cfg.replications = r.count(root, "R", "R", cfg.replications);
  cfg.bootstrap_replications = r.count(root, "B", "B", cfg.bootstrap_replications);
  const double lambda = r.number(root, "phi_lambda", "phi_lambda", 1.0);
  r.guarded("phi_lambda", [&] { cfg.phi = WeightFunction(lambda); });
  cfg.tolerance = r.number(root, "tolerance", "tolerance", cfg.tolerance);
  cfg.omegas = r.count(root, "omegas", "omegas", cfg.omegas);
  cfg.limit_paths = r.count(root, "limit_paths", "limit_paths", cfg.limit_paths);
  cfg.grid_points = r.count(root, "grid_points", "grid_points", cfg.grid_points);
  cfg.lag_truncation = r.count(root, "lag_truncation", "lag_truncation", cfg.lag_truncation);
  cfg.mc_len = r.count(root, "mc_len", "mc_len", cfg.mc_len);

  const bool dependent = cfg.dependent();
  if (cfg.scheme == Scheme::blockwise && !dependent && !full.scheme_override) {
    r.error("scheme", "blockwise scheme needs an ar1 model or scheme_override");
  }
  if (cfg.scheme != Scheme::blockwise && dependent && !full.scheme_override) {
    r.warning("scheme", "scheme assumes i.i.d.");
  }

  if (const json* d = r.find(root, "derivative_check", "derivative_check", false)) {
    auto& s = full.derivative_check;
    s.atoms = r.list<double>(*d, "direction_atoms", "derivative_check.direction_atoms", s.atoms);
    s.masses = r.list<double>(*d, "direction_masses", "derivative_check.direction_masses", s.masses);
    if (s.atoms.size() != s.masses.size() || s.atoms.empty()) {
      r.error("derivative_check.direction_masses", "needs one mass per atom");
    }
    s.kinks = r.list<double>(*d, "kinks", "derivative_check.kinks", s.kinks);
    s.n_ladder = r.list<std::size_t>(*d, "n_ladder", "derivative_check.n_ladder", s.n_ladder);
    if (s.n_ladder.empty()) r.error("derivative_check.n_ladder", "must not be empty");
    s.epsilon_base = r.number(*d, "epsilon_base", "derivative_check.epsilon_base", s.epsilon_base);
    if (!(s.epsilon_base > 1.0)) r.error("derivative_check.epsilon_base", "must be > 1");
    s.tolerance = r.number(*d, "tolerance", "derivative_check.tolerance", s.tolerance);
  }
  if (const json* w = r.find(root, "weights_audit", "weights_audit", false)) {
    auto& s = full.weights_audit;
    s.n = r.count(*w, "n", "weights_audit.n", s.n);
    if (w->contains("block_length")) {
      s.block_length = r.count(*w, "block_length", "weights_audit.block_length", 1);
    }
    s.draws = r.count(*w, "draws", "weights_audit.draws", s.draws);
    if (s.draws < 2) r.error("weights_audit.draws", "must be >= 2");
    if (s.n < 2) r.error("weights_audit.n", "must be >= 2");
  }
  if (const json* l = r.find(root, "limit_sample", "limit_sample", false)) {
    full.limit_sample.paths = r.count(*l, "paths", "limit_sample.paths", full.limit_sample.paths);
    if (full.limit_sample.paths == 0) r.error("limit_sample.paths", "must be > 0");
  }

  if (!has_errors(diagnostics)) {
    try {
      cfg.validate();
    } catch (const Error& e) {
      const std::string what = e.what();
      const auto colon = what.find(':');
      r.error(colon == std::string::npos ? "" : what.substr(0, colon),
              colon == std::string::npos ? what : what.substr(colon + 2));
    }
  }
  return full;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::config_invalid, std::string("config is not valid JSON: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

FullConfig build_or_throw(const std::string& text) {
  std::vector<Diagnostic> diagnostics;
  FullConfig full = build(parse_json(text), diagnostics);
  for (const auto& d : diagnostics) {
    if (d.severity == Diagnostic::Severity::error) {
      fail(ErrorCode::config_invalid, d.key + ": " + d.message);
    }
  }
  return full;
}

// Keeps track of written files for the manifest.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) {
      fail(ErrorCode::io_error, "cannot create output directory " + dir_.string());
    }
  }

  template <class F>
  void write(const std::string& name, F&& body) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    body(out);
    out.flush();
    if (!out) fail(ErrorCode::io_error, "write failed for " + path.string());
    files_.push_back(name);
  }

  void write_json(const std::string& name, const json& value) {
    write(name, [&](std::ostream& out) { out << value.dump(2) << "\n"; });
  }

  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

bool wants_csv(OutputFormat f) { return f != OutputFormat::json; }
bool wants_json(OutputFormat f) { return f != OutputFormat::csv; }

using Timings = std::map<std::string, double>;

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------- subcommands

int run_consistency(const FullConfig& full, OutputDir& out, OutputFormat format, Timings& timings,
                    std::ostream& log) {
  const Stopwatch watch;
  const ConsistencyReport report = consistency_report(full.experiment);
  timings["limits"] = report.limit_seconds;
  timings["harness"] = watch.seconds() - report.limit_seconds;

  if (wants_csv(format)) out.write("report.csv", [&](std::ostream& o) { write_report_csv(o, report); });
  if (wants_json(format)) {
    json rows = json::array();
    for (const auto& row : report.rows) {
      json r{{"n", row.n}, {"block_length", row.block_length}, {"status", row.ok ? "ok" : "error"}};
      if (row.ok) {
        r["ks"] = {{"boot_samp", row.ks_boot_samp},
                   {"samp_limit", row.ks_samp_limit},
                   {"boot_limit", row.ks_boot_limit}};
        r["w1"] = {{"boot_samp", row.w1_boot_samp},
                   {"samp_limit", row.w1_samp_limit},
                   {"boot_limit", row.w1_boot_limit}};
        r["norms"] = {{"empirical", row.norm_empirical}, {"centering", row.norm_centering}};
        if (row.norm_empirical_retry) r["norms"]["empirical_retry_2n"] = *row.norm_empirical_retry;
        if (row.norm_centering_retry) r["norms"]["centering_retry_2n"] = *row.norm_centering_retry;
        if (!row.ks_by_omega.empty()) r["ks_boot_samp_by_omega"] = row.ks_by_omega;
      } else {
        r["error"] = row.error;
      }
      rows.push_back(r);
    }
    const json doc{{"config", full.raw},
                   {"seed", full.experiment.seed},
                   {"truth", report.truth},
                   {"truth_method", report.truth_by_lattice ? "lattice" : "closed_form"},
                   {"limit_jitter", report.limit_jitter},
                   {"verdict", report.pass ? "PASS" : "FAIL"},
                   {"reason", report.reason},
                   {"norm_verdict", report.norms_pass ? "PASS" : "FAIL"},
                   {"warnings", report.warnings},
                   {"rows", rows}};
    out.write_json("report.json", doc);
  }
  for (const auto& row : report.rows) {
    log << "n=" << row.n;
    if (row.ok) {
      log << " KS(boot,samp)=" << row.ks_boot_samp << " KS(samp,limit)=" << row.ks_samp_limit;
    } else {
      log << " error: " << row.error;
    }
    log << "\n";
  }
  log << "verdict: " << (report.pass ? "PASS" : "FAIL");
  if (!report.reason.empty()) log << " (" << report.reason << ")";
  log << "\n";
  return report.pass ? kExitPass : kExitFail;
}

int run_derivative_check(const FullConfig& full, OutputDir& out, OutputFormat format,
                         Timings& timings, std::ostream& log) {
  const Stopwatch watch;
  const ExperimentConfig& cfg = full.experiment;
  const auto& s = full.derivative_check;
  require(!cfg.dependent(), ErrorCode::config_invalid,
          "model: derivative-check needs an i.i.d. model, not ar1");
  require(cfg.functional != FunctionalKind::mean, ErrorCode::config_invalid,
          "functional: derivative-check supports avar and composition");
  const double alpha = cfg.avar.alpha;
  std::vector<double> kinks = s.kinks.empty() ? std::vector<double>{alpha, 1.0 - alpha} : s.kinks;
  const AvarParams canonical = AvarParams::at_level(alpha);
  const ContinuousModel model = cfg.marginal();

  CadlagFunction base;
  CadlagFunction direction;
  ScalarFunctional H;
  std::function<ScalarFunctional(double)> derivative_for;
  std::vector<double> atoms = s.atoms;
  StepFunction severity;
  if (cfg.functional == FunctionalKind::avar) {
    base = CadlagFunction::of(model);
    direction = CadlagFunction(model, -1.0, StepFunction::from_atoms(atoms, s.masses));
    H = [canonical](const CadlagFunction& F) { return avar(F, canonical); };
    derivative_for = [&](double kink) -> ScalarFunctional {
      return [lin = AvarLinearization(base, {alpha, kink})](const CadlagFunction& v) {
        return lin(v);
      };
    };
  } else {
    CompoundParams params = *cfg.compound;
    severity = model_severity_lattice(cfg, params).cdf();
    const double h = params.lattice_step;
    for (auto& a : atoms) a = std::round(a / h) * h;
    base = CadlagFunction(severity);
    direction = CadlagFunction(StepFunction::from_atoms(atoms, s.masses) - severity);
    H = [canonical, params](const CadlagFunction& F) {
      return composition(F.step(), canonical, params);
    };
    derivative_for = [&, params](double kink) -> ScalarFunctional {
      return [lin = CompositionLinearization(severity, {alpha, kink}, params)](
                 const CadlagFunction& v) { return lin(v.step()); };
    };
  }

  QhdCheckConfig check;
  check.base_sequence = [base](std::size_t) { return base; };
  check.direction = direction;
  const double eps_base = s.epsilon_base;
  check.scales = [eps_base](std::size_t n) { return std::pow(eps_base, -static_cast<double>(n)); };
  check.n_ladder = s.n_ladder;
  check.tolerance = s.tolerance;

  json results = json::array();
  std::vector<double> passing;
  for (const double kink : kinks) {
    const QhdCheckResult result = qhd_convergence_check(H, derivative_for(kink), check);
    std::ostringstream label;
    label << "convergence_kink_" << kink << ".csv";
    if (wants_csv(format)) out.write(label.str(), [&](std::ostream& o) { write_csv(o, result); });
    json rows = json::array();
    for (const auto& row : result.rows) {
      rows.push_back({{"n", row.n},
                      {"epsilon", row.epsilon},
                      {"error", nullable(row.error)},
                      {"feasible", row.feasible}});
    }
    results.push_back({{"kink", kink},
                       {"verdict", result.pass ? "PASS" : "FAIL"},
                       {"reason", result.reason},
                       {"rows", rows}});
    if (result.pass) passing.push_back(kink);
    log << "kink=" << kink << ": " << (result.pass ? "PASS" : "FAIL");
    if (!result.reason.empty()) log << " (" << result.reason << ")";
    log << "\n";
  }
  // With several conventions the experiment discriminates: exactly one may pass.
  const bool pass = kinks.size() > 1 ? passing.size() == 1 : passing.size() == kinks.size();
  json doc{{"config", full.raw},
           {"seed", cfg.seed},
           {"functional", to_string(cfg.functional)},
           {"alpha", alpha},
           {"results", results},
           {"verdict", pass ? "PASS" : "FAIL"}};
  doc["winning_kink"] = passing.size() == 1 ? json(passing.front()) : json(nullptr);
  if (wants_json(format)) out.write_json("derivative_check.json", doc);
  if (passing.size() == 1) log << "winning kink: " << passing.front() << "\n";
  log << "verdict: " << (pass ? "PASS" : "FAIL") << "\n";
  timings["derivatives"] = watch.seconds();
  return pass ? kExitPass : kExitFail;
}

int run_weights_audit(const FullConfig& full, OutputDir& out, OutputFormat format,
                      Timings& timings, std::ostream& log) {
  const Stopwatch watch;
  const ExperimentConfig& cfg = full.experiment;
  const auto& s = full.weights_audit;
  const std::size_t n = s.n;
  const bool blockwise = cfg.scheme == Scheme::blockwise;
  const std::size_t l = blockwise ? (s.block_length ? *s.block_length : block_length_for(n, cfg.gamma)) : 0;
  const std::vector<double> expected =
      blockwise ? blockwise_expected_weights(n, l) : std::vector<double>(n, 1.0);
  const std::uint64_t base = stream_seed(cfg.seed, Stream::bootstrap, n, 0);
  auto draw = [&](std::size_t d) {
    const std::uint64_t seed = derive_seed(base, d);
    return blockwise ? blockwise_weights(n, l, seed) : exchangeable_weights(cfg.scheme, n, seed);
  };

  constexpr std::size_t kChunk = 1000;
  const std::size_t chunks = (s.draws + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> sums(chunks, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> squares(chunks, std::vector<double>(n, 0.0));
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(s.draws, (c + 1) * kChunk);
    for (std::size_t d = c * kChunk; d < end; ++d) {
      const auto w = draw(d);
      for (std::size_t i = 0; i < n; ++i) {
        sums[c][i] += w.weights[i];
        squares[c][i] += w.weights[i] * w.weights[i];
      }
    }
  });
  std::vector<double> mean(n, 0.0);
  std::vector<double> se(n, 0.0);
  const double D = static_cast<double>(s.draws);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    double square = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
      sum += sums[c][i];
      square += squares[c][i];
    }
    mean[i] = sum / D;
    const double var = std::max(0.0, (square - D * mean[i] * mean[i]) / (D - 1.0));
    se[i] = std::sqrt(var / D);
  }
  double total = 0.0;
  for (const double w : expected) total += w;
  std::size_t outside = 0;
  double worst = 0.0;
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = mean[i] - expected[i];
    z[i] = se[i] > 0.0 ? diff / se[i] : (std::abs(diff) <= 1e-12 ? 0.0 : INFINITY);
    worst = std::max(worst, std::abs(z[i]));
    if (std::abs(z[i]) > 3.0) ++outside;
  }
  const bool sum_ok = std::abs(total - static_cast<double>(n)) <= 1e-9;
  const bool pass = outside == 0 && sum_ok;

  const BootstrapWeights first = draw(0);
  if (wants_csv(format)) {
    out.write("weights.csv", [&](std::ostream& o) { write_weights_csv(o, first, expected); });
    out.write("audit.csv", [&](std::ostream& o) {
      o << std::setprecision(12) << "i,w_ni,mc_mean,mc_se,z\n";
      for (std::size_t i = 0; i < n; ++i) {
        o << i + 1 << "," << expected[i] << "," << mean[i] << "," << se[i] << "," << z[i] << "\n";
      }
    });
  }
  if (wants_json(format)) {
    out.write_json("audit.json", {{"config", full.raw},
                                  {"scheme", to_string(cfg.scheme)},
                                  {"n", n},
                                  {"block_length", l},
                                  {"draws", s.draws},
                                  {"sum_expected", total},
                                  {"max_abs_z", worst},
                                  {"indices_outside_3se", outside},
                                  {"verdict", pass ? "PASS" : "FAIL"}});
  }
  log << "scheme=" << to_string(cfg.scheme) << " n=" << n << " l=" << l << " draws=" << s.draws
      << " max|z|=" << worst << " outside 3 SE: " << outside << " sum w=" << total << "\n";
  log << "verdict: " << (pass ? "PASS" : "FAIL") << "\n";
  timings["resampling"] = watch.seconds();
  return pass ? kExitPass : kExitFail;
}

int run_limit_sample(const FullConfig& full, OutputDir& out, OutputFormat format, Timings& timings,
                     std::ostream& log) {
  const Stopwatch watch;
  ExperimentConfig cfg = full.experiment;
  cfg.limit_paths = full.limit_sample.paths;
  double jitter = 0.0;
  std::vector<std::string> warnings;
  const auto samples = limit_distribution(cfg, &jitter, &warnings);
  double mean = 0.0;
  for (const double v : samples) mean += v;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (const double v : samples) var += (v - mean) * (v - mean);
  var /= std::max<double>(1.0, static_cast<double>(samples.size()) - 1.0);

  if (wants_csv(format)) {
    out.write("limit_samples.csv", [&](std::ostream& o) { write_samples_csv(o, samples); });
  }
  if (wants_json(format)) {
    out.write_json("limit_summary.json", {{"config", full.raw},
                                          {"paths", samples.size()},
                                          {"mean", mean},
                                          {"variance", var},
                                          {"jitter", jitter},
                                          {"warnings", warnings}});
  }
  log << "paths=" << samples.size() << " mean=" << mean << " variance=" << var
      << " jitter=" << jitter << "\n";
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  timings["limits"] = watch.seconds();
  return kExitPass;
}

}  // namespace

OutputFormat parse_format(const std::string& name) {
  if (name == "csv") return OutputFormat::csv;
  if (name == "json") return OutputFormat::json;
  if (name == "both") return OutputFormat::both;
  fail(ErrorCode::invalid_argument, "format must be csv, json or both");
}

std::vector<Diagnostic> validate_config_text(const std::string& json_text) {
  std::vector<Diagnostic> diagnostics;
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    diagnostics.push_back({Diagnostic::Severity::error, "", std::string("not valid JSON: ") + e.what()});
    return diagnostics;
  }
  build(root, diagnostics);
  return diagnostics;
}

std::vector<Diagnostic> validate_config_file(const std::filesystem::path& path) {
  return validate_config_text(read_file(path));
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(), [](const Diagnostic& d) {
    return d.severity == Diagnostic::Severity::error;
  });
}

std::string format_diagnostics(const std::vector<Diagnostic>& diagnostics) {
  std::ostringstream out;
  for (const auto& d : diagnostics) {
    out << (d.severity == Diagnostic::Severity::error ? "error" : "warning");
    if (!d.key.empty()) out << " [" << d.key << "]";
    out << ": " << d.message << "\n";
  }
  return out.str();
}

ExperimentConfig parse_experiment(const std::string& json_text) {
  return build_or_throw(json_text).experiment;
}

std::string config_hash(const std::string& json_text) {
  const std::string canonical = parse_json(json_text).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

int run(const RunOptions& options, std::ostream& log) {
  try {
    if (options.threads > 0) set_thread_budget(options.threads);
    const std::string text = read_file(options.config_path);
    FullConfig full = build_or_throw(text);
    if (options.seed) full.experiment.seed = *options.seed;

    OutputDir out(options.out_dir);
    Timings timings;
    const Stopwatch total;
    int status;
    if (options.subcommand == "consistency") {
      status = run_consistency(full, out, options.format, timings, log);
    } else if (options.subcommand == "derivative-check") {
      status = run_derivative_check(full, out, options.format, timings, log);
    } else if (options.subcommand == "weights-audit") {
      status = run_weights_audit(full, out, options.format, timings, log);
    } else if (options.subcommand == "limit-sample") {
      status = run_limit_sample(full, out, options.format, timings, log);
    } else {
      fail(ErrorCode::invalid_argument, "unknown subcommand '" + options.subcommand + "'");
    }
    timings["total"] = total.seconds();

    std::vector<std::string> files = out.files();
    files.push_back("manifest.json");
    const json manifest{{"config_hash", config_hash(text)},
                        {"seed", full.experiment.seed},
                        {"artifact_version", QHDBOOT_VERSION},
                        {"subcommand", options.subcommand},
                        {"verdict", status == kExitPass ? "PASS" : "FAIL"},
                        {"timings", timings},
                        {"files", files}};
    out.write_json("manifest.json", manifest);
    return status;
  } catch (const Error& e) {
    log << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace qhdboot
