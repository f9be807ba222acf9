#include "qhdboot/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "qhdboot/derivatives.hpp"
#include "qhdboot/error.hpp"
#include "qhdboot/limits.hpp"
#include "qhdboot/parallel.hpp"
#include "qhdboot/rng.hpp"

namespace qhdboot {

namespace {

void invalid(const std::string& key, const std::string& message) {
  fail(ErrorCode::config_invalid, key + ": " + message);
}

// The functional itself is only finite at the canonical kink; cfg.avar.kink
// enters through the limit derivative.
AvarParams functional_params(const ExperimentConfig& cfg) {
  return AvarParams::at_level(cfg.avar.alpha);
}

bool deterministic_one(const ExperimentConfig& cfg) {
  if (!cfg.compound) return false;
  const auto* fixed = std::get_if<DeterministicCount>(&cfg.compound->count.law());
  return fixed != nullptr && fixed->value == 1;
}

double step_mean(const StepFunction& G) {
  const auto knots = G.knots();
  const auto values = G.values();
  double previous = G.value_at_minus_inf();
  double total = 0.0;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    total += knots[i] * (values[i] - previous);
    previous = values[i];
  }
  return total;
}

double ks_sorted(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double best = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

GridPmf model_severity_lattice(const ExperimentConfig& cfg, CompoundParams& params) {
  const ContinuousModel model = cfg.marginal();
  const double h = params.lattice_step;
  double a;
  double b;
  if (params.range) {
    a = params.range->first;
    b = params.range->second;
  } else {
    const double lo = std::isfinite(model.support_lower()) ? model.support_lower()
                                                            : model.quantile(1e-12);
    const double hi = std::isfinite(model.support_upper()) ? model.support_upper()
                                                            : model.quantile(1.0 - 1e-12);
    a = std::floor(lo / h + 1e-9) * h;
    b = std::ceil(hi / h - 1e-9) * h;
    params.range = std::make_pair(a, b);
  }
  return discretize(model, h, a, b);
}

std::string to_string(FunctionalKind kind) {
  switch (kind) {
    case FunctionalKind::avar: return "avar";
    case FunctionalKind::composition: return "composition";
    case FunctionalKind::mean: return "mean";
  }
  return "unknown";
}

FunctionalKind parse_functional(const std::string& name) {
  if (name == "avar") return FunctionalKind::avar;
  if (name == "composition") return FunctionalKind::composition;
  if (name == "mean") return FunctionalKind::mean;
  fail(ErrorCode::config_invalid, "functional: unknown kind '" + name + "'");
}

ContinuousModel ExperimentConfig::marginal() const {
  if (const auto* ar = std::get_if<Ar1Model>(&model)) return ar->stationary_marginal();
  return std::get<ContinuousModel>(model);
}

std::size_t ExperimentConfig::block_length_at(std::size_t n) const {
  return block_length ? *block_length : block_length_for(n, gamma);
}

void ExperimentConfig::validate() const {
  if (replications < 100) invalid("R", "must be >= 100");
  if (bootstrap_replications < 100) invalid("B", "must be >= 100");
  if (n_ladder.empty()) invalid("n_ladder", "must not be empty");
  for (std::size_t i = 0; i < n_ladder.size(); ++i) {
    if (n_ladder[i] < 2) invalid("n_ladder", "entries must be >= 2");
    if (i > 0 && n_ladder[i] <= n_ladder[i - 1]) invalid("n_ladder", "must be increasing");
  }
  if (!(avar.alpha > 0.0 && avar.alpha < 1.0)) invalid("alpha", "must lie in (0, 1)");
  if (!(avar.kink > 0.0 && avar.kink < 1.0)) invalid("kink", "must lie in (0, 1)");
  if (!(tolerance > 0.0 && tolerance <= 1.0)) invalid("tolerance", "must lie in (0, 1]");
  if (omegas < 1) invalid("omegas", "must be >= 1");
  if (grid_points < 2) invalid("grid_points", "must be >= 2");
  if (lag_truncation < 1) invalid("lag_truncation", "must be >= 1");
  if (scheme == Scheme::blockwise) {
    if (!block_length && !(gamma > 0.0 && gamma < 0.5)) {
      invalid("gamma", "block exponent must lie in (0, 0.5)");
    }
    if (block_length && *block_length < 1) invalid("block_length", "must be >= 1");
    for (const std::size_t n : n_ladder) {
      const std::size_t l = block_length_at(n);
      if (2 * l > n) {
        invalid(block_length ? "block_length" : "gamma",
                "block length " + std::to_string(l) + " too long for n = " + std::to_string(n));
      }
    }
  }
  if (functional == FunctionalKind::composition) {
    if (!compound) invalid("compound", "composition needs a count model");
    try {
      compound->validate();
    } catch (const Error& e) {
      invalid("compound", e.what());
    }
    if (scheme == Scheme::wild) {
      invalid("scheme", "the wild scheme gives no probability CDF to compound");
    }
  }
  if (functional == FunctionalKind::mean && !std::isfinite(marginal().mean())) {
    invalid("functional", "model has no finite mean");
  }
  if (functional != FunctionalKind::mean) {
    const ContinuousModel m = marginal();
    if (!std::isfinite(m.upper_tail_integral(m.median()))) {
      invalid("model", "AVaR needs a finite first moment");
    }
  }
}

std::uint64_t stream_seed(std::uint64_t seed, Stream stream, std::uint64_t n, std::uint64_t index) {
  return derive_seed(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(stream)), n), index);
}

std::vector<double> draw_sample(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed) {
  if (const auto* ar = std::get_if<Ar1Model>(&cfg.model)) return sample_ar1(*ar, n, 0, seed);
  return sample_iid(std::get<ContinuousModel>(cfg.model), n, seed);
}

std::vector<double> draw_omega(const ExperimentConfig& cfg, std::size_t n, std::size_t index) {
  return draw_sample(cfg, n, stream_seed(cfg.seed, Stream::omega, n, index));
}

double true_value(const ExperimentConfig& cfg, bool* by_lattice) {
  if (by_lattice) *by_lattice = false;
  const ContinuousModel model = cfg.marginal();
  switch (cfg.functional) {
    case FunctionalKind::avar: return avar(model, functional_params(cfg));
    case FunctionalKind::mean: return model.mean();
    case FunctionalKind::composition: {
      if (deterministic_one(cfg)) return avar(model, functional_params(cfg));
      if (by_lattice) *by_lattice = true;
      CompoundParams params = *cfg.compound;
      const GridPmf severity = model_severity_lattice(cfg, params);
      return avar(compound_cdf(severity, params).closed_cdf(), functional_params(cfg));
    }
  }
  return 0.0;
}

double functional_value(const ExperimentConfig& cfg, const StepFunction& G) {
  switch (cfg.functional) {
    case FunctionalKind::avar: return avar(G, functional_params(cfg));
    case FunctionalKind::mean: return step_mean(G);
    case FunctionalKind::composition: return composition(G, functional_params(cfg), *cfg.compound);
  }
  return 0.0;
}

namespace {

// H(a) - H(b); the AVaR form stays finite for CDFs of equal non-unit mass.
double functional_difference(const ExperimentConfig& cfg, const StepFunction& a,
                             const StepFunction& b) {
  if (cfg.functional == FunctionalKind::avar) return avar_difference(a, b, functional_params(cfg));
  return functional_value(cfg, a) - functional_value(cfg, b);
}

}  // namespace

std::vector<double> sampling_distribution(const ExperimentConfig& cfg, std::size_t n) {
  const double truth = true_value(cfg);
  const double scale = std::sqrt(static_cast<double>(n));
  std::vector<double> out(cfg.replications);
  parallel_for(cfg.replications, [&](std::size_t r) {
    const auto sample = draw_sample(cfg, n, stream_seed(cfg.seed, Stream::sampling, n, r));
    out[r] = scale * (functional_value(cfg, empirical_cdf(sample)) - truth);
  });
  return out;
}

std::vector<double> bootstrap_distribution(const ExperimentConfig& cfg, std::size_t n,
                                           std::span<const double> omega,
                                           std::size_t omega_index) {
  require(omega.size() == n, ErrorCode::length_mismatch, "sample size differs from n");
  const WeightedEmpirical weighted(omega);
  const double scale = std::sqrt(static_cast<double>(n));
  const std::uint64_t base = stream_seed(cfg.seed, Stream::bootstrap, n, omega_index);

  std::optional<StepFunction> fixed_centering;
  std::size_t block = 0;
  if (cfg.scheme == Scheme::blockwise) {
    block = cfg.block_length_at(n);
    fixed_centering = weighted.cdf(blockwise_expected_weights(n, block));
  } else if (cfg.scheme != Scheme::wild) {
    fixed_centering = weighted.cdf(std::vector<double>(n, 1.0));
  }
  std::optional<double> fixed_value;
  if (fixed_centering && cfg.functional != FunctionalKind::avar) {
    fixed_value = functional_value(cfg, *fixed_centering);
  }

  std::vector<double> out(cfg.bootstrap_replications);
  parallel_for(cfg.bootstrap_replications, [&](std::size_t b) {
    const std::uint64_t seed = derive_seed(base, b);
    const BootstrapWeights w = cfg.scheme == Scheme::blockwise
                                   ? blockwise_weights(n, block, seed)
                                   : exchangeable_weights(cfg.scheme, n, seed);
    const StepFunction star = weighted.cdf(w.weights);
    double diff;
    if (fixed_value) {
      diff = functional_value(cfg, star) - *fixed_value;
    } else if (fixed_centering) {
      diff = functional_difference(cfg, star, *fixed_centering);
    } else {
      diff = functional_difference(cfg, star, weighted.cdf(std::vector<double>(n, w.mean_weight)));
    }
    out[b] = scale * diff;
  });
  return out;
}

std::vector<double> limit_distribution(const ExperimentConfig& cfg, double* jitter,
                                       std::vector<std::string>* warnings) {
  const ContinuousModel marginal = cfg.marginal();
  const auto grid = default_grid(marginal, cfg.grid_points);
  GaussianLimit limit;
  if (const auto* ar = std::get_if<Ar1Model>(&cfg.model)) {
    limit = covariance_mixing(*ar, grid, cfg.lag_truncation, cfg.mc_len,
                              stream_seed(cfg.seed, Stream::covariance, 0, 0));
    if (warnings) {
      warnings->insert(warnings->end(), limit.warnings.begin(), limit.warnings.end());
      if (limit.min_eigenvalue < -1e-10) {
        warnings->push_back("estimated long-run covariance had eigenvalue " +
                            std::to_string(limit.min_eigenvalue) + " before clipping");
      }
    }
  } else {
    limit = covariance_iid(marginal, grid);
  }

  PathFunctional derivative;
  switch (cfg.functional) {
    case FunctionalKind::mean:
      derivative = [](const StepFunction& v) {
        return -tail_integral(CadlagFunction(v), -std::numeric_limits<double>::infinity());
      };
      break;
    case FunctionalKind::avar:
      derivative = [lin = AvarLinearization(CadlagFunction::of(marginal), cfg.avar)](
                       const StepFunction& v) { return lin(v); };
      break;
    case FunctionalKind::composition:
      if (deterministic_one(cfg)) {
        derivative = [lin = AvarLinearization(CadlagFunction::of(marginal), cfg.avar)](
                         const StepFunction& v) { return lin(v); };
      } else {
        CompoundParams params = *cfg.compound;
        const StepFunction severity = model_severity_lattice(cfg, params).cdf();
        derivative = [lin = CompositionLinearization(severity, cfg.avar, params)](
                         const StepFunction& v) { return lin(v); };
      }
      break;
  }

  const std::size_t paths =
      cfg.limit_paths > 0 ? cfg.limit_paths : std::max(cfg.replications, cfg.bootstrap_replications);
  const LimitPaths sampled =
      sample_limit_paths(limit, paths, stream_seed(cfg.seed, Stream::limit, 0, 0));
  if (jitter) *jitter = sampled.jitter;
  std::vector<double> out(paths);
  parallel_for(paths, [&](std::size_t i) {
    out[i] = derivative(path_to_step(limit.grid, sampled.paths.row(static_cast<Eigen::Index>(i))));
  });
  return out;
}

std::pair<double, double> norm_diagnostics(const ExperimentConfig& cfg,
                                           std::span<const double> omega) {
  const ContinuousModel marginal = cfg.marginal();
  const WeightedEmpirical weighted(omega);
  const std::size_t n = omega.size();
  const StepFunction empirical = weighted.cdf(std::vector<double>(n, 1.0));
  const double first = weighted_sup_norm(CadlagFunction(marginal, -1.0, empirical), cfg.phi);
  if (cfg.scheme != Scheme::blockwise) return {first, first};
  const StepFunction centered = weighted.cdf(blockwise_expected_weights(n, cfg.block_length_at(n)));
  return {first, weighted_sup_norm(CadlagFunction(marginal, -1.0, centered), cfg.phi)};
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), ErrorCode::empty_sample, "KS distance needs non-empty samples");
  return ks_sorted(sorted_copy(a), sorted_copy(b));
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), ErrorCode::empty_sample, "W1 distance needs non-empty samples");
  const auto x = sorted_copy(a);
  const auto y = sorted_copy(b);
  if (x.size() == y.size()) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) total += std::abs(x[i] - y[i]);
    return total / static_cast<double>(x.size());
  }
  // int |F_x - F_y| over the merged support
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double previous = std::min(x.front(), y.front());
  double total = 0.0;
  while (i < x.size() || j < y.size()) {
    const double next = j == y.size() || (i < x.size() && x[i] <= y[j]) ? x[i] : y[j];
    total += std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny) * (next - previous);
    while (i < x.size() && x[i] == next) ++i;
    while (j < y.size() && y[j] == next) ++j;
    previous = next;
  }
  return total;
}

ConsistencyReport consistency_report(const ExperimentConfig& cfg) {
  cfg.validate();
  ConsistencyReport report;
  report.truth = true_value(cfg, &report.truth_by_lattice);

  const auto limit_start = std::chrono::steady_clock::now();
  const std::vector<double> limit = limit_distribution(cfg, &report.limit_jitter, &report.warnings);
  report.limit_seconds = seconds_since(limit_start);

  for (const std::size_t n : cfg.n_ladder) {
    ConsistencyRow row;
    row.n = n;
    row.block_length = cfg.scheme == Scheme::blockwise ? cfg.block_length_at(n) : 0;
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto sampling = sampling_distribution(cfg, n);
      const auto omega = draw_omega(cfg, n, 0);
      const auto boot = bootstrap_distribution(cfg, n, omega, 0);
      row.ks_boot_samp = ks_distance(boot, sampling);
      row.ks_samp_limit = ks_distance(sampling, limit);
      row.ks_boot_limit = ks_distance(boot, limit);
      row.w1_boot_samp = wasserstein1(boot, sampling);
      row.w1_samp_limit = wasserstein1(sampling, limit);
      row.w1_boot_limit = wasserstein1(boot, limit);
      std::tie(row.norm_empirical, row.norm_centering) = norm_diagnostics(cfg, omega);
      if (cfg.omegas > 1) {
        row.ks_by_omega.push_back(row.ks_boot_samp);
        for (std::size_t w = 1; w < cfg.omegas; ++w) {
          const auto other = draw_omega(cfg, n, w);
          row.ks_by_omega.push_back(ks_distance(bootstrap_distribution(cfg, n, other, w), sampling));
        }
      }
    } catch (const Error& e) {
      row.ok = false;
      row.error = e.what();
    }
    row.seconds = seconds_since(start);
    report.rows.push_back(std::move(row));
  }

  // Norm diagnostics: one retry at doubled n where the sequence goes up.
  report.norms_pass = true;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    auto& row = report.rows[i];
    const auto& prev = report.rows[i - 1];
    if (!row.ok || !prev.ok) continue;
    if (row.norm_empirical <= prev.norm_empirical && row.norm_centering <= prev.norm_centering) {
      continue;
    }
    try {
      const auto omega = draw_omega(cfg, 2 * row.n, 0);
      ExperimentConfig doubled = cfg;
      if (cfg.scheme == Scheme::blockwise && !cfg.block_length) {
        doubled.block_length = cfg.block_length_at(2 * row.n);
      }
      const auto [empirical, centering] = norm_diagnostics(doubled, omega);
      row.norm_empirical_retry = empirical;
      row.norm_centering_retry = centering;
      if (empirical > prev.norm_empirical || centering > prev.norm_centering) {
        report.norms_pass = false;
      }
    } catch (const Error& e) {
      report.norms_pass = false;
      report.warnings.push_back(std::string("norm retry failed: ") + e.what());
    }
  }

  report.pass = true;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    if (!row.ok) {
      report.pass = false;
      report.reason = "n = " + std::to_string(row.n) + " failed: " + row.error;
      return report;
    }
    if (i > 0 && row.ks_boot_samp > report.rows[i - 1].ks_boot_samp) {
      report.pass = false;
      report.reason = "KS(bootstrap, sampling) increases at n = " + std::to_string(row.n);
      return report;
    }
  }
  if (!(report.rows.back().ks_boot_samp < cfg.tolerance)) {
    report.pass = false;
    report.reason = "final KS(bootstrap, sampling) not below tolerance";
  }
  return report;
}

void write_report_csv(std::ostream& out, const ConsistencyReport& report) {
  out << std::setprecision(10)
      << "n,block_length,ks_boot_samp,ks_samp_limit,ks_boot_limit,w1_boot_samp,w1_samp_limit,"
         "w1_boot_limit,norm_empirical,norm_centering,norm_empirical_retry,norm_centering_retry,"
         "status\n";
  for (const auto& row : report.rows) {
    out << row.n << "," << row.block_length << ",";
    if (row.ok) {
      out << row.ks_boot_samp << "," << row.ks_samp_limit << "," << row.ks_boot_limit << ","
          << row.w1_boot_samp << "," << row.w1_samp_limit << "," << row.w1_boot_limit << ","
          << row.norm_empirical << "," << row.norm_centering << ",";
    } else {
      out << ",,,,,,,,";
    }
    if (row.norm_empirical_retry) out << *row.norm_empirical_retry;
    out << ",";
    if (row.norm_centering_retry) out << *row.norm_centering_retry;
    out << "," << (row.ok ? "ok" : "error") << "\n";
  }
}

}  // namespace qhdboot
