#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qhdboot/functionals.hpp"
#include "qhdboot/models.hpp"
#include "qhdboot/resampling.hpp"
#include "qhdboot/weight_function.hpp"

namespace qhdboot {

/// Scalar statistics supported by the experiments. `mean` is the linear test
/// functional F -> int x dF(x).
enum class FunctionalKind { avar, composition, mean };

std::string to_string(FunctionalKind kind);
FunctionalKind parse_functional(const std::string& name);

using DataModel = std::variant<ContinuousModel, Ar1Model>;

struct ExperimentConfig {
  DataModel model = ContinuousModel::uniform(0.0, 1.0);
  FunctionalKind functional = FunctionalKind::avar;
  AvarParams avar = AvarParams::at_level(0.9);
  std::optional<CompoundParams> compound;
  Scheme scheme = Scheme::efron;
  std::vector<std::size_t> n_ladder{250, 1000, 4000};
  std::size_t replications = 2000;            // R
  std::size_t bootstrap_replications = 2000;  // B
  std::uint64_t seed = 1;
  WeightFunction phi{1.0};
  double gamma = 0.4;
  /// Fixed block length overriding ceil(n^gamma).
  std::optional<std::size_t> block_length;
  double tolerance = 0.10;
  /// Samples of the limit law; 0 means max(R, B).
  std::size_t limit_paths = 0;
  std::size_t grid_points = 200;
  std::size_t lag_truncation = 50;
  std::size_t mc_len = 1000000;
  /// 1 = almost-sure mode (one fixed omega per n); more runs the robustness mode.
  std::size_t omegas = 1;

  /// Throws ConfigInvalid naming the offending field.
  void validate() const;
  ContinuousModel marginal() const;
  bool dependent() const { return std::holds_alternative<Ar1Model>(model); }
  std::size_t block_length_at(std::size_t n) const;
};

/// Seed streams below the top-level seed.
enum class Stream : std::uint64_t { sampling = 1, omega = 2, bootstrap = 3, limit = 4, covariance = 5 };
std::uint64_t stream_seed(std::uint64_t seed, Stream stream, std::uint64_t n, std::uint64_t index);

/// The outer sample omega (index selects one of the robustness-mode samples).
std::vector<double> draw_sample(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed);
std::vector<double> draw_omega(const ExperimentConfig& cfg, std::size_t n, std::size_t index = 0);

/// H(F) at the data model. Sets `by_lattice` when it is not a closed form.
double true_value(const ExperimentConfig& cfg, bool* by_lattice = nullptr);

/// Cell-mass lattice of the model for the compound functional, covering all but
/// 1e-12 of each tail. Fills params.range when it was empty.
GridPmf model_severity_lattice(const ExperimentConfig& cfg, CompoundParams& params);

/// H evaluated at a step CDF.
double functional_value(const ExperimentConfig& cfg, const StepFunction& G);

/// R draws of sqrt(n) (H(F_n) - H(F)).
std::vector<double> sampling_distribution(const ExperimentConfig& cfg, std::size_t n);

/// B draws of sqrt(n) (H(F*_n) - H(C_n)) at the fixed sample omega.
std::vector<double> bootstrap_distribution(const ExperimentConfig& cfg, std::size_t n,
                                           std::span<const double> omega,
                                           std::size_t omega_index = 0);

/// Draws of the derivative applied to the simulated limit process.
std::vector<double> limit_distribution(const ExperimentConfig& cfg, double* jitter = nullptr,
                                       std::vector<std::string>* warnings = nullptr);

/// ||F_n - F||_phi and ||C_n - F||_phi for the sample omega; C_n = F_n for the
/// exchangeable schemes (mean weight 1 in expectation).
std::pair<double, double> norm_diagnostics(const ExperimentConfig& cfg, std::span<const double> omega);

double ks_distance(std::span<const double> a, std::span<const double> b);
double wasserstein1(std::span<const double> a, std::span<const double> b);

struct ConsistencyRow {
  std::size_t n = 0;
  std::size_t block_length = 0;
  double ks_boot_samp = 0.0;
  double ks_samp_limit = 0.0;
  double ks_boot_limit = 0.0;
  double w1_boot_samp = 0.0;
  double w1_samp_limit = 0.0;
  double w1_boot_limit = 0.0;
  double norm_empirical = 0.0;
  double norm_centering = 0.0;
  /// Norms at doubled n, filled when the monotonicity check needed a retry.
  std::optional<double> norm_empirical_retry;
  std::optional<double> norm_centering_retry;
  /// KS(bootstrap, sampling) for each omega in robustness mode.
  std::vector<double> ks_by_omega;
  bool ok = true;
  std::string error;
  double seconds = 0.0;
};

struct ConsistencyReport {
  std::vector<ConsistencyRow> rows;
  double truth = 0.0;
  bool truth_by_lattice = false;
  double limit_jitter = 0.0;
  bool pass = false;
  std::string reason;
  bool norms_pass = false;
  std::vector<std::string> warnings;
  double limit_seconds = 0.0;
};

ConsistencyReport consistency_report(const ExperimentConfig& cfg);

/// One row per n; runtimes are left out so that equal seeds give equal bytes.
void write_report_csv(std::ostream& out, const ConsistencyReport& report);

}  // namespace qhdboot
