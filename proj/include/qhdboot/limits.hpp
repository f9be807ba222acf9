#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qhdboot/cadlag.hpp"
#include "qhdboot/models.hpp"

namespace qhdboot {

enum class LimitKind { iid_bridge, mixing_longrun };

/// Covariance of the limit process B_F on a finite grid.
struct GaussianLimit {
  std::vector<double> grid;
  Eigen::MatrixXd cov;
  LimitKind kind = LimitKind::iid_bridge;
  std::size_t lag_truncation = 0;
  /// Smallest eigenvalue of the symmetrised estimate before clipping.
  double min_eigenvalue = 0.0;
  std::vector<std::string> warnings;
};

/// m quantiles of F at equally spaced levels from 0.001 to 0.999.
std::vector<double> default_grid(const ContinuousModel& model, std::size_t m = 200);

/// F(min(s,t)) (1 - F(max(s,t))).
GaussianLimit covariance_iid(const ContinuousModel& model, const std::vector<double>& grid);

/// Bridge covariance of the stationary marginal plus sum over lags 1..K_lag of
/// cov(1{X_0 <= s}, 1{X_k <= t}) + cov(1{X_0 <= t}, 1{X_k <= s}), the lag terms
/// estimated from one simulated path of length mc_len. Negative eigenvalues of
/// the estimate are clipped. Throws PathTooShort when mc_len < 100 (K_lag + 1).
GaussianLimit covariance_mixing(const Ar1Model& model, const std::vector<double>& grid,
                                std::size_t lag_truncation, std::size_t mc_len,
                                std::uint64_t seed);

struct LimitPaths {
  /// One path per row, one grid point per column.
  Eigen::MatrixXd paths;
  /// Diagonal jitter that made the factorisation succeed (0 if none was needed).
  double jitter = 0.0;
};

/// Centered Gaussian vectors with covariance cov through an LDLT root. Jitter
/// starts at 1e-10 and grows tenfold; FactorizationFailed beyond 1e-6.
LimitPaths sample_limit_paths(const GaussianLimit& limit, std::size_t n_paths, std::uint64_t seed);

/// The path as a step function: B(t_j) on [t_j, t_{j+1}), 0 from t_m on.
StepFunction path_to_step(const std::vector<double>& grid, const Eigen::Ref<const Eigen::RowVectorXd>& path);

using PathFunctional = std::function<double(const StepFunction&)>;

/// dotH(B) for n_paths simulated paths.
std::vector<double> limit_law_samples(const GaussianLimit& limit, const PathFunctional& dotH,
                                      std::size_t n_paths, std::uint64_t seed);

/// One-column CSV with header "value".
void write_samples_csv(std::ostream& out, const std::vector<double>& samples);

}  // namespace qhdboot
