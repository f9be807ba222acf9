#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qhdboot/cadlag.hpp"

namespace qhdboot {

enum class Scheme { efron, bayesian, wild, blockwise };

std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);

/// Weight vector (W_n1, ..., W_nn) of one bootstrap replicate.
struct BootstrapWeights {
  Scheme scheme = Scheme::efron;
  std::vector<double> weights;
  double mean_weight = 1.0;
  std::size_t block_length = 0;  // blockwise only
  std::size_t block_count = 0;   // blockwise only
};

/// F_n = (1/n) sum 1_{[X_i, inf)}, ties merged into one knot.
StepFunction empirical_cdf(std::span<const double> sample);

/// efron: multinomial(n; 1/n, ..., 1/n). bayesian: Y_i / mean(Y) with Y_i ~ Exp(1),
/// renormalised to sum exactly to n. wild: Y_i ~ Exp(1) unnormalised.
BootstrapWeights exchangeable_weights(Scheme scheme, std::size_t n, std::uint64_t seed);

/// k_n = ceil(n / l) overlapping blocks: k_n - 1 of length l and a final one of
/// length n - (k_n - 1) l, start indices uniform on {1, ..., n - l + 1}.
BootstrapWeights blockwise_weights(std::size_t n, std::size_t block_length, std::uint64_t seed);

/// Covering counts for given 1-based start indices (one per block).
BootstrapWeights blockwise_weights_from_starts(std::size_t n, std::size_t block_length,
                                               std::span<const std::size_t> starts);

/// w_ni = E'[W_ni] in closed form (five index ranges). Throws BlockLengthInvalid
/// unless 1 <= l < n and the ranges partition {1, ..., n}, i.e. 2 l <= n.
std::vector<double> blockwise_expected_weights(std::size_t n, std::size_t block_length);

/// Block length policy l_n = ceil(n^gamma).
std::size_t block_length_for(std::size_t n, double gamma);

/// F*_n = (1/n) sum W_ni 1_{[X_i, inf)}; total mass is the mean weight.
StepFunction bootstrap_cdf(std::span<const double> sample, const BootstrapWeights& w);

/// C_n = mean(W) F_n for exchangeable schemes, (1/n) sum w_ni 1_{[X_i, inf)}
/// for the blockwise scheme.
StepFunction centering(std::span<const double> sample, const BootstrapWeights& w);

/// Precomputes the sort of a fixed sample so that weighted CDFs cost O(n).
class WeightedEmpirical {
 public:
  explicit WeightedEmpirical(std::span<const double> sample);

  std::size_t size() const noexcept { return order_.size(); }
  /// (1/n) sum_i weights[i] 1_{[X_i, inf)}, weights indexed like the sample.
  StepFunction cdf(std::span<const double> weights) const;

 private:
  std::vector<std::size_t> order_;
  std::vector<double> knots_;
  std::vector<std::size_t> group_end_;  // one past the last sorted position of each knot
};

/// CSV with columns i, W_ni, w_ni (1-based i). Pass the expected weights w_ni for
/// the blockwise scheme; with an empty span the column is left blank.
void write_weights_csv(std::ostream& out, const BootstrapWeights& w,
                       std::span<const double> expected);

}  // namespace qhdboot
