#include "qhdboot/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "qhdboot/error.hpp"
#include "qhdboot/rng.hpp"

namespace qhdboot {

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::efron: return "efron";
    case Scheme::bayesian: return "bayesian";
    case Scheme::wild: return "wild";
    case Scheme::blockwise: return "blockwise";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "efron") return Scheme::efron;
  if (name == "bayesian") return Scheme::bayesian;
  if (name == "wild") return Scheme::wild;
  if (name == "blockwise") return Scheme::blockwise;
  fail(ErrorCode::invalid_argument, "unknown bootstrap scheme: " + name);
}

StepFunction empirical_cdf(std::span<const double> sample) {
  require(!sample.empty(), ErrorCode::empty_sample, "empirical_cdf needs a non-empty sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<double> knots;
  std::vector<double> values;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    require(std::isfinite(sorted[i]), ErrorCode::invalid_argument, "sample values must be finite");
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    knots.push_back(sorted[i]);
    // count / n keeps values like 1/3 and 2/3 exact
    values.push_back(static_cast<double>(i + 1) / n);
  }
  return StepFunction(std::move(knots), std::move(values), 0.0);
}

BootstrapWeights exchangeable_weights(Scheme scheme, std::size_t n, std::uint64_t seed) {
  require(n >= 1, ErrorCode::invalid_argument, "bootstrap weights need n >= 1");
  require(scheme != Scheme::blockwise, ErrorCode::invalid_argument,
          "use blockwise_weights for the blockwise scheme");
  Rng rng = make_rng(seed);
  BootstrapWeights out;
  out.scheme = scheme;
  out.weights.assign(n, 0.0);
  switch (scheme) {
    case Scheme::efron: {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t draw = 0; draw < n; ++draw) out.weights[pick(rng)] += 1.0;
      out.mean_weight = 1.0;
      break;
    }
    case Scheme::bayesian: {
      std::exponential_distribution<double> exp1(1.0);
      double total = 0.0;
      for (auto& w : out.weights) total += (w = exp1(rng));
      const double scale = static_cast<double>(n) / total;
      double partial = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) partial += (out.weights[i] *= scale);
      // last weight absorbs rounding so that the weights sum to n exactly
      out.weights[n - 1] = std::max(0.0, static_cast<double>(n) - partial);
      out.mean_weight = 1.0;
      break;
    }
    case Scheme::wild: {
      std::exponential_distribution<double> exp1(1.0);
      double total = 0.0;
      for (auto& w : out.weights) total += (w = exp1(rng));
      out.mean_weight = total / static_cast<double>(n);
      break;
    }
    case Scheme::blockwise: break;
  }
  return out;
}

namespace {

void check_block_length(std::size_t n, std::size_t block_length) {
  require(block_length >= 1 && block_length < n, ErrorCode::block_length_invalid,
          "block length must satisfy 1 <= l < n");
}

}  // namespace

BootstrapWeights blockwise_weights_from_starts(std::size_t n, std::size_t block_length,
                                               std::span<const std::size_t> starts) {
  check_block_length(n, block_length);
  const std::size_t k = (n + block_length - 1) / block_length;
  require(starts.size() == k, ErrorCode::length_mismatch, "need exactly k_n block start indices");
  const std::size_t last_start = n - block_length + 1;
  const std::size_t last_length = n - (k - 1) * block_length;
  // difference array over 1-based indices
  std::vector<long long> diff(n + 2, 0);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t start = starts[j];
    require(start >= 1 && start <= last_start, ErrorCode::invalid_argument,
            "block start index out of range");
    const std::size_t length = j + 1 < k ? block_length : last_length;
    diff[start] += 1;
    diff[start + length] -= 1;
  }
  BootstrapWeights out;
  out.scheme = Scheme::blockwise;
  out.block_length = block_length;
  out.block_count = k;
  out.mean_weight = 1.0;
  out.weights.resize(n);
  long long running = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    running += diff[i];
    out.weights[i - 1] = static_cast<double>(running);
  }
  return out;
}

BootstrapWeights blockwise_weights(std::size_t n, std::size_t block_length, std::uint64_t seed) {
  check_block_length(n, block_length);
  const std::size_t k = (n + block_length - 1) / block_length;
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<std::size_t> pick(1, n - block_length + 1);
  std::vector<std::size_t> starts(k);
  for (auto& s : starts) s = pick(rng);
  return blockwise_weights_from_starts(n, block_length, starts);
}

std::vector<double> blockwise_expected_weights(std::size_t n, std::size_t block_length) {
  check_block_length(n, block_length);
  const auto nn = static_cast<long long>(n);
  const auto l = static_cast<long long>(block_length);
  const long long k = (nn + l - 1) / l;
  const long long rest = nn - (k - 1) * l;  // length of the final block
  // Range ends of the five cases; they partition {1..n} iff they are ordered.
  const long long e1 = rest;
  const long long e2 = l;
  const long long e3 = nn - l;
  const long long e4 = nn - (k * l - nn);
  require(e1 <= e2 && e2 <= e3 && e3 <= e4 && e4 <= nn, ErrorCode::block_length_invalid,
          "closed-form expected weights need 2 l <= n");
  const double starts = static_cast<double>(nn - l + 1);
  const double kd = static_cast<double>(k);
  std::vector<double> w(n);
  for (long long i = 1; i <= nn; ++i) {
    const double id = static_cast<double>(i);
    double value;
    if (i <= e1) {
      value = kd * id / starts;
    } else if (i <= e2) {
      value = (kd - 1.0) * id / starts + static_cast<double>(rest) / starts;
    } else if (i <= e3) {
      value = static_cast<double>(nn) / starts;
    } else if (i <= e4) {
      value = (kd - 1.0) * static_cast<double>(nn - i + 1) / starts +
              static_cast<double>(2 * nn - k * l - i + 1) / starts;
    } else {
      value = (kd - 1.0) * static_cast<double>(nn - i + 1) / starts;
    }
    w[static_cast<std::size_t>(i - 1)] = value;
  }
  return w;
}

std::size_t block_length_for(std::size_t n, double gamma) {
  require(gamma > 0.0 && gamma < 1.0, ErrorCode::invalid_argument, "block exponent must be in (0,1)");
  return static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), gamma) - 1e-12));
}

WeightedEmpirical::WeightedEmpirical(std::span<const double> sample) {
  require(!sample.empty(), ErrorCode::empty_sample, "weighted empirical CDF needs a sample");
  order_.resize(sample.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [&](auto i, auto j) { return sample[i] < sample[j]; });
  for (std::size_t pos = 0; pos < order_.size(); ++pos) {
    const double x = sample[order_[pos]];
    require(std::isfinite(x), ErrorCode::invalid_argument, "sample values must be finite");
    if (knots_.empty() || knots_.back() != x) {
      knots_.push_back(x);
      group_end_.push_back(pos + 1);
    } else {
      group_end_.back() = pos + 1;
    }
  }
}

StepFunction WeightedEmpirical::cdf(std::span<const double> weights) const {
  require(weights.size() == order_.size(), ErrorCode::length_mismatch,
          "one weight per sample point required");
  const double n = static_cast<double>(order_.size());
  std::vector<double> values(knots_.size());
  double cumulative = 0.0;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < knots_.size(); ++g) {
    for (; pos < group_end_[g]; ++pos) cumulative += weights[order_[pos]];
    values[g] = cumulative / n;
  }
  return StepFunction(knots_, std::move(values), 0.0);
}

StepFunction bootstrap_cdf(std::span<const double> sample, const BootstrapWeights& w) {
  require(sample.size() == w.weights.size(), ErrorCode::length_mismatch,
          "sample and weight vector lengths differ");
  return WeightedEmpirical(sample).cdf(w.weights);
}

StepFunction centering(std::span<const double> sample, const BootstrapWeights& w) {
  require(sample.size() == w.weights.size(), ErrorCode::length_mismatch,
          "sample and weight vector lengths differ");
  if (w.scheme == Scheme::blockwise) {
    const auto expected = blockwise_expected_weights(sample.size(), w.block_length);
    return WeightedEmpirical(sample).cdf(expected);
  }
  if (w.mean_weight == 1.0) return empirical_cdf(sample);
  return w.mean_weight * empirical_cdf(sample);
}

void write_weights_csv(std::ostream& out, const BootstrapWeights& w,
                       std::span<const double> expected) {
  require(expected.empty() || expected.size() == w.weights.size(), ErrorCode::length_mismatch,
          "expected weights must match the weight vector");
  out << std::setprecision(17) << "i,W_ni,w_ni\n";
  for (std::size_t i = 0; i < w.weights.size(); ++i) {
    out << i + 1 << "," << w.weights[i] << ",";
    if (!expected.empty()) out << expected[i];
    out << "\n";
  }
}

}  // namespace qhdboot
