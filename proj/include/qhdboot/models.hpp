#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "qhdboot/weight_function.hpp"

namespace qhdboot {

struct NormalLaw {
  double mean;
  double sd;
};
struct ExponentialLaw {
  double rate;
};
struct UniformLaw {
  double lower;
  double upper;
};
struct ParetoLaw {
  double scale;
  double tail_index;
};

/// A continuous ground-truth distribution. Besides cdf/quantile it provides the
/// partial integrals of F and 1 - F, which is what lets the AVaR functional and
/// its derivative be evaluated in closed form at a model.
class ContinuousModel {
 public:
  using Law = std::variant<NormalLaw, ExponentialLaw, UniformLaw, ParetoLaw>;

  static ContinuousModel normal(double mean, double sd);
  static ContinuousModel exponential(double rate);
  static ContinuousModel uniform(double lower, double upper);
  static ContinuousModel pareto(double scale, double tail_index);

  const Law& law() const noexcept { return law_; }
  std::string name() const;

  double cdf(double x) const;
  double survival(double x) const;
  double pdf(double x) const;
  /// Inverse of cdf on (0, 1); throws LevelOutOfRange outside.
  double quantile(double s) const;
  /// inf{x : F(x) > t} for any real t; -inf when t < 0 on unbounded support,
  /// +inf when t >= 1.
  double level_set_start(double t) const;

  double support_lower() const;
  double support_upper() const;
  double mean() const;
  double median() const { return quantile(0.5); }

  /// Integral of F over (-inf, b].
  double lower_tail_integral(double b) const;
  /// Integral of 1 - F over [a, inf); +inf when the mean is infinite.
  double upper_tail_integral(double a) const;
  /// Integral of F over [a, b] for finite a <= b.
  double cdf_integral(double a, double b) const;

  /// Upper-tail decay exponent: 1 - F(x) ~ x^(-exponent). +inf for light tails.
  double tail_exponent() const;

  friend bool operator==(const ContinuousModel& a, const ContinuousModel& b);

 private:
  explicit ContinuousModel(Law law) : law_(law) {}
  Law law_;
};

struct PoissonCount {
  double mean;
};
/// p_k = q (1 - q)^k, k >= 0.
struct GeometricCount {
  double q;
};
struct BinomialCount {
  std::size_t trials;
  double q;
};
struct DeterministicCount {
  std::size_t value;
};

/// Distribution p = (p_k) of the count variable N of a compound sum.
class CountModel {
 public:
  using Law = std::variant<PoissonCount, GeometricCount, BinomialCount, DeterministicCount>;

  static CountModel poisson(double mean);
  static CountModel geometric(double q);
  static CountModel binomial(std::size_t trials, double q);
  static CountModel deterministic(std::size_t value);

  const Law& law() const noexcept { return law_; }
  std::string name() const;

  double pmf(std::size_t k) const;
  double mean() const;
  /// Largest k with p_k > 0, or SIZE_MAX for unbounded support.
  std::size_t support_max() const;
  /// Smallest K with sum_{k > K} p_k < budget (capped at max_k).
  std::size_t truncation_point(double budget, std::size_t max_k = 2000) const;
  /// sum_{k <= K} p_k.
  double mass_up_to(std::size_t K) const;
  /// sum_{k <= K} p_k k^r.
  double moment_up_to(std::size_t K, double r) const;

 private:
  explicit CountModel(Law law) : law_(law) {}
  Law law_;
};

/// Stationary Gaussian AR(1): X_t = rho X_{t-1} + e_t, e_t ~ N(0, innovation_sd^2).
/// Geometrically beta-mixing for |rho| < 1.
struct Ar1Model {
  double rho;
  double innovation_sd;

  Ar1Model(double rho, double innovation_sd);
  ContinuousModel stationary_marginal() const;
};

std::vector<double> sample_iid(const ContinuousModel& model, std::size_t n, std::uint64_t seed);
std::vector<double> sample_ar1(const Ar1Model& model, std::size_t n, std::size_t burn_in,
                               std::uint64_t seed);

struct PhiMoment {
  bool finite;
  double value;  // +inf when !finite
};

/// Integral of phi(x)^p dF(x). Divergence is decided from the model's tail
/// exponent, the finite case by adaptive Gauss-Kronrod quadrature.
PhiMoment phi_moment(const ContinuousModel& model, const WeightFunction& phi, double p);

}  // namespace qhdboot
