#include "qhdboot/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qhdboot/error.hpp"
#include "qhdboot/rng.hpp"

namespace qhdboot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

}  // namespace

ContinuousModel ContinuousModel::normal(double mean, double sd) {
  require(std::isfinite(mean) && std::isfinite(sd) && sd > 0.0, ErrorCode::invalid_argument,
          "normal model requires finite mean and sd > 0");
  return ContinuousModel(NormalLaw{mean, sd});
}

ContinuousModel ContinuousModel::exponential(double rate) {
  require(std::isfinite(rate) && rate > 0.0, ErrorCode::invalid_argument,
          "exponential model requires rate > 0");
  return ContinuousModel(ExponentialLaw{rate});
}

ContinuousModel ContinuousModel::uniform(double lower, double upper) {
  require(std::isfinite(lower) && std::isfinite(upper) && lower < upper,
          ErrorCode::invalid_argument, "uniform model requires lower < upper");
  return ContinuousModel(UniformLaw{lower, upper});
}

ContinuousModel ContinuousModel::pareto(double scale, double tail_index) {
  require(std::isfinite(scale) && scale > 0.0 && std::isfinite(tail_index) && tail_index > 0.0,
          ErrorCode::invalid_argument, "pareto model requires scale > 0 and tail_index > 0");
  return ContinuousModel(ParetoLaw{scale, tail_index});
}

bool operator==(const ContinuousModel& a, const ContinuousModel& b) {
  return std::visit(
      Overloaded{
          [](const NormalLaw& x, const NormalLaw& y) { return x.mean == y.mean && x.sd == y.sd; },
          [](const ExponentialLaw& x, const ExponentialLaw& y) { return x.rate == y.rate; },
          [](const UniformLaw& x, const UniformLaw& y) {
            return x.lower == y.lower && x.upper == y.upper;
          },
          [](const ParetoLaw& x, const ParetoLaw& y) {
            return x.scale == y.scale && x.tail_index == y.tail_index;
          },
          [](const auto&, const auto&) { return false; }},
      a.law_, b.law_);
}

std::string ContinuousModel::name() const {
  std::ostringstream out;
  std::visit(Overloaded{
                 [&](const NormalLaw& m) { out << "normal(" << m.mean << "," << m.sd << ")"; },
                 [&](const ExponentialLaw& m) { out << "exponential(" << m.rate << ")"; },
                 [&](const UniformLaw& m) { out << "uniform(" << m.lower << "," << m.upper << ")"; },
                 [&](const ParetoLaw& m) {
                   out << "pareto(" << m.scale << "," << m.tail_index << ")";
                 }},
             law_);
  return out.str();
}

double ContinuousModel::cdf(double x) const {
  return std::visit(
      Overloaded{
          [x](const NormalLaw& m) { return std_normal_cdf((x - m.mean) / m.sd); },
          [x](const ExponentialLaw& m) { return x <= 0.0 ? 0.0 : -std::expm1(-m.rate * x); },
          [x](const UniformLaw& m) {
            if (x <= m.lower) return 0.0;
            if (x >= m.upper) return 1.0;
            return (x - m.lower) / (m.upper - m.lower);
          },
          [x](const ParetoLaw& m) {
            return x <= m.scale ? 0.0 : 1.0 - std::pow(m.scale / x, m.tail_index);
          }},
      law_);
}

double ContinuousModel::survival(double x) const {
  return std::visit(
      Overloaded{
          [x](const NormalLaw& m) { return std_normal_cdf(-(x - m.mean) / m.sd); },
          [x](const ExponentialLaw& m) { return x <= 0.0 ? 1.0 : std::exp(-m.rate * x); },
          [this, x](const UniformLaw&) { return 1.0 - cdf(x); },
          [x](const ParetoLaw& m) {
            return x <= m.scale ? 1.0 : std::pow(m.scale / x, m.tail_index);
          }},
      law_);
}

double ContinuousModel::pdf(double x) const {
  return std::visit(
      Overloaded{
          [x](const NormalLaw& m) { return std_normal_pdf((x - m.mean) / m.sd) / m.sd; },
          [x](const ExponentialLaw& m) { return x < 0.0 ? 0.0 : m.rate * std::exp(-m.rate * x); },
          [x](const UniformLaw& m) {
            return (x < m.lower || x > m.upper) ? 0.0 : 1.0 / (m.upper - m.lower);
          },
          [x](const ParetoLaw& m) {
            return x < m.scale ? 0.0
                               : m.tail_index * std::pow(m.scale, m.tail_index) /
                                     std::pow(x, m.tail_index + 1.0);
          }},
      law_);
}

double ContinuousModel::quantile(double s) const {
  require(s > 0.0 && s < 1.0, ErrorCode::level_out_of_range, "quantile level must lie in (0,1)");
  return std::visit(
      Overloaded{
          [s](const NormalLaw& m) {
            return boost::math::quantile(boost::math::normal_distribution<>(m.mean, m.sd), s);
          },
          [s](const ExponentialLaw& m) { return -std::log1p(-s) / m.rate; },
          [s](const UniformLaw& m) { return m.lower + s * (m.upper - m.lower); },
          [s](const ParetoLaw& m) { return m.scale * std::pow(1.0 - s, -1.0 / m.tail_index); }},
      law_);
}

double ContinuousModel::level_set_start(double t) const {
  if (t < 0.0) return -kInf;
  if (t == 0.0) return support_lower();
  if (t >= 1.0) return kInf;
  return quantile(t);
}

double ContinuousModel::support_lower() const {
  return std::visit(Overloaded{[](const NormalLaw&) { return -kInf; },
                               [](const ExponentialLaw&) { return 0.0; },
                               [](const UniformLaw& m) { return m.lower; },
                               [](const ParetoLaw& m) { return m.scale; }},
                    law_);
}

double ContinuousModel::support_upper() const {
  return std::visit(Overloaded{[](const UniformLaw& m) { return m.upper; },
                               [](const auto&) { return kInf; }},
                    law_);
}

double ContinuousModel::mean() const {
  return std::visit(Overloaded{[](const NormalLaw& m) { return m.mean; },
                               [](const ExponentialLaw& m) { return 1.0 / m.rate; },
                               [](const UniformLaw& m) { return 0.5 * (m.lower + m.upper); },
                               [](const ParetoLaw& m) {
                                 return m.tail_index > 1.0
                                            ? m.tail_index * m.scale / (m.tail_index - 1.0)
                                            : kInf;
                               }},
                    law_);
}

double ContinuousModel::tail_exponent() const {
  return std::visit(Overloaded{[](const ParetoLaw& m) { return m.tail_index; },
                               [](const auto&) { return kInf; }},
                    law_);
}

double ContinuousModel::lower_tail_integral(double b) const {
  if (b == -kInf) return 0.0;
  return std::visit(
      Overloaded{
          [b](const NormalLaw& m) {
            const double z = (b - m.mean) / m.sd;
            return m.sd * (z * std_normal_cdf(z) + std_normal_pdf(z));
          },
          [b](const ExponentialLaw& m) {
            return b <= 0.0 ? 0.0 : b + std::expm1(-m.rate * b) / m.rate;
          },
          [b](const UniformLaw& m) {
            const double width = m.upper - m.lower;
            if (b <= m.lower) return 0.0;
            if (b < m.upper) return (b - m.lower) * (b - m.lower) / (2.0 * width);
            return 0.5 * width + (b - m.upper);
          },
          [b](const ParetoLaw& m) {
            if (b <= m.scale) return 0.0;
            const double a = m.tail_index;
            const double tail_part = a == 1.0 ? m.scale * std::log(b / m.scale)
                                              : std::pow(m.scale, a) *
                                                    (std::pow(b, 1.0 - a) - std::pow(m.scale, 1.0 - a)) /
                                                    (1.0 - a);
            return (b - m.scale) - tail_part;
          }},
      law_);
}

double ContinuousModel::upper_tail_integral(double a) const {
  if (a == kInf) return 0.0;
  return std::visit(
      Overloaded{
          [a](const NormalLaw& m) {
            const double z = (a - m.mean) / m.sd;
            return m.sd * (std_normal_pdf(z) - z * std_normal_cdf(-z));
          },
          [a](const ExponentialLaw& m) {
            return a <= 0.0 ? -a + 1.0 / m.rate : std::exp(-m.rate * a) / m.rate;
          },
          [a](const UniformLaw& m) {
            const double width = m.upper - m.lower;
            if (a >= m.upper) return 0.0;
            if (a > m.lower) return (m.upper - a) * (m.upper - a) / (2.0 * width);
            return (m.lower - a) + 0.5 * width;
          },
          [a](const ParetoLaw& m) {
            const double alpha = m.tail_index;
            if (alpha <= 1.0) return kInf;
            if (a <= m.scale) return (m.scale - a) + m.scale / (alpha - 1.0);
            return std::pow(m.scale, alpha) * std::pow(a, 1.0 - alpha) / (alpha - 1.0);
          }},
      law_);
}

double ContinuousModel::cdf_integral(double a, double b) const {
  require(a <= b, ErrorCode::invalid_argument, "cdf_integral requires a <= b");
  if (a == b) return 0.0;
  if (a == -kInf) return lower_tail_integral(b);
  // Pick the representation that avoids cancellation on the side of the median.
  const double upper_a = upper_tail_integral(a);
  if (!std::isfinite(upper_a) || b <= median()) return lower_tail_integral(b) - lower_tail_integral(a);
  return (b - a) - (upper_a - upper_tail_integral(b));
}

std::vector<double> sample_iid(const ContinuousModel& model, std::size_t n, std::uint64_t seed) {
  require(n >= 1, ErrorCode::invalid_argument, "sample_iid requires n >= 1");
  Rng rng = make_rng(seed);
  std::vector<double> out(n);
  std::visit(Overloaded{
                 [&](const NormalLaw& m) {
                   std::normal_distribution<double> dist(m.mean, m.sd);
                   for (auto& x : out) x = dist(rng);
                 },
                 [&](const ExponentialLaw& m) {
                   std::exponential_distribution<double> dist(m.rate);
                   for (auto& x : out) x = dist(rng);
                 },
                 [&](const UniformLaw& m) {
                   std::uniform_real_distribution<double> dist(m.lower, m.upper);
                   for (auto& x : out) x = dist(rng);
                 },
                 [&](const ParetoLaw& m) {
                   std::uniform_real_distribution<double> dist(0.0, 1.0);
                   for (auto& x : out) x = m.scale * std::pow(1.0 - dist(rng), -1.0 / m.tail_index);
                 }},
             model.law());
  return out;
}

Ar1Model::Ar1Model(double rho_, double innovation_sd_) : rho(rho_), innovation_sd(innovation_sd_) {
  require(std::isfinite(rho) && std::abs(rho) < 1.0, ErrorCode::invalid_argument,
          "AR(1) requires |rho| < 1");
  require(std::isfinite(innovation_sd) && innovation_sd > 0.0, ErrorCode::invalid_argument,
          "AR(1) requires innovation_sd > 0");
}

ContinuousModel Ar1Model::stationary_marginal() const {
  return ContinuousModel::normal(0.0, innovation_sd / std::sqrt(1.0 - rho * rho));
}

std::vector<double> sample_ar1(const Ar1Model& model, std::size_t n, std::size_t burn_in,
                               std::uint64_t seed) {
  require(n >= 1, ErrorCode::invalid_argument, "sample_ar1 requires n >= 1");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> innovation(0.0, model.innovation_sd);
  const double stationary_sd = model.innovation_sd / std::sqrt(1.0 - model.rho * model.rho);
  double x = std::normal_distribution<double>(0.0, stationary_sd)(rng);
  for (std::size_t t = 0; t < burn_in; ++t) x = model.rho * x + innovation(rng);
  std::vector<double> out(n);
  out[0] = x;
  for (std::size_t t = 1; t < n; ++t) {
    x = model.rho * x + innovation(rng);
    out[t] = x;
  }
  return out;
}

PhiMoment phi_moment(const ContinuousModel& model, const WeightFunction& phi, double p) {
  require(p >= 1.0, ErrorCode::invalid_argument, "phi_moment requires p >= 1");
  const double power = phi.lambda() * p;
  if (power >= model.tail_exponent()) return {false, kInf};
  if (power == 0.0) return {true, 1.0};

  using boost::math::quadrature::gauss_kronrod;
  auto integrand = [&](double x) { return std::pow(1.0 + std::abs(x), power) * model.pdf(x); };
  const double lo = model.support_lower();
  const double hi = model.support_upper();
  double total = 0.0;
  auto piece = [&](double a, double b) {
    if (a < b) total += gauss_kronrod<double, 61>::integrate(integrand, a, b, 20, 1e-12);
  };
  // |x| has a kink at 0; integrate the two sides separately.
  if (lo < 0.0 && hi > 0.0) {
    piece(lo, 0.0);
    piece(0.0, hi);
  } else {
    piece(lo, hi);
  }
  return {true, total};
}

// ---------------------------------------------------------------- counts

CountModel CountModel::poisson(double mean) {
  require(std::isfinite(mean) && mean > 0.0, ErrorCode::invalid_argument,
          "poisson count requires mean > 0");
  return CountModel(PoissonCount{mean});
}

CountModel CountModel::geometric(double q) {
  require(q > 0.0 && q <= 1.0, ErrorCode::invalid_argument, "geometric count requires q in (0,1]");
  return CountModel(GeometricCount{q});
}

CountModel CountModel::binomial(std::size_t trials, double q) {
  require(q >= 0.0 && q <= 1.0, ErrorCode::invalid_argument, "binomial count requires q in [0,1]");
  return CountModel(BinomialCount{trials, q});
}

CountModel CountModel::deterministic(std::size_t value) {
  return CountModel(DeterministicCount{value});
}

std::string CountModel::name() const {
  std::ostringstream out;
  std::visit(Overloaded{[&](const PoissonCount& c) { out << "poisson(" << c.mean << ")"; },
                        [&](const GeometricCount& c) { out << "geometric(" << c.q << ")"; },
                        [&](const BinomialCount& c) {
                          out << "binomial(" << c.trials << "," << c.q << ")";
                        },
                        [&](const DeterministicCount& c) {
                          out << "deterministic(" << c.value << ")";
                        }},
             law_);
  return out.str();
}

double CountModel::pmf(std::size_t k) const {
  return std::visit(
      Overloaded{
          [k](const PoissonCount& c) {
            const double kd = static_cast<double>(k);
            return std::exp(kd * std::log(c.mean) - c.mean - std::lgamma(kd + 1.0));
          },
          [k](const GeometricCount& c) {
            return c.q * std::pow(1.0 - c.q, static_cast<double>(k));
          },
          [k](const BinomialCount& c) {
            if (k > c.trials) return 0.0;
            return boost::math::pdf(
                boost::math::binomial_distribution<>(static_cast<double>(c.trials), c.q),
                static_cast<double>(k));
          },
          [k](const DeterministicCount& c) { return k == c.value ? 1.0 : 0.0; }},
      law_);
}

double CountModel::mean() const {
  return std::visit(
      Overloaded{[](const PoissonCount& c) { return c.mean; },
                 [](const GeometricCount& c) { return (1.0 - c.q) / c.q; },
                 [](const BinomialCount& c) { return static_cast<double>(c.trials) * c.q; },
                 [](const DeterministicCount& c) { return static_cast<double>(c.value); }},
      law_);
}

std::size_t CountModel::support_max() const {
  return std::visit(Overloaded{[](const BinomialCount& c) { return c.trials; },
                               [](const DeterministicCount& c) { return c.value; },
                               [](const GeometricCount& c) {
                                 return c.q == 1.0 ? std::size_t{0}
                                                   : std::numeric_limits<std::size_t>::max();
                               },
                               [](const auto&) { return std::numeric_limits<std::size_t>::max(); }},
                    law_);
}

std::size_t CountModel::truncation_point(double budget, std::size_t max_k) const {
  require(budget > 0.0, ErrorCode::invalid_argument, "truncation budget must be > 0");
  const std::size_t top = std::min(support_max(), max_k);
  double mass = 0.0;
  for (std::size_t k = 0; k <= top; ++k) {
    mass += pmf(k);
    if (1.0 - mass < budget) return k;
  }
  return top;
}

double CountModel::mass_up_to(std::size_t K) const {
  double mass = 0.0;
  const std::size_t top = std::min(K, support_max());
  for (std::size_t k = 0; k <= top; ++k) mass += pmf(k);
  return mass;
}

double CountModel::moment_up_to(std::size_t K, double r) const {
  double total = 0.0;
  const std::size_t top = std::min(K, support_max());
  for (std::size_t k = 1; k <= top; ++k) total += pmf(k) * std::pow(static_cast<double>(k), r);
  return total;
}

}  // namespace qhdboot
