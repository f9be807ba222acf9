#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "qhdboot/error.hpp"
#include "qhdboot/harness.hpp"
#include "qhdboot/models.hpp"
#include "qhdboot/resampling.hpp"

using namespace qhdboot;

TEST_SUITE("models") {

TEST_CASE("cdf and quantile examples") {
  CHECK(ContinuousModel::normal(0, 1).cdf(0.0) == doctest::Approx(0.5));
  CHECK(ContinuousModel::exponential(1).cdf(0.0) == 0.0);
  CHECK(ContinuousModel::uniform(0, 1).cdf(0.25) == doctest::Approx(0.25));
  CHECK(ContinuousModel::uniform(0, 1).quantile(0.9) == doctest::Approx(0.9));
  CHECK(ContinuousModel::exponential(1).quantile(0.95) == doctest::Approx(-std::log(0.05)));
  CHECK(ContinuousModel::normal(0, 1).quantile(0.5) == doctest::Approx(0.0));
  CHECK_THROWS_AS(ContinuousModel::uniform(0, 1).quantile(0.0), Error);
  CHECK_THROWS_AS(ContinuousModel::normal(0, 1).quantile(1.0), Error);
}

TEST_CASE("parameters are validated") {
  CHECK_THROWS_AS(ContinuousModel::normal(0, 0), Error);
  CHECK_THROWS_AS(ContinuousModel::exponential(-1), Error);
  CHECK_THROWS_AS(ContinuousModel::uniform(1, 1), Error);
  CHECK_THROWS_AS(ContinuousModel::pareto(1, 0), Error);
  CHECK_THROWS_AS(Ar1Model(1.0, 1.0), Error);
  CHECK_THROWS_AS(Ar1Model(0.5, 0.0), Error);
}

TEST_CASE("quantile inverts cdf on the support interior") {
  const std::vector<ContinuousModel> models{
      ContinuousModel::normal(1.0, 2.0), ContinuousModel::exponential(0.5),
      ContinuousModel::uniform(-1.0, 3.0), ContinuousModel::pareto(2.0, 3.0)};
  for (const auto& m : models) {
    for (double s = 0.01; s < 1.0; s += 0.01) {
      CHECK(m.cdf(m.quantile(s)) == doctest::Approx(s).epsilon(1e-10));
      const double x = m.quantile(s);
      CHECK(m.quantile(m.cdf(x)) == doctest::Approx(x).epsilon(1e-9));
    }
  }
}

TEST_CASE("level set start") {
  const auto U = ContinuousModel::uniform(0.0, 1.0);
  CHECK(U.level_set_start(0.9) == doctest::Approx(0.9));
  CHECK(U.level_set_start(1.0) == INFINITY);
  CHECK(U.level_set_start(-0.1) == -INFINITY);
  const auto N = ContinuousModel::normal(0.0, 1.0);
  CHECK(N.level_set_start(0.5) == doctest::Approx(0.0));
}

TEST_CASE("partial integrals agree with quadrature") {
  const std::vector<ContinuousModel> models{
      ContinuousModel::normal(0.5, 1.5), ContinuousModel::exponential(2.0),
      ContinuousModel::uniform(-1.0, 2.0), ContinuousModel::pareto(1.0, 2.5)};
  for (const auto& m : models) {
    auto F = [&](double x) { return m.cdf(x); };
    auto S = [&](double x) { return 1.0 - m.cdf(x); };
    const double a = m.quantile(0.1);
    const double b = m.quantile(0.8);
    CHECK(m.cdf_integral(a, b) == doctest::Approx(oracle::integrate(F, a, b)).epsilon(1e-9));
    const double lo = std::isfinite(m.support_lower()) ? m.support_lower() : m.quantile(1e-15) - 1.0;
    CHECK(m.lower_tail_integral(b) == doctest::Approx(oracle::integrate(F, lo, b)).epsilon(1e-8));
  }
  const auto E = ContinuousModel::exponential(2.0);
  CHECK(E.upper_tail_integral(1.0) == doctest::Approx(std::exp(-2.0) / 2.0));
  const auto P = ContinuousModel::pareto(1.0, 2.5);
  CHECK(P.upper_tail_integral(2.0) == doctest::Approx(std::pow(2.0, -1.5) / 1.5));
  CHECK(ContinuousModel::pareto(1.0, 0.8).upper_tail_integral(2.0) == INFINITY);
}

TEST_CASE("phi moments") {
  CHECK(phi_moment(ContinuousModel::normal(0, 1), WeightFunction(1.0), 4.0).finite);
  CHECK_FALSE(phi_moment(ContinuousModel::pareto(1, 3), WeightFunction(1.0), 4.0).finite);
  const auto m = phi_moment(ContinuousModel::uniform(0, 1), WeightFunction(2.0), 2.0);
  REQUIRE(m.finite);
  CHECK(m.value == doctest::Approx(6.2).epsilon(1e-6));
  // E(1+X)^2 for exponential(1): 1 + 2 + 2 = 5
  CHECK(phi_moment(ContinuousModel::exponential(1.0), WeightFunction(1.0), 2.0).value ==
        doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("count models") {
  const auto poisson = CountModel::poisson(2.0);
  const std::size_t K = poisson.truncation_point(1e-10);
  CHECK(1.0 - poisson.mass_up_to(K) < 1e-10);
  CHECK(poisson.mass_up_to(K) <= 1.0);
  CHECK(1.0 - poisson.mass_up_to(K - 1) >= 1e-10);
  CHECK(poisson.pmf(0) == doctest::Approx(std::exp(-2.0)));
  CHECK(poisson.moment_up_to(K, 1.0) == doctest::Approx(2.0).epsilon(1e-9));
  const auto geo = CountModel::geometric(0.25);
  CHECK(geo.pmf(2) == doctest::Approx(0.25 * 0.75 * 0.75));
  CHECK(geo.moment_up_to(geo.truncation_point(1e-12), 1.0) == doctest::Approx(3.0).epsilon(1e-8));
  const auto bin = CountModel::binomial(4, 0.5);
  CHECK(bin.pmf(2) == doctest::Approx(6.0 / 16.0));
  CHECK(bin.support_max() == 4);
  CHECK(bin.pmf(5) == 0.0);
  const auto det = CountModel::deterministic(3);
  CHECK(det.pmf(3) == 1.0);
  CHECK(det.truncation_point(1e-10) == 3);
  CHECK_THROWS_AS(CountModel::poisson(-1.0), Error);
  CHECK_THROWS_AS(CountModel::geometric(0.0), Error);
}

TEST_CASE("iid sampling") {
  const auto U = ContinuousModel::uniform(0.0, 1.0);
  CHECK(sample_iid(U, 3, 42) == sample_iid(U, 3, 42));
  CHECK(sample_iid(U, 3, 42) != sample_iid(U, 3, 43));
  CHECK_THROWS_AS(sample_iid(U, 0, 1), Error);
  const auto x = sample_iid(U, 100000, 7);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / 1e5;
  CHECK(std::abs(mean - 0.5) < 0.01);
}

TEST_CASE("ar1 sampling") {
  const Ar1Model model(0.5, 1.0);
  CHECK(sample_ar1(model, 50, 0, 9) == sample_ar1(model, 50, 0, 9));
  const auto x = sample_ar1(model, 100000, 0, 10);
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double c0 = 0.0;
  double c1 = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    c0 += (x[t] - mean) * (x[t] - mean);
    if (t + 1 < x.size()) c1 += (x[t] - mean) * (x[t + 1] - mean);
  }
  CHECK(std::abs(c1 / c0 - 0.5) < 0.02);
  CHECK(c0 / n == doctest::Approx(1.0 / 0.75).epsilon(0.03));
  CHECK(model.stationary_marginal().quantile(0.975) ==
        doctest::Approx(1.959963985 / std::sqrt(0.75)).epsilon(1e-8));
}

TEST_CASE("ar1 with rho 0 matches iid normal in distribution") {
  // seeds fixed: 101 for the AR path, 202 for the iid sample
  const auto a = sample_ar1(Ar1Model(0.0, 1.0), 10000, 0, 101);
  const auto b = sample_iid(ContinuousModel::normal(0.0, 1.0), 10000, 202);
  const double d = ks_distance(a, b);
  // two-sample KS p > 0.001 needs sqrt(n m / (n + m)) d < 1.949
  CHECK(std::sqrt(5000.0) * d < 1.949);
}

}
