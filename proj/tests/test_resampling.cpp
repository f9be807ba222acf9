#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "qhdboot/cadlag.hpp"
#include "qhdboot/error.hpp"
#include "qhdboot/models.hpp"
#include "qhdboot/resampling.hpp"

using namespace qhdboot;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_SUITE("resampling") {

TEST_CASE("empirical cdf merges ties") {
  const std::vector<double> x{5.0, 5.0};
  const auto F = empirical_cdf(x);
  REQUIRE(F.size() == 1);
  CHECK(F.knots()[0] == 5.0);
  CHECK(F.values()[0] == 1.0);
  CHECK_THROWS_AS(empirical_cdf(std::vector<double>{}), Error);
}

TEST_CASE("blockwise weights from given starts") {
  const std::vector<std::size_t> starts{1, 1, 5};
  const auto w = blockwise_weights_from_starts(6, 2, starts);
  CHECK(w.weights == std::vector<double>{2, 2, 0, 0, 1, 1});
  CHECK(w.block_count == 3);
  // n = 7, l = 3: blocks of length 3, 3 and 1
  const std::vector<std::size_t> s2{1, 5, 2};
  const auto w2 = blockwise_weights_from_starts(7, 3, s2);
  CHECK(w2.weights == std::vector<double>{1, 2, 1, 0, 1, 1, 1});
  CHECK(sum(w2.weights) == 7.0);
  CHECK_THROWS_AS(blockwise_weights_from_starts(6, 2, std::vector<std::size_t>{1, 6, 1}), Error);
  CHECK_THROWS_AS(blockwise_weights_from_starts(6, 2, std::vector<std::size_t>{1, 1}), Error);
}

TEST_CASE("blockwise weights sum to n") {
  for (std::size_t n : {5u, 10u, 37u, 100u}) {
    for (std::size_t l : {1u, 2u, 3u}) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto w = blockwise_weights(n, l, seed);
        CHECK(sum(w.weights) == static_cast<double>(n));
        CHECK(w.block_count == (n + l - 1) / l);
        CHECK(std::all_of(w.weights.begin(), w.weights.end(), [](double x) { return x >= 0.0; }));
      }
    }
  }
}

TEST_CASE("expected blockwise weights") {
  const auto w = blockwise_expected_weights(10, 3);
  REQUIRE(w.size() == 10);
  // middle indices are covered by three full blocks and the trailing length-1 block
  CHECK(w[4] == doctest::Approx(3.0 * 3.0 / 8.0 + 1.0 / 8.0));
  CHECK(w[4] == doctest::Approx(1.25));
  CHECK(sum(w) == doctest::Approx(10.0));
  for (std::size_t n : {4u, 10u, 33u, 100u, 257u}) {
    for (std::size_t l = 1; 2 * l <= n; ++l) {
      const auto got = blockwise_expected_weights(n, l);
      const auto want = oracle::expected_block_cover(n, l);
      for (std::size_t i = 0; i < n; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
      CHECK(sum(got) == doctest::Approx(static_cast<double>(n)).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(blockwise_expected_weights(10, 0), Error);
  CHECK_THROWS_AS(blockwise_expected_weights(10, 10), Error);
  CHECK_THROWS_AS(blockwise_expected_weights(10, 6), Error);
}

TEST_CASE("block length policy") {
  CHECK(block_length_for(1000, 0.4) == 16);
  CHECK(block_length_for(100, 0.5) == 10);
  CHECK_THROWS_AS(block_length_for(100, 1.0), Error);
  CHECK_THROWS_AS(block_length_for(100, 0.0), Error);
}

TEST_CASE("exchangeable schemes") {
  const std::size_t n = 200;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto e = exchangeable_weights(Scheme::efron, n, seed);
    CHECK(sum(e.weights) == static_cast<double>(n));
    CHECK(std::all_of(e.weights.begin(), e.weights.end(),
                      [](double x) { return x >= 0.0 && x == std::floor(x); }));
    const auto b = exchangeable_weights(Scheme::bayesian, n, seed);
    CHECK(sum(b.weights) == doctest::Approx(static_cast<double>(n)).epsilon(1e-12));
    CHECK(std::all_of(b.weights.begin(), b.weights.end(), [](double x) { return x > 0.0; }));
  }
  // wild weights are Exp(1): mean 1, variance 1
  const auto w = exchangeable_weights(Scheme::wild, 200000, 3);
  const double m = sum(w.weights) / 200000.0;
  double v = 0.0;
  for (double x : w.weights) v += (x - m) * (x - m);
  v /= 200000.0;
  CHECK(std::abs(m - 1.0) < 0.01);
  CHECK(std::abs(v - 1.0) < 0.03);
  CHECK(exchangeable_weights(Scheme::efron, 50, 8).weights ==
        exchangeable_weights(Scheme::efron, 50, 8).weights);
  CHECK_THROWS_AS(exchangeable_weights(Scheme::blockwise, 10, 1), Error);
}

TEST_CASE("scheme names round trip") {
  for (auto s : {Scheme::efron, Scheme::bayesian, Scheme::wild, Scheme::blockwise}) {
    CHECK(parse_scheme(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_scheme("jackknife"), Error);
}

TEST_CASE("bootstrap cdf is a cdf with the mean weight as mass") {
  const auto x = sample_iid(ContinuousModel::normal(0, 1), 300, 12);
  for (auto s : {Scheme::efron, Scheme::bayesian, Scheme::wild}) {
    const auto w = exchangeable_weights(s, x.size(), 4);
    const auto F = bootstrap_cdf(x, w);
    CHECK(F.is_cdf(1e-12));
    CHECK(F.total_mass() == doctest::Approx(sum(w.weights) / 300.0).epsilon(1e-12));
  }
  const auto wb = blockwise_weights(x.size(), 7, 4);
  CHECK(bootstrap_cdf(x, wb).total_mass() == doctest::Approx(1.0));
}

TEST_CASE("weighted empirical matches direct construction") {
  const auto x = sample_iid(ContinuousModel::exponential(1.0), 150, 5);
  std::vector<double> xd = x;
  xd[3] = xd[7];  // a tie
  const WeightedEmpirical we(xd);
  const auto w = exchangeable_weights(Scheme::bayesian, xd.size(), 6);
  const auto fast = we.cdf(w.weights);
  std::vector<double> m(w.weights.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = w.weights[i] / 150.0;
  const auto slow = StepFunction::from_atoms(xd, m);
  REQUIRE(fast.size() == slow.size());
  for (std::size_t i = 0; i < fast.size(); ++i) {
    CHECK(fast.knots()[i] == slow.knots()[i]);
    CHECK(fast.values()[i] == doctest::Approx(slow.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("centering") {
  const std::vector<double> x{0.3, 0.1, 0.9, 0.5};
  const auto e = exchangeable_weights(Scheme::efron, 4, 1);
  const auto C = centering(x, e);
  const auto Fn = empirical_cdf(x);
  for (double t : {0.0, 0.1, 0.3, 0.6, 1.0}) CHECK(C(t) == doctest::Approx(Fn(t)));
  const auto wild = exchangeable_weights(Scheme::wild, 4, 1);
  const double mean = sum(wild.weights) / 4.0;
  CHECK(centering(x, wild)(1.0) == doctest::Approx(mean));
  const std::vector<double> y{1, 2, 3, 4, 5, 6};
  const auto bw = blockwise_weights(6, 2, 1);
  const auto Cb = centering(y, bw);
  const auto ew = blockwise_expected_weights(6, 2);
  double acc = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    acc += ew[i] / 6.0;
    CHECK(Cb(y[i]) == doctest::Approx(acc));
  }
}

TEST_CASE("empirical cdf obeys the DKW bound") {
  // P(sup |F_n - F| > eps) <= 2 exp(-2 n eps^2); eps below gives 1e-6
  const std::size_t n = 5000;
  const double eps = std::sqrt(std::log(2.0 / 1e-6) / (2.0 * n));
  const auto U = ContinuousModel::uniform(0.0, 1.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto Fn = empirical_cdf(sample_iid(U, n, seed));
    double d = 0.0;
    for (std::size_t i = 0; i < Fn.size(); ++i) {
      const double t = Fn.knots()[i];
      d = std::max({d, std::abs(Fn.values()[i] - t), std::abs(Fn.eval(t, Side::left) - t)});
    }
    CHECK(d < eps);
  }
}

TEST_CASE("weights csv") {
  const auto w = blockwise_weights(6, 2, 3);
  const auto ew = blockwise_expected_weights(6, 2);
  std::ostringstream os;
  write_weights_csv(os, w, ew);
  const std::string s = os.str();
  CHECK(s.rfind("i,W_ni,w_ni\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 7);
}

}
