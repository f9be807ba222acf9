#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "qhdboot/cadlag.hpp"
#include "qhdboot/derivatives.hpp"
#include "qhdboot/error.hpp"
#include "qhdboot/functionals.hpp"

using namespace qhdboot;

namespace {

StepFunction random_cdf(std::mt19937_64& rng, int atoms, double h = 0.0) {
  std::uniform_real_distribution<double> pos(-3.0, 4.0);
  std::uniform_real_distribution<double> w(0.1, 1.0);
  std::vector<double> x(static_cast<std::size_t>(atoms));
  std::vector<double> m(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = h > 0.0 ? std::round(pos(rng) / h) * h : pos(rng);
    m[i] = w(rng);
    total += m[i];
  }
  for (auto& v : m) v /= total;
  return StepFunction::from_atoms(x, m);
}

// True when no value of F sits within 1e-6 of the level, so the crossing is a jump
// that small perturbations cannot move.
bool clear_of(const StepFunction& F, double level) {
  for (double v : F.values()) {
    if (std::abs(v - level) < 1e-6) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("derivatives") {

TEST_CASE("avar derivative examples") {
  const auto U = ContinuousModel::uniform(0.0, 1.0);
  const auto p = AvarParams::at_level(0.9);
  const CadlagFunction box(StepFunction::indicator(0.0) - StepFunction::indicator(1.0));
  CHECK(avar_derivative(U, p, box) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(avar_derivative(U, p, CadlagFunction()) == 0.0);
  CHECK(avar_derivative(U, p, 2.5 * box) == doctest::Approx(-2.5).epsilon(1e-12));
  CHECK(kink_crossing(CadlagFunction::of(U), 0.9) == doctest::Approx(0.9));
}

TEST_CASE("direction checks") {
  const auto U = ContinuousModel::uniform(0.0, 1.0);
  const auto p = AvarParams::at_level(0.9);
  const CadlagFunction box(StepFunction::indicator(0.0) - StepFunction::indicator(1.0));
  CHECK_THROWS_AS(avar_derivative(U, p, box, WeightFunction(1.0)), Error);
  CHECK_THROWS_AS(avar_derivative(U, p, CadlagFunction(StepFunction::indicator(0.0))), Error);
  try {
    avar_derivative(U, p, box, WeightFunction(0.5));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::non_integrable_direction);
  }
}

TEST_CASE("tail integral") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10; ++t) {
    const auto v = random_cdf(rng, 4) - random_cdf(rng, 5);
    for (double s : {-4.0, -0.5, 0.7, 3.0}) {
      std::vector<double> cuts{s, 5.0};
      for (double k : v.knots()) cuts.push_back(std::max(k, s));
      const double want = oracle::integrate_pieces([&](double x) { return v(x); }, cuts);
      CHECK(tail_integral(CadlagFunction(v), s) == doctest::Approx(want).epsilon(1e-10));
    }
  }
  const auto E = ContinuousModel::exponential(1.0);
  // v = delta_0 - F_exp: int_1^inf (1 - F) = e^{-1}
  const CadlagFunction v(E, -1.0, StepFunction::indicator(0.0));
  CHECK(tail_integral(v, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK_THROWS_AS(tail_integral(CadlagFunction(StepFunction::indicator(0.0)), 0.0), Error);
}

TEST_CASE("level taken once") {
  const std::vector<double> x{0.0, 1.0, 2.0};
  const std::vector<double> m{0.5, 0.4, 0.1};
  const auto F = StepFunction::from_atoms(x, m);
  CHECK_FALSE(takes_level_once(CadlagFunction(F), 0.9));
  CHECK(takes_level_once(CadlagFunction(F), 0.8));
  CHECK(takes_level_once(CadlagFunction::of(ContinuousModel::normal(0, 1)), 0.9));
  CHECK_FALSE(AvarLinearization(CadlagFunction(F), AvarParams::at_level(0.9)).level_taken_once());
}

TEST_CASE("avar derivative is linear") {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 20; ++t) {
    const auto F = random_cdf(rng, 6);
    const auto v1 = random_cdf(rng, 3) - F;
    const auto v2 = random_cdf(rng, 4) - F;
    const auto p = AvarParams::at_level(0.8);
    const double a = 0.7;
    const double b = -1.3;
    const double lhs = avar_derivative(F, p, linear_combination(a, v1, b, v2));
    const double rhs = a * avar_derivative(F, p, v1) + b * avar_derivative(F, p, v2);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("avar derivative Lipschitz bound") {
  std::mt19937_64 rng(23);
  const WeightFunction phi(2.0);
  for (int t = 0; t < 20; ++t) {
    const auto F = random_cdf(rng, 6);
    const auto v1 = random_cdf(rng, 3) - F;
    const auto v2 = random_cdf(rng, 4) - random_cdf(rng, 2);
    const double alpha = 0.75;
    const auto p = AvarParams::at_level(alpha);
    const double lhs = std::abs(avar_derivative(F, p, v1) - avar_derivative(F, p, v2));
    const double rhs = phi.inverse_integral() / (1.0 - alpha) * weighted_sup_norm(v1 - v2, phi);
    CHECK(lhs <= rhs * (1.0 + 1e-12));
  }
}

TEST_CASE("avar derivative matches finite differences on steps") {
  std::mt19937_64 rng(24);
  int tested = 0;
  while (tested < 20) {
    const auto F = random_cdf(rng, 6);
    const auto G = random_cdf(rng, 4);
    const auto p = AvarParams::at_level(0.85);
    if (!clear_of(F, p.kink)) continue;
    ++tested;
    const auto v = G - F;
    const double d = avar_derivative(F, p, v);
    double previous = INFINITY;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
      const auto Fe = linear_combination(1.0 - eps, F, eps, G);
      REQUIRE(Fe.is_cdf(1e-12));
      const double e = std::abs((avar(Fe, p) - avar(F, p)) / eps - d);
      // steps whose crossing stays put: exactly linear up to roundoff
      CHECK(e <= previous + 1e-9);
      previous = e;
    }
    CHECK(previous < 1e-8);
  }
}

TEST_CASE("avar derivative matches finite differences on models") {
  std::mt19937_64 rng(25);
  const std::vector<ContinuousModel> models{ContinuousModel::normal(0.0, 1.0),
                                            ContinuousModel::exponential(1.5),
                                            ContinuousModel::uniform(-1.0, 2.0)};
  for (const auto& M : models) {
    for (int t = 0; t < 7; ++t) {
      const auto G = random_cdf(rng, 4);
      const auto p = AvarParams::at_level(0.9);
      const CadlagFunction v(M, -1.0, G);
      const double d = avar_derivative(M, p, v);
      double previous = INFINITY;
      for (double eps : {1e-2, 1e-3, 1e-4}) {
        const CadlagFunction Fe(M, 1.0 - eps, eps * G);
        const double e = std::abs((avar(Fe, p) - avar(M, p)) / eps - d);
        CHECK(e <= previous + 1e-10);
        previous = e;
      }
      CHECK(previous < 5e-3 * (1.0 + std::abs(d)));
    }
  }
}

TEST_CASE("compound kernel") {
  CompoundParams p;
  p.lattice_step = 0.5;
  p.count = CountModel::deterministic(1);
  const auto F = StepFunction::from_atoms(std::vector<double>{0.5, 1.5}, std::vector<double>{0.3, 0.7});
  const auto H1 = compound_kernel(F, p);
  CHECK(H1.total_mass() == 1.0);
  CHECK(H1.cdf()(0.0) == 1.0);
  CHECK(H1.cdf().eval(0.0, Side::left) == 0.0);

  p.count = CountModel::poisson(2.0);
  const auto H2 = compound_kernel(F, p);
  CHECK(std::abs(H2.total_mass() - 2.0) < 1e-9);

  // m = 2 on delta_1: H = 2 delta_1, so Cdot(v)(x) = 2 v(x - 1)
  p.count = CountModel::deterministic(2);
  p.lattice_step = 1.0;
  std::mt19937_64 rng(26);
  const auto v = random_cdf(rng, 5) - random_cdf(rng, 3);
  const auto cv = compound_derivative(StepFunction::indicator(1.0), p, v);
  for (double x = -5.0; x < 7.0; x += 0.013) CHECK(cv(x) == doctest::Approx(2.0 * v(x - 1.0)).epsilon(1e-14));

  p.count = CountModel::deterministic(1);
  p.lattice_step = 0.5;
  const auto c1 = compound_derivative(F, p, v);
  for (double x = -5.0; x < 7.0; x += 0.013) CHECK(c1(x) == doctest::Approx(v(x)).epsilon(1e-14));
}

TEST_CASE("compound kernel detects an unsettled count moment") {
  CompoundParams p;
  p.lattice_step = 1.0;
  p.count = CountModel::poisson(5.0);
  p.truncation = 2;
  try {
    compound_kernel(StepFunction::indicator(1.0), p);
    FAIL("expected MomentDiverges");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::moment_diverges);
  }
}

TEST_CASE("convolution with a measure") {
  const GridPmf H(0.0, 0.5, {0.25, 0.0, 0.75});
  std::mt19937_64 rng(27);
  const auto v = random_cdf(rng, 4) - random_cdf(rng, 4);
  const auto c = convolve_with_measure(v, H);
  for (double x = -5.0; x < 7.0; x += 0.011) {
    CHECK(c(x) == doctest::Approx(0.25 * v(x) + 0.75 * v(x - 1.0)).epsilon(1e-14));
  }
}

TEST_CASE("composition derivative reduces to avar for one claim") {
  std::mt19937_64 rng(28);
  CompoundParams p;
  p.count = CountModel::deterministic(1);
  for (int t = 0; t < 10; ++t) {
    const auto F = random_cdf(rng, 5);
    const auto v = random_cdf(rng, 3) - F;
    const auto a = AvarParams::at_level(0.9);
    CHECK(composition_derivative(F, a, p, v) == doctest::Approx(avar_derivative(F, a, v)).epsilon(1e-12));
    CHECK(composition_derivative(F, a, p, StepFunction()) == 0.0);
  }
}

TEST_CASE("composition derivative matches finite differences") {
  // poisson(1) claims, severity delta_1, direction towards delta_1.5
  CompoundParams p;
  p.lattice_step = 0.5;
  p.count = CountModel::poisson(1.0);
  const auto a = AvarParams::at_level(0.9);
  const auto F = StepFunction::indicator(1.0);
  const auto G = StepFunction::indicator(1.5);
  const auto v = G - F;
  const double eps = 1e-4;
  const double d = composition_derivative(F, a, p, v);
  const double fd = (composition(linear_combination(1.0 - eps, F, eps, G), a, p) - composition(F, a, p)) / eps;
  CHECK(std::abs(fd - d) <= 1e-3 * std::abs(d));
}

TEST_CASE("chain rule coherence") {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 10; ++t) {
    CompoundParams p;
    p.lattice_step = 0.25;
    p.count = t % 2 ? CountModel::poisson(1.5) : CountModel::geometric(0.5);
    const auto F = random_cdf(rng, 4, 0.25);
    const auto v = random_cdf(rng, 3, 0.25) - F;
    const auto a = AvarParams::at_level(0.9);
    const double composed = composition_derivative(F, a, p, v);
    const auto base = compound_base_cdf(F, p);
    const double chained = avar_derivative(base, a, compound_derivative(F, p, v));
    CHECK(std::abs(composed - chained) <= 1e-8);
  }
}

TEST_CASE("checker on a linear functional") {
  const std::vector<double> pts{-0.5, 0.2, 1.1};
  auto H = [&](const CadlagFunction& F) {
    double s = 0.0;
    for (double x : pts) s += F(x);
    return s;
  };
  const auto N = ContinuousModel::normal(0.0, 1.0);
  QhdCheckConfig cfg;
  cfg.base_sequence = [&](std::size_t) { return CadlagFunction::of(N); };
  cfg.direction = CadlagFunction(N, -1.0, StepFunction::indicator(0.5));
  cfg.scales = [](std::size_t n) { return std::pow(2.0, -static_cast<double>(n)); };
  cfg.n_ladder = {2, 4, 6, 8, 10};
  const auto r = qhd_convergence_check(H, H, cfg);
  CHECK(r.pass);
  for (const auto& row : r.rows) {
    CHECK(row.feasible);
    CHECK(row.error <= 1e-12);
  }
}

TEST_CASE("checker on avar for both kink conventions") {
  const auto U = ContinuousModel::uniform(0.0, 1.0);
  const std::vector<double> atoms{0.2, 0.95};
  const std::vector<double> masses{0.5, 0.5};
  const auto G = StepFunction::from_atoms(atoms, masses);
  const CadlagFunction base = CadlagFunction::of(U);
  QhdCheckConfig cfg;
  cfg.base_sequence = [&](std::size_t) { return base; };
  cfg.direction = CadlagFunction(U, -1.0, G);
  cfg.scales = [](std::size_t n) { return std::pow(2.0, -static_cast<double>(n)); };
  cfg.n_ladder = {4, 6, 8, 10, 12, 14};
  const auto canonical = AvarParams::at_level(0.9);
  auto H = [&](const CadlagFunction& F) { return avar(F, canonical); };
  auto derivative = [&](double kink) {
    return [lin = AvarLinearization(base, {0.9, kink})](const CadlagFunction& v) { return lin(v); };
  };
  const auto right = qhd_convergence_check(H, derivative(0.9), cfg);
  CHECK(right.pass);
  CHECK(right.rows.back().error < 5e-3);
  const auto wrong = qhd_convergence_check(H, derivative(0.1), cfg);
  CHECK_FALSE(wrong.pass);
  CHECK(wrong.rows.back().error > 0.1);

  std::ostringstream os;
  write_csv(os, right);
  CHECK(os.str().rfind("n,epsilon,error,feasible\n", 0) == 0);
}

TEST_CASE("checker flags infeasible perturbations") {
  const auto U = ContinuousModel::uniform(0.0, 1.0);
  QhdCheckConfig cfg;
  cfg.base_sequence = [&](std::size_t) { return CadlagFunction::of(U); };
  // a pure downward step makes F + eps v decrease somewhere
  cfg.direction = CadlagFunction(StepFunction::indicator(0.5, -1.0) + StepFunction::indicator(0.6, 1.0));
  cfg.scales = [](std::size_t n) { return std::pow(2.0, -static_cast<double>(n)); };
  cfg.n_ladder = {1, 2, 3};
  const auto p = AvarParams::at_level(0.9);
  auto H = [&](const CadlagFunction& F) { return avar(F, p); };
  auto D = [&](const CadlagFunction& v) { return AvarLinearization(CadlagFunction::of(U), p)(v); };
  const auto r = qhd_convergence_check(H, D, cfg);
  CHECK_FALSE(r.pass);
  CHECK_FALSE(r.rows.front().feasible);
  CHECK(std::isnan(r.rows.front().error));
}

}
