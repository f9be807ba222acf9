#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "qhdboot/cadlag.hpp"
#include "qhdboot/functionals.hpp"
#include "qhdboot/weight_function.hpp"

namespace qhdboot {

/// x* = inf{x : F(x) > level}; +inf when F never exceeds the level.
double kink_crossing(const CadlagFunction& F, double level);

/// False when {F = level} has positive length, i.e. F sits on the level over
/// an interval and the derivative is not defined there.
bool takes_level_once(const CadlagFunction& F, double level);

/// int_t^inf v(x) dx. Throws NonIntegrableDirection if v does not vanish at +inf
/// or its right tail is not integrable.
double tail_integral(const CadlagFunction& v, double t);

/// v -> -(1/(1-alpha)) int_{F > kink} v(x) dx at a fixed base F.
class AvarLinearization {
 public:
  AvarLinearization(const CadlagFunction& F, const AvarParams& params);

  double operator()(const CadlagFunction& v) const;
  double operator()(const StepFunction& v) const;

  double crossing() const noexcept { return crossing_; }
  bool level_taken_once() const noexcept { return once_; }

 private:
  AvarParams params_;
  double crossing_;
  bool once_;
};

/// Derivative of R at F in direction v. The default weight phi_2 satisfies
/// int 1/phi < inf; a direction with infinite phi-norm, or a weight with
/// int 1/phi = inf, raises NonIntegrableDirection.
double avar_derivative(const CadlagFunction& F, const AvarParams& params, const CadlagFunction& v,
                       const WeightFunction& phi = WeightFunction(2.0));
double avar_derivative(const StepFunction& F, const AvarParams& params, const StepFunction& v,
                       const WeightFunction& phi = WeightFunction(2.0));
double avar_derivative(const ContinuousModel& F, const AvarParams& params,
                       const CadlagFunction& v, const WeightFunction& phi = WeightFunction(2.0));

/// H_{p,F} = sum_{k>=1} k p_k F^{*(k-1)} on the severity lattice, total mass E[N]
/// up to truncation. Throws MomentDiverges when sum p_k k^r (r = max(1+lambda, 2))
/// has not settled at the truncation point.
GridPmf compound_kernel(const GridPmf& F, const CompoundParams& params, double lambda = 1.0);
GridPmf compound_kernel(const StepFunction& F, const CompoundParams& params, double lambda = 1.0);

/// x -> int v(x - y) dH(y), exact: a step function with knots at knot + lattice point.
StepFunction convolve_with_measure(const StepFunction& v, const GridPmf& H);

/// v * H_{p,F}.
StepFunction compound_derivative(const StepFunction& F, const CompoundParams& params,
                                 const StepFunction& v, double lambda = 1.0);

/// v -> Rdot at C_p(F) applied to v * H_{p,F}, evaluated as
/// -(1/(1-alpha)) sum_j H_j int_{x* - y_j}^inf v.
class CompositionLinearization {
 public:
  CompositionLinearization(const StepFunction& F, const AvarParams& avar_params,
                           const CompoundParams& compound_params, double lambda = 1.0);

  double operator()(const StepFunction& v) const;

  double crossing() const noexcept { return crossing_; }
  bool level_taken_once() const noexcept { return once_; }
  const GridPmf& kernel() const noexcept { return kernel_; }
  const StepFunction& base() const noexcept { return base_; }

 private:
  AvarParams avar_params_;
  StepFunction base_;
  GridPmf kernel_;
  double crossing_;
  bool once_;
};

double composition_derivative(const StepFunction& F, const AvarParams& avar_params,
                              const CompoundParams& compound_params, const StepFunction& v);

// ---------------------------------------------------------------- numeric checker

using ScalarFunctional = std::function<double(const CadlagFunction&)>;

struct QhdCheckConfig {
  /// theta_n.
  std::function<CadlagFunction(std::size_t)> base_sequence;
  /// v, the limit direction handed to the derivative.
  CadlagFunction direction;
  /// v_n; defaults to the constant sequence v when empty.
  std::function<CadlagFunction(std::size_t)> directions;
  /// epsilon_n.
  std::function<double(std::size_t)> scales;
  std::vector<std::size_t> n_ladder;
  double tolerance = 5e-3;
  /// Roundoff slack allowed in the monotonicity check.
  double monotone_slack = 1e-10;
};

struct QhdCheckRow {
  std::size_t n;
  double epsilon;
  double error;  // NaN when infeasible
  bool feasible;
};

struct QhdCheckResult {
  std::vector<QhdCheckRow> rows;
  bool pass;
  std::string reason;
};

/// e_n = |(H(theta_n + eps_n v_n) - H(theta_n)) / eps_n - dotH(v)| along the
/// ladder. Rows whose perturbed argument is not a CDF are flagged infeasible.
/// PASS iff the last three rows are feasible with non-increasing errors and the
/// final error is below the tolerance.
QhdCheckResult qhd_convergence_check(const ScalarFunctional& H, const ScalarFunctional& dotH,
                                     const QhdCheckConfig& cfg);

/// CSV with columns n, epsilon, error, feasible.
void write_csv(std::ostream& out, const QhdCheckResult& result);

}  // namespace qhdboot
