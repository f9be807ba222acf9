#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "qhdboot/cadlag.hpp"
#include "qhdboot/models.hpp"

namespace qhdboot {

/// Level alpha of the Average Value at Risk and the argument level `kink` at
/// which g(t) = max(t - kink, 0) / (1 - alpha) bends. The functional itself is
/// only finite for kink = alpha; the other value exists so that the derivative's
/// indicator convention can be tested.
struct AvarParams {
  double alpha = 0.9;
  double kink = 0.9;

  static AvarParams at_level(double alpha) { return {alpha, alpha}; }

  void validate() const;
  double g(double t) const { return std::max(t - kink, 0.0) / (1.0 - alpha); }
};

struct CompoundParams {
  CountModel count = CountModel::deterministic(1);
  double lattice_step = 0.01;
  double tail_budget = 1e-10;
  /// Overrides the truncation derived from tail_budget.
  std::optional<std::size_t> truncation;
  /// Discretisation range for severities; derived from the knots when absent.
  std::optional<std::pair<double, double>> range;

  void validate() const;
  std::size_t truncation_point() const;
};

/// R(F) = -int_{-inf}^0 g(F(x)) dx + int_0^inf (1 - g(F(x))) dx, exact on each
/// constancy interval of the step part and through the model's partial
/// integrals of F and 1 - F elsewhere. Throws NonIntegrable when an end of the
/// integrand does not vanish.
double avar(const CadlagFunction& F, const AvarParams& params);
double avar(const StepFunction& F, const AvarParams& params);
double avar(const ContinuousModel& F, const AvarParams& params);

/// R(A) - R(B) = int (g(B(x)) - g(A(x))) dx for step functions with equal limits
/// at both ends. Finite even when the total mass differs from 1 (wild bootstrap).
double avar_difference(const StepFunction& a, const StepFunction& b, const AvarParams& params);

/// Mass vector of the sum of independent lattice variables.
GridPmf convolve_pmf(const GridPmf& a, const GridPmf& b);

/// a^{*k} by binary exponentiation; a^{*0} is the unit mass at 0.
GridPmf k_fold(const GridPmf& a, std::size_t k);

/// sum_i c_i pmf_i on the union lattice. All origins must differ by lattice multiples.
GridPmf mix_pmf(const std::vector<std::pair<double, GridPmf>>& terms);

/// H_k(G1, G2) = sum_{j=0}^{k-1} G1^{*(k-1-j)} * G2^{*j}.
GridPmf telescoping_kernel(const GridPmf& g1, const GridPmf& g2, std::size_t k);

struct CompoundResult {
  GridPmf pmf;
  double truncation_deficit;  // sum of p_k over k > truncation
  std::size_t truncation;

  StepFunction cdf() const { return pmf.cdf(); }
  /// CDF with the truncation deficit placed on the top lattice point.
  StepFunction closed_cdf() const;
};

/// sum_{k <= K} p_k F^{*k} on the lattice h Z.
CompoundResult compound_cdf(const GridPmf& F, const CompoundParams& params);
CompoundResult compound_cdf(const StepFunction& F, const CompoundParams& params);

/// Severity lattice used for F: the given range, or the knot range rounded out to h Z.
GridPmf severity_lattice(const StepFunction& F, const CompoundParams& params);

/// C_p(F) as a step CDF. Exact for deterministic counts 0 and 1, closed lattice
/// CDF otherwise.
StepFunction compound_base_cdf(const StepFunction& F, const CompoundParams& params);

/// T(F) = R(C_p(F)).
double composition(const StepFunction& F, const AvarParams& avar_params,
                   const CompoundParams& compound_params);

/// CSV with columns lattice_x, mass, cdf.
void write_compound_csv(std::ostream& out, const CompoundResult& result);

}  // namespace qhdboot
