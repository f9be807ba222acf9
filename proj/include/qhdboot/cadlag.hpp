#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "qhdboot/models.hpp"
#include "qhdboot/weight_function.hpp"

namespace qhdboot {

enum class Side { right, left };

/// Right-continuous step function on the real line, stored as (knot, post-jump
/// value) pairs plus the value on (-inf, knots[0]). Houses empirical and
/// bootstrap CDFs, centerings and differences of CDFs.
class StepFunction {
 public:
  /// The zero function.
  StepFunction() = default;
  StepFunction(std::vector<double> knots, std::vector<double> values,
               double value_at_minus_inf = 0.0);

  /// height * 1_{[at, inf)}.
  static StepFunction indicator(double at, double height = 1.0);
  /// CDF of the discrete measure with the given atoms; coinciding atoms are merged.
  static StepFunction from_atoms(std::span<const double> points, std::span<const double> masses);

  double operator()(double x) const { return eval(x, Side::right); }
  double eval(double x, Side side) const;

  std::span<const double> knots() const noexcept { return knots_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return knots_.size(); }
  bool empty() const noexcept { return knots_.empty(); }
  double value_at_minus_inf() const noexcept { return value_at_minus_inf_; }
  double value_at_plus_inf() const noexcept {
    return values_.empty() ? value_at_minus_inf_ : values_.back();
  }
  /// Limit at +inf; for a CDF this is its total mass.
  double total_mass() const noexcept { return value_at_plus_inf(); }

  /// Zero below the knots, non-decreasing, positive finite total mass.
  bool is_cdf(double tol = 0.0) const;

  /// x -> f(x - shift).
  StepFunction shifted(double shift) const;
  /// Drops knots whose value equals the preceding one.
  StepFunction simplified() const;

  friend StepFunction operator+(const StepFunction& a, const StepFunction& b);
  friend StepFunction operator-(const StepFunction& a, const StepFunction& b);
  friend StepFunction operator*(double c, const StepFunction& f);
  friend StepFunction operator*(const StepFunction& f, double c) { return c * f; }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  double value_at_minus_inf_ = 0.0;
};

/// ca * a + cb * b evaluated on the union of knots.
StepFunction linear_combination(double ca, const StepFunction& a, double cb, const StepFunction& b);

/// The subset of cadlag functions needed around a continuous model:
/// x -> w * F_model(x) + s(x) with s a step function. w = 0 (no model) gives a
/// plain step function; w = 1, s = 0 gives the model CDF itself.
class CadlagFunction {
 public:
  CadlagFunction() = default;
  explicit CadlagFunction(StepFunction step) : step_(std::move(step)) {}
  CadlagFunction(const ContinuousModel& model, double model_weight, StepFunction step = {})
      : model_(model), model_weight_(model_weight), step_(std::move(step)) {}

  static CadlagFunction of(const ContinuousModel& model) { return {model, 1.0}; }

  double operator()(double x) const { return eval(x, Side::right); }
  double eval(double x, Side side) const;

  const std::optional<ContinuousModel>& model() const noexcept { return model_; }
  double model_weight() const noexcept { return model_ ? model_weight_ : 0.0; }
  const StepFunction& step() const noexcept { return step_; }
  bool is_step() const noexcept { return model_weight() == 0.0; }

  double limit_at_minus_inf() const;
  double limit_at_plus_inf() const;

  /// Non-decreasing with limits 0 at -inf and a positive total mass.
  bool is_cdf(double tol = 1e-12) const;

  friend CadlagFunction operator+(const CadlagFunction& a, const CadlagFunction& b);
  friend CadlagFunction operator-(const CadlagFunction& a, const CadlagFunction& b);
  friend CadlagFunction operator*(double c, const CadlagFunction& f);

 private:
  std::optional<ContinuousModel> model_;
  double model_weight_ = 0.0;
  StepFunction step_;
};

/// sup_x |f(x)| phi(x), exact: on each constancy interval the quasi-convex phi
/// peaks at an endpoint (possibly as a left limit). Throws NormInfinite when f
/// does not vanish at an infinite end while phi is unbounded.
double weighted_sup_norm(const StepFunction& f, const WeightFunction& phi);

/// Weighted sup-norm of w F + s. Piecewise |w F + c| phi is maximised by a
/// bracketed 1-D search on each constancy interval of s.
double weighted_sup_norm(const CadlagFunction& f, const WeightFunction& phi);

/// F^{<-}(s) = inf{x : F(x) >= s} for s in (0, total mass].
double left_continuous_inverse(const StepFunction& F, double s);

/// Probability (or finite) masses on the lattice origin + i * step.
class GridPmf {
 public:
  GridPmf(double origin, double step, std::vector<double> masses);

  static GridPmf point_mass(double at, double step, double mass = 1.0);

  double origin() const noexcept { return origin_; }
  double step() const noexcept { return step_; }
  std::size_t size() const noexcept { return masses_.size(); }
  std::span<const double> masses() const noexcept { return masses_; }
  double mass(std::size_t i) const { return masses_.at(i); }
  double lattice_x(std::size_t i) const { return origin_ + static_cast<double>(i) * step_; }
  double total_mass() const noexcept { return total_mass_; }
  /// Lattice index of the origin, i.e. origin / step; throws LatticeMismatch if
  /// the origin is not a lattice multiple of the step.
  long long origin_index() const;

  double mean() const;
  /// Integral of |x|^r with respect to the masses.
  double absolute_moment(double r) const;

  /// CDF view: knots at lattice points carrying positive mass.
  StepFunction cdf() const;
  /// Removes zero masses at both ends (keeps at least one entry).
  GridPmf trimmed() const;

 private:
  double origin_;
  double step_;
  std::vector<double> masses_;
  double total_mass_;
};

/// Moves each atom of the CDF F to the nearest point of the lattice a + i h,
/// ties to the lower point. Mass is preserved exactly.
GridPmf discretize(const StepFunction& F, double h, double a, double b);

/// Cell-mass discretisation of a continuous model on a + i h: point i receives
/// F(x_i + h/2) - F(x_i - h/2); both ends absorb the outside tails.
GridPmf discretize(const ContinuousModel& model, double h, double a, double b);

// CSV. Step functions: a first line "value_at_minus_inf,<v>", then a
// "knot,value" header and one row per knot. Grids: "index,lattice_x,mass".
void write_csv(std::ostream& out, const StepFunction& f);
StepFunction read_step_function_csv(std::istream& in);
void write_csv(std::ostream& out, const GridPmf& pmf);
GridPmf read_grid_pmf_csv(std::istream& in);

}  // namespace qhdboot
