#include "qhdboot/derivatives.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <utility>

#include "qhdboot/error.hpp"
#include "qhdboot/parallel.hpp"

namespace qhdboot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kVanishTol = 1e-12;

// Calls f(l, r, c) for the constancy intervals [l, r) of the step part,
// starting with (-inf, k_0) and ending with [k_last, inf).
template <class F>
void for_each_piece(const StepFunction& s, F&& f) {
  const auto knots = s.knots();
  const auto values = s.values();
  double left = -kInf;
  double value = s.value_at_minus_inf();
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (f(left, knots[i], value)) return;
    left = knots[i];
    value = values[i];
  }
  f(left, kInf, value);
}

// Integrals int_t^inf v for a step v vanishing at +inf, via suffix sums.
class StepTail {
 public:
  explicit StepTail(const StepFunction& v) : v_(v), suffix_(v.size() + 1, 0.0) {
    require(std::abs(v.value_at_plus_inf()) <= kVanishTol, ErrorCode::non_integrable_direction,
            "direction does not vanish at +inf");
    const auto knots = v.knots();
    const auto values = v.values();
    for (std::size_t i = knots.size(); i-- > 1;) {
      suffix_[i - 1] = suffix_[i] + values[i - 1] * (knots[i] - knots[i - 1]);
    }
  }

  double operator()(double t) const {
    if (t == kInf) return 0.0;
    const auto knots = v_.knots();
    const auto it = std::upper_bound(knots.begin(), knots.end(), t);
    if (it == knots.end()) return 0.0;
    const auto i = static_cast<std::size_t>(it - knots.begin());
    const double here = i == 0 ? v_.value_at_minus_inf() : v_.values()[i - 1];
    if (t == -kInf) {
      require(std::abs(here) <= kVanishTol, ErrorCode::non_integrable_direction,
              "direction does not vanish at -inf");
      return suffix_[0];
    }
    return here * (knots[i] - t) + suffix_[i];
  }

 private:
  const StepFunction& v_;
  std::vector<double> suffix_;
};

bool is_deterministic(const CountModel& count, std::size_t value) {
  const auto* fixed = std::get_if<DeterministicCount>(&count.law());
  return fixed != nullptr && fixed->value == value;
}

}  // namespace

double kink_crossing(const CadlagFunction& F, double level) {
  const double w = F.model_weight();
  double crossing = kInf;
  for_each_piece(F.step(), [&](double l, double r, double c) {
    double candidate;
    if (w == 0.0) {
      candidate = c > level ? l : kInf;
    } else {
      candidate = std::max(l, F.model()->level_set_start((level - c) / w));
    }
    if (candidate < r) {
      crossing = candidate;
      return true;
    }
    return false;
  });
  return crossing;
}

bool takes_level_once(const CadlagFunction& F, double level) {
  const double w = F.model_weight();
  bool once = true;
  for_each_piece(F.step(), [&](double l, double r, double c) {
    if (w == 0.0) {
      if (c == level) once = false;
    } else {
      const double t = (level - c) / w;
      const auto& model = *F.model();
      if (t == 0.0 && l < model.support_lower()) once = false;
      if (t == 1.0 && model.support_upper() < r) once = false;
    }
    return !once;
  });
  return once;
}

double tail_integral(const CadlagFunction& v, double t) {
  if (t == kInf) return 0.0;
  const double a = v.model_weight();
  if (a == 0.0) return StepTail(v.step())(t);

  const auto& model = *v.model();
  require(std::abs(v.limit_at_plus_inf()) <= kVanishTol * std::max(1.0, std::abs(a)),
          ErrorCode::non_integrable_direction, "direction does not vanish at +inf");
  double total = 0.0;
  for_each_piece(v.step(), [&](double l, double r, double c) {
    if (r <= t) return false;
    const double lo = std::max(l, t);
    if (lo == -kInf) {
      require(std::abs(c) <= kVanishTol, ErrorCode::non_integrable_direction,
              "direction does not vanish at -inf");
      total += a * model.lower_tail_integral(r);
    } else if (r == kInf) {
      const double tail = model.upper_tail_integral(lo);
      require(std::isfinite(tail), ErrorCode::non_integrable_direction,
              "direction has a non-integrable right tail");
      total -= a * tail;
    } else {
      total += a * model.cdf_integral(lo, r) + c * (r - lo);
    }
    return false;
  });
  return total;
}

// ---------------------------------------------------------------- AVaR

AvarLinearization::AvarLinearization(const CadlagFunction& F, const AvarParams& params)
    : params_(params) {
  params.validate();
  crossing_ = kink_crossing(F, params.kink);
  once_ = takes_level_once(F, params.kink);
}

double AvarLinearization::operator()(const CadlagFunction& v) const {
  return -tail_integral(v, crossing_) / (1.0 - params_.alpha);
}

double AvarLinearization::operator()(const StepFunction& v) const {
  return -StepTail(v)(crossing_) / (1.0 - params_.alpha);
}

namespace {

void require_direction(const CadlagFunction& v, const WeightFunction& phi) {
  require(std::isfinite(phi.inverse_integral()), ErrorCode::non_integrable_direction,
          "the weight needs int 1/phi < inf (lambda > 1)");
  try {
    (void)weighted_sup_norm(v, phi);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::norm_infinite) throw;
    fail(ErrorCode::non_integrable_direction, std::string("direction outside D_phi: ") + e.what());
  }
}

}  // namespace

double avar_derivative(const CadlagFunction& F, const AvarParams& params, const CadlagFunction& v,
                       const WeightFunction& phi) {
  require_direction(v, phi);
  return AvarLinearization(F, params)(v);
}

double avar_derivative(const StepFunction& F, const AvarParams& params, const StepFunction& v,
                       const WeightFunction& phi) {
  return avar_derivative(CadlagFunction(F), params, CadlagFunction(v), phi);
}

double avar_derivative(const ContinuousModel& F, const AvarParams& params,
                       const CadlagFunction& v, const WeightFunction& phi) {
  return avar_derivative(CadlagFunction::of(F), params, v, phi);
}

// ---------------------------------------------------------------- compound

GridPmf compound_kernel(const GridPmf& F, const CompoundParams& params, double lambda) {
  params.validate();
  require(lambda >= 0.0, ErrorCode::invalid_argument, "lambda must be >= 0");
  (void)F.origin_index();
  const std::size_t K = params.truncation_point();
  const double r = std::max(1.0 + lambda, 2.0);
  const double settled = params.count.moment_up_to(K, r);
  const double extended = params.count.moment_up_to(4 * K + 8, r);
  require(extended - settled <= 1e-6 * std::max(1.0, settled), ErrorCode::moment_diverges,
          "sum p_k k^r has not settled at the truncation point");

  std::vector<std::pair<double, GridPmf>> terms;
  GridPmf power = GridPmf::point_mass(0.0, F.step());
  for (std::size_t k = 1; k <= K; ++k) {
    if (k > 1) power = convolve_pmf(power, F);
    const double weight = static_cast<double>(k) * params.count.pmf(k);
    if (weight > 0.0) terms.emplace_back(weight, power);
  }
  if (terms.empty()) return GridPmf::point_mass(0.0, F.step(), 0.0);
  return mix_pmf(terms);
}

GridPmf compound_kernel(const StepFunction& F, const CompoundParams& params, double lambda) {
  if (is_deterministic(params.count, 1)) return GridPmf::point_mass(0.0, params.lattice_step);
  return compound_kernel(severity_lattice(F, params), params, lambda);
}

StepFunction convolve_with_measure(const StepFunction& v, const GridPmf& H) {
  const auto knots = v.knots();
  const auto values = v.values();
  std::vector<std::pair<double, double>> events;
  events.reserve(knots.size() * H.size());
  for (std::size_t j = 0; j < H.size(); ++j) {
    const double mass = H.mass(j);
    if (mass == 0.0) continue;
    const double y = H.lattice_x(j);
    double previous = v.value_at_minus_inf();
    for (std::size_t i = 0; i < knots.size(); ++i) {
      events.emplace_back(knots[i] + y, (values[i] - previous) * mass);
      previous = values[i];
    }
  }
  std::sort(events.begin(), events.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double current = v.value_at_minus_inf() * H.total_mass();
  std::vector<double> out_knots;
  std::vector<double> out_values;
  for (const auto& [x, jump] : events) {
    current += jump;
    if (!out_knots.empty() && out_knots.back() == x) {
      out_values.back() = current;
    } else {
      out_knots.push_back(x);
      out_values.push_back(current);
    }
  }
  return StepFunction(std::move(out_knots), std::move(out_values),
                      v.value_at_minus_inf() * H.total_mass());
}

StepFunction compound_derivative(const StepFunction& F, const CompoundParams& params,
                                 const StepFunction& v, double lambda) {
  if (is_deterministic(params.count, 1)) return v;
  return convolve_with_measure(v, compound_kernel(F, params, lambda));
}

CompositionLinearization::CompositionLinearization(const StepFunction& F,
                                                   const AvarParams& avar_params,
                                                   const CompoundParams& compound_params,
                                                   double lambda)
    : avar_params_(avar_params),
      base_(compound_base_cdf(F, compound_params)),
      kernel_(compound_kernel(F, compound_params, lambda)) {
  avar_params.validate();
  const CadlagFunction base(base_);
  crossing_ = kink_crossing(base, avar_params.kink);
  once_ = takes_level_once(base, avar_params.kink);
}

double CompositionLinearization::operator()(const StepFunction& v) const {
  const StepTail tail(v);
  double total = 0.0;
  for (std::size_t j = 0; j < kernel_.size(); ++j) {
    const double mass = kernel_.mass(j);
    if (mass != 0.0) total += mass * tail(crossing_ - kernel_.lattice_x(j));
  }
  return -total / (1.0 - avar_params_.alpha);
}

double composition_derivative(const StepFunction& F, const AvarParams& avar_params,
                              const CompoundParams& compound_params, const StepFunction& v) {
  return CompositionLinearization(F, avar_params, compound_params)(v);
}

// ---------------------------------------------------------------- checker

QhdCheckResult qhd_convergence_check(const ScalarFunctional& H, const ScalarFunctional& dotH,
                                     const QhdCheckConfig& cfg) {
  require(static_cast<bool>(cfg.base_sequence) && static_cast<bool>(cfg.scales),
          ErrorCode::invalid_argument, "checker needs a base sequence and scales");
  require(!cfg.n_ladder.empty(), ErrorCode::invalid_argument, "checker needs a ladder");
  const double derivative = dotH(cfg.direction);

  QhdCheckResult result;
  result.rows.resize(cfg.n_ladder.size());
  parallel_for(cfg.n_ladder.size(), [&](std::size_t idx) {
    const std::size_t n = cfg.n_ladder[idx];
    const double eps = cfg.scales(n);
    QhdCheckRow row{n, eps, std::numeric_limits<double>::quiet_NaN(), false};
    const CadlagFunction theta = cfg.base_sequence(n);
    const CadlagFunction vn = cfg.directions ? cfg.directions(n) : cfg.direction;
    const CadlagFunction perturbed = theta + eps * vn;
    if (perturbed.is_cdf(1e-12)) {
      try {
        const double quotient = (H(perturbed) - H(theta)) / eps;
        row.error = std::abs(quotient - derivative);
        row.feasible = std::isfinite(row.error);
      } catch (const Error&) {
        row.feasible = false;
      }
    }
    result.rows[idx] = row;
  });

  const std::size_t tail = std::min<std::size_t>(3, result.rows.size());
  const auto first = result.rows.end() - static_cast<std::ptrdiff_t>(tail);
  result.pass = true;
  for (auto it = first; it != result.rows.end(); ++it) {
    if (!it->feasible) {
      result.pass = false;
      result.reason = "infeasible row at n = " + std::to_string(it->n);
      return result;
    }
    if (it != first && it->error > std::prev(it)->error + cfg.monotone_slack) {
      result.pass = false;
      result.reason = "error increases at n = " + std::to_string(it->n);
      return result;
    }
  }
  if (!(result.rows.back().error < cfg.tolerance)) {
    result.pass = false;
    result.reason = "final error above tolerance";
  }
  return result;
}

void write_csv(std::ostream& out, const QhdCheckResult& result) {
  out << std::setprecision(17) << "n,epsilon,error,feasible\n";
  for (const auto& row : result.rows) {
    out << row.n << "," << row.epsilon << ",";
    if (row.feasible) out << row.error;
    out << "," << (row.feasible ? "true" : "false") << "\n";
  }
}

}  // namespace qhdboot
