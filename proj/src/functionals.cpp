#include "qhdboot/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "qhdboot/error.hpp"

namespace qhdboot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLimitTol = 1e-9;

}  // namespace

void AvarParams::validate() const {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::invalid_argument, "alpha must lie in (0,1)");
  require(kink > 0.0 && kink < 1.0, ErrorCode::invalid_argument, "kink must lie in (0,1)");
}

void CompoundParams::validate() const {
  require(std::isfinite(lattice_step) && lattice_step > 0.0, ErrorCode::invalid_argument,
          "lattice step must be > 0");
  require(tail_budget > 0.0 && tail_budget < 1.0, ErrorCode::invalid_argument,
          "tail budget must lie in (0,1)");
  if (range) {
    require(range->first <= range->second, ErrorCode::invalid_argument,
            "compound range must satisfy a <= b");
  }
}

std::size_t CompoundParams::truncation_point() const {
  if (truncation) return *truncation;
  return count.truncation_point(tail_budget);
}

// ---------------------------------------------------------------- AVaR

namespace {

// The integrand pieces of R for H = w F + s with s constant (= c) on a piece.
class AvarIntegrator {
 public:
  AvarIntegrator(const CadlagFunction& H, const AvarParams& p)
      : model_(H.model()), w_(H.model_weight()), p_(p), inv_(1.0 / (1.0 - p.alpha)) {
    require(w_ >= 0.0, ErrorCode::invalid_argument, "AVaR argument must be non-decreasing");
  }

  // int_l^r g(H) for finite l < r.
  double g_integral(double l, double r, double c) const {
    if (w_ == 0.0) return p_.g(c) * (r - l);
    const double start = std::max(l, model_->level_set_start((p_.kink - c) / w_));
    if (start >= r) return 0.0;
    return inv_ * (w_ * model_->cdf_integral(start, r) + (c - p_.kink) * (r - start));
  }

  // int_{-inf}^r g(H).
  double lower_tail(double r, double c) const {
    if (w_ == 0.0) {
      if (p_.g(c) > 0.0) fail(ErrorCode::non_integrable, "AVaR integrand does not vanish at -inf");
      return 0.0;
    }
    const double t = (p_.kink - c) / w_;
    if (t < 0.0) fail(ErrorCode::non_integrable, "AVaR integrand does not vanish at -inf");
    const double start = model_->level_set_start(t);
    if (start >= r) return 0.0;
    if (start == -kInf) return inv_ * w_ * model_->lower_tail_integral(r);
    return inv_ * (w_ * model_->cdf_integral(start, r) + (c - p_.kink) * (r - start));
  }

  // int_l^inf (1 - g(H)).
  double upper_tail(double l, double c) const {
    if (std::abs(p_.g(w_ + c) - 1.0) > kLimitTol) {
      fail(ErrorCode::non_integrable, "AVaR integrand does not vanish at +inf");
    }
    if (w_ == 0.0) return 0.0;
    const double start = std::max(l, model_->level_set_start((p_.kink - c) / w_));
    const double tail = model_->upper_tail_integral(start);
    if (!std::isfinite(tail)) fail(ErrorCode::non_integrable, "first moment is infinite");
    return (start - l) + inv_ * w_ * tail;
  }

 private:
  const std::optional<ContinuousModel>& model_;
  double w_;
  AvarParams p_;
  double inv_;
};

}  // namespace

double avar(const CadlagFunction& F, const AvarParams& params) {
  params.validate();
  const AvarIntegrator integrator(F, params);
  const StepFunction& s = F.step();

  std::vector<double> cuts(s.knots().begin(), s.knots().end());
  cuts.insert(std::upper_bound(cuts.begin(), cuts.end(), 0.0), 0.0);
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double total = -integrator.lower_tail(cuts.front(), s.value_at_minus_inf());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double l = cuts[i];
    const double r = cuts[i + 1];
    const double g = integrator.g_integral(l, r, s(l));
    total += l >= 0.0 ? (r - l) - g : -g;
  }
  total += integrator.upper_tail(cuts.back(), s(cuts.back()));
  return total;
}

double avar(const StepFunction& F, const AvarParams& params) {
  return avar(CadlagFunction(F), params);
}

double avar(const ContinuousModel& F, const AvarParams& params) {
  return avar(CadlagFunction::of(F), params);
}

double avar_difference(const StepFunction& a, const StepFunction& b, const AvarParams& params) {
  params.validate();
  require(std::abs(a.value_at_minus_inf() - b.value_at_minus_inf()) <= kLimitTol &&
              std::abs(a.value_at_plus_inf() - b.value_at_plus_inf()) <= kLimitTol,
          ErrorCode::non_integrable, "AVaR difference needs equal limits at both ends");
  const auto ka = a.knots();
  const auto kb = b.knots();
  const auto va = a.values();
  const auto vb = b.values();
  double current_a = a.value_at_minus_inf();
  double current_b = b.value_at_minus_inf();
  double previous = -kInf;
  double total = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < ka.size() || j < kb.size()) {
    const double x = (j == kb.size() || (i < ka.size() && ka[i] <= kb[j])) ? ka[i] : kb[j];
    if (previous != -kInf) total += (params.g(current_b) - params.g(current_a)) * (x - previous);
    if (i < ka.size() && ka[i] == x) current_a = va[i++];
    if (j < kb.size() && kb[j] == x) current_b = vb[j++];
    previous = x;
  }
  return total;
}

// ---------------------------------------------------------------- lattice algebra

namespace {

void require_same_step(const GridPmf& a, const GridPmf& b) {
  require(std::abs(a.step() - b.step()) <= 1e-12 * a.step(), ErrorCode::lattice_mismatch,
          "lattice steps differ");
}

}  // namespace

GridPmf convolve_pmf(const GridPmf& a, const GridPmf& b) {
  require_same_step(a, b);
  const auto ma = a.masses();
  const auto mb = b.masses();
  std::vector<double> out(ma.size() + mb.size() - 1, 0.0);
  for (std::size_t i = 0; i < ma.size(); ++i) {
    if (ma[i] == 0.0) continue;
    for (std::size_t j = 0; j < mb.size(); ++j) out[i + j] += ma[i] * mb[j];
  }
  return GridPmf(a.origin() + b.origin(), a.step(), std::move(out));
}

GridPmf k_fold(const GridPmf& a, std::size_t k) {
  GridPmf result = GridPmf::point_mass(0.0, a.step());
  GridPmf base = a;
  while (k > 0) {
    if (k & 1U) result = convolve_pmf(result, base);
    k >>= 1U;
    if (k > 0) base = convolve_pmf(base, base);
  }
  return result;
}

GridPmf mix_pmf(const std::vector<std::pair<double, GridPmf>>& terms) {
  require(!terms.empty(), ErrorCode::invalid_argument, "mix_pmf needs at least one term");
  const double h = terms.front().second.step();
  const double anchor = terms.front().second.origin();
  long long lo = std::numeric_limits<long long>::max();
  long long hi = std::numeric_limits<long long>::min();
  std::vector<long long> offsets;
  offsets.reserve(terms.size());
  for (const auto& [c, pmf] : terms) {
    require_same_step(terms.front().second, pmf);
    require(std::isfinite(c) && c >= 0.0, ErrorCode::invalid_argument,
            "mixture coefficients must be non-negative");
    const double ratio = (pmf.origin() - anchor) / h;
    const double nearest = std::round(ratio);
    require(std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, std::abs(ratio)),
            ErrorCode::lattice_mismatch, "grid origins are not commensurate with the step");
    const auto offset = static_cast<long long>(nearest);
    offsets.push_back(offset);
    lo = std::min(lo, offset);
    hi = std::max(hi, offset + static_cast<long long>(pmf.size()) - 1);
  }
  std::vector<double> out(static_cast<std::size_t>(hi - lo + 1), 0.0);
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const auto& [c, pmf] = terms[t];
    const auto base = static_cast<std::size_t>(offsets[t] - lo);
    for (std::size_t i = 0; i < pmf.size(); ++i) out[base + i] += c * pmf.mass(i);
  }
  return GridPmf(anchor + static_cast<double>(lo) * h, h, std::move(out));
}

GridPmf telescoping_kernel(const GridPmf& g1, const GridPmf& g2, std::size_t k) {
  require(k >= 1, ErrorCode::invalid_argument, "telescoping kernel needs k >= 1");
  require_same_step(g1, g2);
  std::vector<GridPmf> powers1{GridPmf::point_mass(0.0, g1.step())};
  std::vector<GridPmf> powers2{GridPmf::point_mass(0.0, g1.step())};
  for (std::size_t j = 1; j < k; ++j) {
    powers1.push_back(convolve_pmf(powers1.back(), g1));
    powers2.push_back(convolve_pmf(powers2.back(), g2));
  }
  std::vector<std::pair<double, GridPmf>> terms;
  for (std::size_t j = 0; j < k; ++j) {
    terms.emplace_back(1.0, convolve_pmf(powers1[k - 1 - j], powers2[j]));
  }
  return mix_pmf(terms);
}

// ---------------------------------------------------------------- compound

StepFunction CompoundResult::closed_cdf() const {
  std::vector<double> masses(pmf.masses().begin(), pmf.masses().end());
  masses.back() += truncation_deficit;
  return GridPmf(pmf.origin(), pmf.step(), std::move(masses)).cdf();
}

CompoundResult compound_cdf(const GridPmf& F, const CompoundParams& params) {
  params.validate();
  require(std::abs(F.step() - params.lattice_step) <= 1e-12 * params.lattice_step,
          ErrorCode::lattice_mismatch, "severity lattice step differs from the compound step");
  require(std::abs(F.total_mass() - 1.0) <= 1e-9, ErrorCode::invalid_argument,
          "compound distribution needs a probability severity");
  (void)F.origin_index();  // severities must live on h Z so that F^{*0} = delta_0 shares the lattice

  const std::size_t K = params.truncation_point();
  std::vector<std::pair<double, GridPmf>> terms;
  terms.reserve(K + 1);
  GridPmf power = GridPmf::point_mass(0.0, F.step());
  double included = 0.0;
  for (std::size_t k = 0; k <= K; ++k) {
    if (k > 0) power = convolve_pmf(power, F);
    const double pk = params.count.pmf(k);
    included += pk;
    if (pk > 0.0) terms.emplace_back(pk, power);
  }
  require(!terms.empty(), ErrorCode::invalid_argument, "count distribution has no mass up to K");
  return CompoundResult{mix_pmf(terms), std::max(0.0, 1.0 - included), K};
}

GridPmf severity_lattice(const StepFunction& F, const CompoundParams& params) {
  params.validate();
  require(!F.empty(), ErrorCode::invalid_argument, "severity distribution has no atoms");
  const double h = params.lattice_step;
  double a;
  double b;
  if (params.range) {
    a = params.range->first;
    b = params.range->second;
  } else {
    a = std::floor(F.knots().front() / h + 1e-9) * h;
    b = std::ceil(F.knots().back() / h - 1e-9) * h;
  }
  return discretize(F, h, a, b);
}

CompoundResult compound_cdf(const StepFunction& F, const CompoundParams& params) {
  return compound_cdf(severity_lattice(F, params), params);
}

StepFunction compound_base_cdf(const StepFunction& F, const CompoundParams& params) {
  if (const auto* fixed = std::get_if<DeterministicCount>(&params.count.law())) {
    if (fixed->value == 1) return F;
    if (fixed->value == 0) return StepFunction::indicator(0.0);
  }
  return compound_cdf(F, params).closed_cdf();
}

double composition(const StepFunction& F, const AvarParams& avar_params,
                   const CompoundParams& compound_params) {
  return avar(compound_base_cdf(F, compound_params), avar_params);
}

void write_compound_csv(std::ostream& out, const CompoundResult& result) {
  out << std::setprecision(17) << "lattice_x,mass,cdf\n";
  double cumulative = 0.0;
  for (std::size_t i = 0; i < result.pmf.size(); ++i) {
    cumulative += result.pmf.mass(i);
    out << result.pmf.lattice_x(i) << "," << result.pmf.mass(i) << "," << cumulative << "\n";
  }
}

}  // namespace qhdboot
