#include "qhdboot/cadlag.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <boost/math/tools/minima.hpp>

#include "qhdboot/error.hpp"

namespace qhdboot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Tolerance for deciding that a tail value vanishes.
constexpr double kTailTol = 1e-12;

}  // namespace

// ---------------------------------------------------------------- StepFunction

StepFunction::StepFunction(std::vector<double> knots, std::vector<double> values,
                           double value_at_minus_inf)
    : knots_(std::move(knots)), values_(std::move(values)), value_at_minus_inf_(value_at_minus_inf) {
  require(knots_.size() == values_.size(), ErrorCode::length_mismatch,
          "step function needs one value per knot");
  require(std::isfinite(value_at_minus_inf_), ErrorCode::invalid_argument,
          "step function value at -inf must be finite");
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    require(std::isfinite(knots_[i]) && std::isfinite(values_[i]), ErrorCode::invalid_argument,
            "step function knots and values must be finite");
    require(i == 0 || knots_[i - 1] < knots_[i], ErrorCode::invalid_argument,
            "step function knots must be strictly increasing");
  }
}

StepFunction StepFunction::indicator(double at, double height) {
  return StepFunction({at}, {height}, 0.0);
}

StepFunction StepFunction::from_atoms(std::span<const double> points,
                                      std::span<const double> masses) {
  require(points.size() == masses.size(), ErrorCode::length_mismatch,
          "from_atoms needs one mass per point");
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return points[i] < points[j]; });
  std::vector<double> knots;
  std::vector<double> values;
  knots.reserve(points.size());
  values.reserve(points.size());
  double cumulative = 0.0;
  for (const auto i : order) {
    require(std::isfinite(points[i]) && std::isfinite(masses[i]) && masses[i] >= 0.0,
            ErrorCode::invalid_argument, "atoms need finite points and non-negative masses");
    cumulative += masses[i];
    if (!knots.empty() && knots.back() == points[i]) {
      values.back() = cumulative;
    } else {
      knots.push_back(points[i]);
      values.push_back(cumulative);
    }
  }
  return StepFunction(std::move(knots), std::move(values), 0.0);
}

double StepFunction::eval(double x, Side side) const {
  const auto it = side == Side::right ? std::upper_bound(knots_.begin(), knots_.end(), x)
                                      : std::lower_bound(knots_.begin(), knots_.end(), x);
  if (it == knots_.begin()) return value_at_minus_inf_;
  return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
}

bool StepFunction::is_cdf(double tol) const {
  if (std::abs(value_at_minus_inf_) > tol) return false;
  double previous = 0.0;
  for (const double v : values_) {
    if (v < previous - tol) return false;
    previous = std::max(previous, v);
  }
  const double total = total_mass();
  return std::isfinite(total) && total > 0.0;
}

StepFunction StepFunction::shifted(double shift) const {
  std::vector<double> knots(knots_);
  for (auto& k : knots) k += shift;
  return StepFunction(std::move(knots), values_, value_at_minus_inf_);
}

StepFunction StepFunction::simplified() const {
  std::vector<double> knots;
  std::vector<double> values;
  double previous = value_at_minus_inf_;
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (values_[i] == previous) continue;
    knots.push_back(knots_[i]);
    values.push_back(values_[i]);
    previous = values_[i];
  }
  return StepFunction(std::move(knots), std::move(values), value_at_minus_inf_);
}

StepFunction linear_combination(double ca, const StepFunction& a, double cb, const StepFunction& b) {
  const auto ka = a.knots();
  const auto kb = b.knots();
  const auto va = a.values();
  const auto vb = b.values();
  std::vector<double> knots;
  std::vector<double> values;
  knots.reserve(ka.size() + kb.size());
  values.reserve(ka.size() + kb.size());
  double current_a = a.value_at_minus_inf();
  double current_b = b.value_at_minus_inf();
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < ka.size() || j < kb.size()) {
    double x;
    if (j == kb.size() || (i < ka.size() && ka[i] < kb[j])) {
      x = ka[i];
      current_a = va[i++];
    } else if (i == ka.size() || kb[j] < ka[i]) {
      x = kb[j];
      current_b = vb[j++];
    } else {
      x = ka[i];
      current_a = va[i++];
      current_b = vb[j++];
    }
    knots.push_back(x);
    values.push_back(ca * current_a + cb * current_b);
  }
  return StepFunction(std::move(knots), std::move(values),
                      ca * a.value_at_minus_inf() + cb * b.value_at_minus_inf());
}

StepFunction operator+(const StepFunction& a, const StepFunction& b) {
  return linear_combination(1.0, a, 1.0, b);
}

StepFunction operator-(const StepFunction& a, const StepFunction& b) {
  return linear_combination(1.0, a, -1.0, b);
}

StepFunction operator*(double c, const StepFunction& f) {
  std::vector<double> values(f.values_);
  for (auto& v : values) v *= c;
  return StepFunction(f.knots_, std::move(values), c * f.value_at_minus_inf_);
}

// ---------------------------------------------------------------- CadlagFunction

double CadlagFunction::eval(double x, Side side) const {
  const double smooth = model_weight() != 0.0 ? model_weight_ * model_->cdf(x) : 0.0;
  return smooth + step_.eval(x, side);
}

double CadlagFunction::limit_at_minus_inf() const { return step_.value_at_minus_inf(); }

double CadlagFunction::limit_at_plus_inf() const { return model_weight() + step_.value_at_plus_inf(); }

bool CadlagFunction::is_cdf(double tol) const {
  if (is_step()) return step_.is_cdf(tol);
  if (model_weight() < 0.0 || std::abs(step_.value_at_minus_inf()) > tol) return false;
  double previous = 0.0;
  for (const double v : step_.values()) {
    if (v < previous - tol) return false;
    previous = std::max(previous, v);
  }
  return limit_at_plus_inf() > 0.0;
}

namespace {

std::optional<ContinuousModel> common_model(const CadlagFunction& a, const CadlagFunction& b) {
  if (a.model_weight() == 0.0) return b.model();
  if (b.model_weight() == 0.0) return a.model();
  require(*a.model() == *b.model(), ErrorCode::invalid_argument,
          "cadlag functions built on different models cannot be combined");
  return a.model();
}

CadlagFunction combine(double ca, const CadlagFunction& a, double cb, const CadlagFunction& b) {
  const auto model = common_model(a, b);
  StepFunction step = linear_combination(ca, a.step(), cb, b.step());
  if (!model) return CadlagFunction(std::move(step));
  return CadlagFunction(*model, ca * a.model_weight() + cb * b.model_weight(), std::move(step));
}

}  // namespace

CadlagFunction operator+(const CadlagFunction& a, const CadlagFunction& b) {
  return combine(1.0, a, 1.0, b);
}

CadlagFunction operator-(const CadlagFunction& a, const CadlagFunction& b) {
  return combine(1.0, a, -1.0, b);
}

CadlagFunction operator*(double c, const CadlagFunction& f) {
  if (f.model_weight() == 0.0) return CadlagFunction(c * f.step());
  return CadlagFunction(*f.model(), c * f.model_weight(), c * f.step());
}

// ---------------------------------------------------------------- norms

double weighted_sup_norm(const StepFunction& f, const WeightFunction& phi) {
  const bool unbounded = !phi.bounded();
  const double lower = f.value_at_minus_inf();
  const double upper = f.value_at_plus_inf();
  // tails at roundoff level (differences of normalised CDFs) count as vanishing
  if (unbounded && (std::abs(lower) > kTailTol || std::abs(upper) > kTailTol)) {
    fail(ErrorCode::norm_infinite, "function does not vanish at infinity under an unbounded weight");
  }
  double best = unbounded ? 0.0 : std::max(std::abs(lower), std::abs(upper));
  const auto knots = f.knots();
  const auto values = f.values();
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double weight = std::max(phi(knots[i]), phi(knots[i + 1]));
    best = std::max(best, std::abs(values[i]) * weight);
  }
  return best;
}

namespace {

// sup over [lo, hi] (finite) of |w F(x) + c| phi(x); F continuous, so the
// left limit at hi equals the value there.
double piece_sup(const ContinuousModel& model, double w, double c, const WeightFunction& phi,
                 double lo, double hi) {
  auto h = [&](double x) { return std::abs(w * model.cdf(x) + c) * phi(x); };
  double best = std::max(h(lo), h(hi));
  if (!(hi > lo)) return best;
  constexpr int kScan = 64;
  double best_x = lo;
  double scan_best = -1.0;
  for (int k = 0; k <= kScan; ++k) {
    const double x = lo + (hi - lo) * k / kScan;
    const double value = h(x);
    if (value > scan_best) {
      scan_best = value;
      best_x = x;
    }
  }
  best = std::max(best, scan_best);
  const double cell = (hi - lo) / kScan;
  const double a = std::max(lo, best_x - cell);
  const double b = std::min(hi, best_x + cell);
  if (b > a) {
    const auto [x, neg] =
        boost::math::tools::brent_find_minima([&](double x) { return -h(x); }, a, b, 50);
    (void)x;
    best = std::max(best, -neg);
  }
  return best;
}

}  // namespace

double weighted_sup_norm(const CadlagFunction& f, const WeightFunction& phi) {
  if (f.is_step()) return weighted_sup_norm(f.step(), phi);
  const ContinuousModel& model = *f.model();
  const double w = f.model_weight();
  const StepFunction& s = f.step();
  const bool unbounded = !phi.bounded();

  const double lower_limit = f.limit_at_minus_inf();
  const double upper_limit = f.limit_at_plus_inf();
  if (unbounded && (std::abs(lower_limit) > kTailTol || std::abs(upper_limit) > kTailTol)) {
    fail(ErrorCode::norm_infinite, "function does not vanish at infinity under an unbounded weight");
  }
  double best = unbounded ? 0.0 : std::max(std::abs(lower_limit), std::abs(upper_limit));
  // Residual upper tail |w|(1 - F) phi: heavy tails can keep it away from 0.
  if (unbounded && std::isfinite(model.tail_exponent())) {
    const double alpha = model.tail_exponent();
    if (phi.lambda() > alpha) {
      fail(ErrorCode::norm_infinite, "model tail is too heavy for the weight");
    }
    if (phi.lambda() == alpha) {
      const auto& law = std::get<ParetoLaw>(model.law());
      best = std::max(best, std::abs(w) * std::pow(law.scale, alpha));
    }
  }

  // Effective search window: outside it |w F + c| phi is below double resolution
  // for light tails; bounded supports use their own end points.
  const double window_lo = std::isfinite(model.support_lower()) ? model.support_lower() - 1.0
                                                                : model.quantile(1e-16);
  const double window_hi = std::isfinite(model.support_upper()) ? model.support_upper() + 1.0
                                                                : model.quantile(1.0 - 1e-16);

  const auto knots = s.knots();
  const auto values = s.values();
  auto scan_piece = [&](double lo, double hi, double c) {
    if (std::isinf(lo)) lo = std::min(window_lo, hi);
    if (std::isinf(hi)) hi = std::max(window_hi, lo);
    if (std::isinf(lo) || std::isinf(hi) || lo > hi) return;
    // Split where w F + c changes sign.
    const double root = w != 0.0 ? model.level_set_start(-c / w) : kInf;
    if (root > lo && root < hi) {
      best = std::max(best, piece_sup(model, w, c, phi, lo, root));
      best = std::max(best, piece_sup(model, w, c, phi, root, hi));
    } else {
      best = std::max(best, piece_sup(model, w, c, phi, lo, hi));
    }
  };
  if (knots.empty()) {
    scan_piece(-kInf, kInf, s.value_at_minus_inf());
    return best;
  }
  scan_piece(-kInf, knots.front(), s.value_at_minus_inf());
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) scan_piece(knots[i], knots[i + 1], values[i]);
  scan_piece(knots.back(), kInf, values.back());
  return best;
}

double left_continuous_inverse(const StepFunction& F, double s) {
  require(F.is_cdf(1e-12), ErrorCode::invalid_argument, "left_continuous_inverse needs a CDF");
  require(s > 0.0 && s <= F.total_mass(), ErrorCode::level_out_of_range,
          "level must lie in (0, total mass]");
  const auto values = F.values();
  const auto it = std::lower_bound(values.begin(), values.end(), s);
  if (it == values.end()) return F.knots().back();
  return F.knots()[static_cast<std::size_t>(it - values.begin())];
}

// ---------------------------------------------------------------- GridPmf

GridPmf::GridPmf(double origin, double step, std::vector<double> masses)
    : origin_(origin), step_(step), masses_(std::move(masses)), total_mass_(0.0) {
  require(std::isfinite(origin_), ErrorCode::invalid_argument, "grid origin must be finite");
  require(std::isfinite(step_) && step_ > 0.0, ErrorCode::invalid_argument,
          "grid step must be positive");
  require(!masses_.empty(), ErrorCode::invalid_argument, "grid needs at least one mass");
  for (const double m : masses_) {
    require(std::isfinite(m) && m >= 0.0, ErrorCode::invalid_argument,
            "grid masses must be finite and non-negative");
    total_mass_ += m;
  }
}

GridPmf GridPmf::point_mass(double at, double step, double mass) {
  return GridPmf(at, step, {mass});
}

long long GridPmf::origin_index() const {
  const double ratio = origin_ / step_;
  const double nearest = std::round(ratio);
  require(std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, std::abs(ratio)),
          ErrorCode::lattice_mismatch, "grid origin is not a multiple of the lattice step");
  return static_cast<long long>(nearest);
}

double GridPmf::mean() const {
  double total = 0.0;
  for (std::size_t i = 0; i < masses_.size(); ++i) total += masses_[i] * lattice_x(i);
  return total;
}

double GridPmf::absolute_moment(double r) const {
  double total = 0.0;
  for (std::size_t i = 0; i < masses_.size(); ++i) {
    total += masses_[i] * std::pow(std::abs(lattice_x(i)), r);
  }
  return total;
}

StepFunction GridPmf::cdf() const {
  std::vector<double> knots;
  std::vector<double> values;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < masses_.size(); ++i) {
    if (masses_[i] <= 0.0) continue;
    cumulative += masses_[i];
    knots.push_back(lattice_x(i));
    values.push_back(cumulative);
  }
  return StepFunction(std::move(knots), std::move(values), 0.0);
}

GridPmf GridPmf::trimmed() const {
  std::size_t first = 0;
  while (first + 1 < masses_.size() && masses_[first] == 0.0) ++first;
  std::size_t last = masses_.size();
  while (last > first + 1 && masses_[last - 1] == 0.0) --last;
  return GridPmf(lattice_x(first), step_,
                 std::vector<double>(masses_.begin() + static_cast<std::ptrdiff_t>(first),
                                     masses_.begin() + static_cast<std::ptrdiff_t>(last)));
}

namespace {

std::size_t lattice_last_index(double h, double a, double b) {
  require(std::isfinite(h) && h > 0.0, ErrorCode::invalid_argument, "lattice step must be > 0");
  require(std::isfinite(a) && std::isfinite(b) && a <= b, ErrorCode::invalid_argument,
          "lattice range must satisfy a <= b");
  return static_cast<std::size_t>(std::floor((b - a) / h + 1e-9));
}

}  // namespace

GridPmf discretize(const StepFunction& F, double h, double a, double b) {
  require(F.is_cdf(1e-12), ErrorCode::invalid_argument, "discretize needs a CDF");
  const std::size_t last = lattice_last_index(h, a, b);
  std::vector<double> masses(last + 1, 0.0);
  const auto knots = F.knots();
  const auto values = F.values();
  double previous = 0.0;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    require(knots[i] >= a && knots[i] <= b, ErrorCode::range_too_small,
            "a knot of F lies outside the discretisation range");
    const double t = (knots[i] - a) / h;
    const double nearest = std::ceil(t - 0.5);  // ties go to the lower point
    const auto j = static_cast<std::size_t>(std::clamp(nearest, 0.0, static_cast<double>(last)));
    masses[j] += values[i] - previous;
    previous = values[i];
  }
  return GridPmf(a, h, std::move(masses));
}

GridPmf discretize(const ContinuousModel& model, double h, double a, double b) {
  const std::size_t last = lattice_last_index(h, a, b);
  std::vector<double> masses(last + 1, 0.0);
  double below = 0.0;
  for (std::size_t i = 0; i <= last; ++i) {
    const double x = a + static_cast<double>(i) * h;
    const double above = i == last ? 1.0 : model.cdf(x + 0.5 * h);
    masses[i] = std::max(0.0, above - below);
    below = above;
  }
  return GridPmf(a, h, std::move(masses));
}

// ---------------------------------------------------------------- CSV

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

double parse_double(const std::string& text) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) fail(ErrorCode::io_error, "malformed number: " + text);
    return value;
  } catch (const std::logic_error&) {
    fail(ErrorCode::io_error, "malformed number: " + text);
  }
}

}  // namespace

void write_csv(std::ostream& out, const StepFunction& f) {
  out << std::setprecision(17);
  out << "value_at_minus_inf," << f.value_at_minus_inf() << "\n";
  out << "knot,value\n";
  for (std::size_t i = 0; i < f.size(); ++i) out << f.knots()[i] << "," << f.values()[i] << "\n";
}

StepFunction read_step_function_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::io_error, "empty step function csv");
  auto head = split_csv(line);
  require(head.size() == 2 && head[0] == "value_at_minus_inf", ErrorCode::io_error,
          "step function csv must start with value_at_minus_inf");
  const double at_minus_inf = parse_double(head[1]);
  require(static_cast<bool>(std::getline(in, line)) && line == "knot,value", ErrorCode::io_error,
          "step function csv needs a knot,value header");
  std::vector<double> knots;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    require(fields.size() == 2, ErrorCode::io_error, "step function row needs two fields");
    knots.push_back(parse_double(fields[0]));
    values.push_back(parse_double(fields[1]));
  }
  return StepFunction(std::move(knots), std::move(values), at_minus_inf);
}

void write_csv(std::ostream& out, const GridPmf& pmf) {
  out << std::setprecision(17);
  out << "index,lattice_x,mass\n";
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    out << i << "," << pmf.lattice_x(i) << "," << pmf.mass(i) << "\n";
  }
}

GridPmf read_grid_pmf_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "index,lattice_x,mass",
          ErrorCode::io_error, "grid csv needs an index,lattice_x,mass header");
  std::vector<double> xs;
  std::vector<double> masses;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    require(fields.size() == 3, ErrorCode::io_error, "grid row needs three fields");
    require(parse_double(fields[0]) == static_cast<double>(xs.size()), ErrorCode::io_error,
            "grid rows must be indexed 0, 1, 2, ...");
    xs.push_back(parse_double(fields[1]));
    masses.push_back(parse_double(fields[2]));
  }
  require(!xs.empty(), ErrorCode::io_error, "grid csv has no rows");
  const double step = xs.size() > 1 ? xs[1] - xs[0] : 1.0;
  return GridPmf(xs.front(), step, std::move(masses));
}

}  // namespace qhdboot
