#pragma once

// Independent reference computations used by the tests. Nothing here calls the
// library's numerical routines; only plain arithmetic on the inputs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

namespace oracle {

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa,
                           double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

/// Adaptive Simpson on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, b, fa, fm, fb, whole, tol, 50);
}

/// Integral split at the given breakpoints (sorted internally).
inline double integrate_pieces(const std::function<double(double)>& f, std::vector<double> cuts,
                               double tol = 1e-12) {
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += integrate(f, cuts[i], cuts[i + 1], tol);
  return total;
}

/// -int_lo^0 g(F) + int_0^hi (1 - g(F)) with g(t) = max(t - alpha, 0) / (1 - alpha);
/// the integrand must vanish outside [lo, hi].
inline double avar_by_quadrature(const std::function<double(double)>& F, double alpha, double lo,
                                 double hi, std::vector<double> cuts = {}) {
  auto g = [alpha](double t) { return std::max(t - alpha, 0.0) / (1.0 - alpha); };
  std::vector<double> left{lo, 0.0};
  std::vector<double> right{0.0, hi};
  for (double c : cuts) {
    if (c > lo && c < 0.0) left.push_back(c);
    if (c > 0.0 && c < hi) right.push_back(c);
  }
  double total = 0.0;
  if (lo < 0.0) total -= integrate_pieces([&](double x) { return g(F(x)); }, left);
  if (hi > 0.0) total += integrate_pieces([&](double x) { return 1.0 - g(F(x)); }, right);
  return total;
}

/// Distribution of X_1 + ... + X_k with X_i iid on the given atoms, by full enumeration.
inline std::map<long long, double> enumerate_sum(const std::vector<long long>& atoms,
                                                 const std::vector<double>& masses, int k) {
  std::map<long long, double> out;
  std::vector<std::size_t> idx(static_cast<std::size_t>(k), 0);
  if (k == 0) {
    out[0] = 1.0;
    return out;
  }
  while (true) {
    long long s = 0;
    double p = 1.0;
    for (std::size_t j : idx) {
      s += atoms[j];
      p *= masses[j];
    }
    out[s] += p;
    std::size_t pos = 0;
    while (pos < idx.size() && ++idx[pos] == atoms.size()) idx[pos++] = 0;
    if (pos == idx.size()) break;
  }
  return out;
}

/// E[W_i] for the blockwise scheme from first principles: block j covers i with
/// probability #{admissible starts s with s <= i <= s + len_j - 1} / (n - l + 1).
inline std::vector<double> expected_block_cover(std::size_t n, std::size_t l) {
  const std::size_t k = (n + l - 1) / l;
  const std::size_t starts = n - l + 1;
  std::vector<double> w(n, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t len = j + 1 < k ? l : n - (k - 1) * l;
    for (std::size_t i = 1; i <= n; ++i) {
      std::size_t count = 0;
      for (std::size_t s = 1; s <= starts; ++s) {
        if (s <= i && i <= s + len - 1) ++count;
      }
      w[i - 1] += static_cast<double>(count) / static_cast<double>(starts);
    }
  }
  return w;
}

/// Right-continuous step evaluation from raw arrays.
inline double step_eval(const std::vector<double>& knots, const std::vector<double>& values,
                        double below, double x, bool left_limit = false) {
  double v = below;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (left_limit ? knots[i] < x : knots[i] <= x) v = values[i];
  }
  return v;
}

/// sup |f| (1+|x|)^lambda over knots, left limits at knots and `fill` evenly
/// spaced points covering the knot range with one unit of margin.
inline double dense_grid_norm(const std::vector<double>& knots, const std::vector<double>& values,
                              double lambda, int fill = 10000) {
  auto phi = [lambda](double x) { return std::pow(1.0 + std::abs(x), lambda); };
  double best = 0.0;
  for (double k : knots) {
    best = std::max(best, std::abs(step_eval(knots, values, 0.0, k)) * phi(k));
    best = std::max(best, std::abs(step_eval(knots, values, 0.0, k, true)) * phi(k));
  }
  // phi is smallest at 0, so a piece straddling 0 needs no extra points; the fill covers it.
  const double lo = knots.front() - 1.0;
  const double hi = knots.back() + 1.0;
  for (int j = 0; j <= fill; ++j) {
    const double x = lo + (hi - lo) * j / fill;
    best = std::max(best, std::abs(step_eval(knots, values, 0.0, x)) * phi(x));
  }
  return best;
}

}  // namespace oracle
