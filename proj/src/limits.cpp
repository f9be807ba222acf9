#include "qhdboot/limits.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "qhdboot/error.hpp"
#include "qhdboot/parallel.hpp"
#include "qhdboot/rng.hpp"

namespace qhdboot {

namespace {

constexpr std::size_t kPathBlock = 1024;

void require_grid(const std::vector<double>& grid) {
  require(!grid.empty(), ErrorCode::invalid_argument, "grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(std::isfinite(grid[i]), ErrorCode::invalid_argument, "grid points must be finite");
    if (i > 0) {
      require(grid[i] > grid[i - 1], ErrorCode::invalid_argument, "grid must be increasing");
    }
  }
}

Eigen::MatrixXd bridge(const ContinuousModel& model, const std::vector<double>& grid) {
  const auto m = static_cast<Eigen::Index>(grid.size());
  std::vector<double> F(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) F[i] = model.cdf(grid[i]);
  Eigen::MatrixXd cov(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto lo = static_cast<std::size_t>(std::min(i, j));
      const auto hi = static_cast<std::size_t>(std::max(i, j));
      cov(i, j) = F[lo] * (1.0 - F[hi]);
    }
  }
  return cov;
}

// Lag-k cross covariances c(i, j) = cov(1{X_t <= t_i}, 1{X_{t+k} <= t_j}) from
// grid ranks, via a 2-D histogram and prefix sums.
Eigen::MatrixXd lag_covariance(const std::vector<std::size_t>& rank, std::size_t m, std::size_t k) {
  const std::size_t count = rank.size() - k;
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m + 1),
                                                static_cast<Eigen::Index>(m + 1));
  std::vector<double> first(m + 1, 0.0);
  std::vector<double> second(m + 1, 0.0);
  for (std::size_t t = 0; t < count; ++t) {
    joint(static_cast<Eigen::Index>(rank[t]), static_cast<Eigen::Index>(rank[t + k])) += 1.0;
    first[rank[t]] += 1.0;
    second[rank[t + k]] += 1.0;
  }
  // cumulative counts: X <= t_i iff rank <= i
  for (std::size_t a = 1; a <= m; ++a) {
    first[a] += first[a - 1];
    second[a] += second[a - 1];
  }
  for (Eigen::Index a = 0; a <= static_cast<Eigen::Index>(m); ++a) {
    for (Eigen::Index b = 0; b <= static_cast<Eigen::Index>(m); ++b) {
      if (a > 0) joint(a, b) += joint(a - 1, b);
      if (b > 0) joint(a, b) += joint(a, b - 1);
      if (a > 0 && b > 0) joint(a, b) -= joint(a - 1, b - 1);
    }
  }
  const double n = static_cast<double>(count);
  Eigen::MatrixXd c(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          joint(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) / n -
          (first[i] / n) * (second[j] / n);
    }
  }
  return c;
}

}  // namespace

std::vector<double> default_grid(const ContinuousModel& model, std::size_t m) {
  require(m >= 2, ErrorCode::invalid_argument, "grid needs at least two points");
  std::vector<double> grid(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double level = 0.001 + 0.998 * static_cast<double>(j) / static_cast<double>(m - 1);
    grid[j] = model.quantile(level);
  }
  return grid;
}

GaussianLimit covariance_iid(const ContinuousModel& model, const std::vector<double>& grid) {
  require_grid(grid);
  GaussianLimit out;
  out.grid = grid;
  out.cov = bridge(model, grid);
  out.kind = LimitKind::iid_bridge;
  return out;
}

GaussianLimit covariance_mixing(const Ar1Model& model, const std::vector<double>& grid,
                                std::size_t lag_truncation, std::size_t mc_len,
                                std::uint64_t seed) {
  require_grid(grid);
  require(lag_truncation >= 1, ErrorCode::invalid_argument, "lag truncation must be >= 1");
  require(mc_len >= 100 * (lag_truncation + 1), ErrorCode::path_too_short,
          "mc_len must be at least 100 (K_lag + 1)");

  const std::vector<double> path = sample_ar1(model, mc_len, 1000, seed);
  const std::size_t m = grid.size();
  std::vector<std::size_t> rank(path.size());
  for (std::size_t t = 0; t < path.size(); ++t) {
    rank[t] = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), path[t]) -
                                       grid.begin());
  }

  std::vector<Eigen::MatrixXd> lags(lag_truncation);
  parallel_for(lag_truncation, [&](std::size_t idx) { lags[idx] = lag_covariance(rank, m, idx + 1); });

  GaussianLimit out;
  out.grid = grid;
  out.kind = LimitKind::mixing_longrun;
  out.lag_truncation = lag_truncation;
  Eigen::MatrixXd cov = bridge(model.stationary_marginal(), grid);
  for (const auto& c : lags) cov += c + c.transpose();
  cov = 0.5 * (cov + cov.transpose());

  const double se = 0.25 / std::sqrt(static_cast<double>(mc_len - lag_truncation));
  const double last = lags.back().cwiseAbs().maxCoeff();
  if (last > 1e-4 + 3.0 * se) {
    out.warnings.push_back("lag covariance at K_lag is " + std::to_string(last) +
                           "; the series may not have decayed");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  out.min_eigenvalue = eig.eigenvalues().minCoeff();
  if (out.min_eigenvalue < 0.0) {
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
    cov = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    cov = 0.5 * (cov + cov.transpose());
  }
  out.cov = std::move(cov);
  return out;
}

LimitPaths sample_limit_paths(const GaussianLimit& limit, std::size_t n_paths, std::uint64_t seed) {
  const auto m = static_cast<Eigen::Index>(limit.grid.size());
  require(limit.cov.rows() == m && limit.cov.cols() == m, ErrorCode::invalid_argument,
          "covariance does not match the grid");
  require(n_paths > 0, ErrorCode::invalid_argument, "n_paths must be > 0");

  const double scale = std::max(1.0, limit.cov.diagonal().cwiseAbs().maxCoeff());
  double jitter = 0.0;
  Eigen::MatrixXd root;
  while (true) {
    Eigen::MatrixXd a = limit.cov;
    a.diagonal().array() += jitter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    const Eigen::VectorXd d = ldlt.vectorD();
    if (ldlt.info() == Eigen::Success && d.minCoeff() >= -1e-12 * scale) {
      const Eigen::MatrixXd L = ldlt.matrixL();
      const Eigen::VectorXd sd = d.cwiseMax(0.0).cwiseSqrt();
      root = ldlt.transpositionsP().transpose() * (L * sd.asDiagonal());
      break;
    }
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > 1e-6 * (1.0 + 1e-9)) {
      fail(ErrorCode::factorization_failed, "covariance not factorisable with jitter <= 1e-6");
    }
  }

  LimitPaths out;
  out.jitter = jitter;
  out.paths.resize(static_cast<Eigen::Index>(n_paths), m);
  const std::size_t blocks = (n_paths + kPathBlock - 1) / kPathBlock;
  parallel_for(blocks, [&](std::size_t b) {
    Rng rng = make_rng(derive_seed(seed, b));
    std::normal_distribution<double> normal;
    const std::size_t begin = b * kPathBlock;
    const std::size_t end = std::min(n_paths, begin + kPathBlock);
    Eigen::MatrixXd z(m, static_cast<Eigen::Index>(end - begin));
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      for (Eigen::Index r = 0; r < m; ++r) z(r, c) = normal(rng);
    }
    out.paths.middleRows(static_cast<Eigen::Index>(begin), z.cols()) = (root * z).transpose();
  });
  return out;
}

StepFunction path_to_step(const std::vector<double>& grid,
                          const Eigen::Ref<const Eigen::RowVectorXd>& path) {
  require(static_cast<std::size_t>(path.size()) == grid.size(), ErrorCode::length_mismatch,
          "path length differs from the grid");
  std::vector<double> values(grid.size());
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) values[j] = path(static_cast<Eigen::Index>(j));
  values.back() = 0.0;
  return StepFunction(grid, std::move(values), 0.0);
}

std::vector<double> limit_law_samples(const GaussianLimit& limit, const PathFunctional& dotH,
                                      std::size_t n_paths, std::uint64_t seed) {
  const LimitPaths sampled = sample_limit_paths(limit, n_paths, seed);
  std::vector<double> out(n_paths);
  const std::size_t blocks = (n_paths + kPathBlock - 1) / kPathBlock;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(n_paths, (b + 1) * kPathBlock);
    for (std::size_t i = b * kPathBlock; i < end; ++i) {
      out[i] = dotH(path_to_step(limit.grid, sampled.paths.row(static_cast<Eigen::Index>(i))));
    }
  });
  return out;
}

void write_samples_csv(std::ostream& out, const std::vector<double>& samples) {
  out << std::setprecision(17) << "value\n";
  for (const double v : samples) out << v << "\n";
}

}  // namespace qhdboot
