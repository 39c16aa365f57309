#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "medex/errors.hpp"
#include "medex/rng.hpp"
#include "medex/surrogate.hpp"

namespace medex::surrogate {

namespace {

constexpr double kSdFloor = 1e-12;
constexpr int kMaxSweeps = 5000;
constexpr double kSweepTol = 1e-10;
constexpr int kAutoGridSize = 50;
constexpr double kAutoGridRatio = 1e-4;

struct Standardized {
  Eigen::MatrixXd F;      // centered and scaled columns; constant columns zeroed
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // population sd, floored at 1 for constant columns
  std::vector<int> active;
};

Standardized standardize(const Eigen::MatrixXd& F) {
  const auto n = F.rows();
  Standardized s;
  s.F = F;
  s.mean = F.colwise().mean();
  s.scale = Eigen::VectorXd::Ones(F.cols());
  for (Eigen::Index j = 0; j < F.cols(); ++j) {
    s.F.col(j).array() -= s.mean(j);
    const double sd = std::sqrt(s.F.col(j).squaredNorm() / static_cast<double>(n));
    if (sd > kSdFloor) {
      s.scale(j) = sd;
      s.F.col(j) /= sd;
      s.active.push_back(static_cast<int>(j));
    } else {
      s.F.col(j).setZero();
    }
  }
  return s;
}

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

double objective(const Eigen::VectorXd& residual, const Eigen::VectorXd& beta, double lambda,
                 double n) {
  return residual.squaredNorm() / (2.0 * n) + lambda * beta.lpNorm<1>();
}

// Coordinate descent on standardized features and centered response. beta is
// both the warm start and the result; returns the per-sweep objective values.
std::vector<double> descend(const Standardized& s, const Eigen::VectorXd& u_centered,
                            double lambda, Eigen::VectorXd& beta) {
  const double n = static_cast<double>(s.F.rows());
  Eigen::VectorXd residual = u_centered - s.F * beta;
  std::vector<double> trace;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double max_step = 0.0;
    for (int j : s.active) {
      const double old = beta(j);
      // With unit-variance columns the coordinate-wise minimizer is a plain
      // soft threshold of the partial correlation.
      const double rho = s.F.col(j).dot(residual) / n + old;
      const double updated = soft_threshold(rho, lambda);
      if (updated != old) {
        residual += s.F.col(j) * (old - updated);
        beta(j) = updated;
        max_step = std::max(max_step, std::abs(updated - old));
      }
    }
    trace.push_back(objective(residual, beta, lambda, n));
    if (max_step <= kSweepTol * std::max(1.0, beta.cwiseAbs().maxCoeff())) return trace;
  }
  throw ConvergenceError("lasso coordinate descent did not converge: lambda=" +
                         std::to_string(lambda) + ", sweeps=" + std::to_string(kMaxSweeps));
}

std::vector<double> auto_grid(double lambda_max) {
  std::vector<double> grid(kAutoGridSize);
  if (lambda_max <= 0.0) {
    std::fill(grid.begin(), grid.end(), 0.0);
    return grid;
  }
  const double log_hi = std::log(lambda_max);
  const double log_lo = std::log(lambda_max * kAutoGridRatio);
  for (int i = 0; i < kAutoGridSize; ++i) {
    const double t = static_cast<double>(i) / (kAutoGridSize - 1);
    grid[i] = std::exp(log_hi + t * (log_lo - log_hi));
  }
  return grid;
}

// Solutions along a decreasing-lambda path, each warm-started from the last.
std::vector<Eigen::VectorXd> fit_path(const Standardized& s, const Eigen::VectorXd& u_centered,
                                      const std::vector<double>& grid,
                                      std::vector<double>* final_trace) {
  std::vector<Eigen::VectorXd> path;
  path.reserve(grid.size());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(s.F.cols());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto trace = descend(s, u_centered, grid[g], beta);
    if (final_trace && g + 1 == grid.size()) *final_trace = std::move(trace);
    path.push_back(beta);
  }
  return path;
}

std::vector<std::vector<int>> make_folds(Eigen::Index n, int folds, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng::Stream stream(rng::derive(seed, "lasso-cv"));
  stream.shuffle(order);
  std::vector<std::vector<int>> assignment(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < order.size(); ++i) {
    assignment[i % static_cast<std::size_t>(folds)].push_back(order[i]);
  }
  for (auto& fold : assignment) std::sort(fold.begin(), fold.end());
  return assignment;
}

}  // namespace

double lasso_lambda_max(const Eigen::MatrixXd& F, const Eigen::VectorXd& u) {
  if (F.rows() != u.size()) throw std::invalid_argument("lasso: rows of F must match u");
  if (F.rows() < 1) throw std::invalid_argument("lasso: need at least one row");
  const Standardized s = standardize(F);
  const Eigen::VectorXd centered = u.array() - u.mean();
  double best = 0.0;
  for (int j : s.active) {
    best = std::max(best, std::abs(s.F.col(j).dot(centered)) / static_cast<double>(F.rows()));
  }
  return best;
}

double LassoModel::predict(const Eigen::VectorXd& features) const {
  if (features.size() != coefficients.size()) {
    throw std::invalid_argument("lasso predict: expected " + std::to_string(coefficients.size()) +
                                " features, got " + std::to_string(features.size()));
  }
  return intercept + coefficients.dot(features);
}

Eigen::VectorXd LassoModel::predict_rows(const Eigen::MatrixXd& F) const {
  if (F.cols() != coefficients.size()) {
    throw std::invalid_argument("lasso predict: feature count mismatch");
  }
  return (F * coefficients).array() + intercept;
}

nlohmann::json LassoModel::to_json() const {
  nlohmann::json values = nlohmann::json::array();
  for (int j : support) values.push_back(coefficients(j));
  return {{"intercept", intercept},
          {"n_features", coefficients.size()},
          {"support", support},
          {"values", values},
          {"lambda", lambda}};
}

LassoModel LassoModel::from_json(const nlohmann::json& j) {
  LassoModel m;
  m.intercept = j.at("intercept").get<double>();
  m.lambda = j.at("lambda").get<double>();
  m.coefficients = Eigen::VectorXd::Zero(j.at("n_features").get<Eigen::Index>());
  m.support = j.at("support").get<std::vector<int>>();
  const auto& values = j.at("values");
  if (values.size() != m.support.size()) throw FormatError("lasso model: support/value mismatch");
  for (std::size_t k = 0; k < m.support.size(); ++k) {
    const int idx = m.support[k];
    if (idx < 0 || idx >= m.coefficients.size()) throw FormatError("lasso model: bad support index");
    m.coefficients(idx) = values[k].get<double>();
  }
  return m;
}

LassoModel fit_lasso(const Eigen::MatrixXd& F, const Eigen::VectorXd& u,
                     const std::vector<double>& lambda_grid, int folds, std::uint64_t seed) {
  if (F.rows() != u.size()) throw std::invalid_argument("lasso: rows of F must match u");
  if (F.rows() < 2) throw std::invalid_argument("lasso: need at least two rows");
  if (F.cols() < 1) throw std::invalid_argument("lasso: need at least one feature");
  for (double lambda : lambda_grid) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("lasso: penalties must be >= 0");
  }

  std::vector<double> grid = lambda_grid;
  if (grid.empty()) grid = auto_grid(lasso_lambda_max(F, u));
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  LassoModel model;
  model.lambda_grid = grid;

  std::size_t chosen = 0;
  if (sorted.size() > 1 && folds >= 2) {
    if (F.rows() < folds) throw std::invalid_argument("lasso: need at least one row per fold");
    const auto assignment = make_folds(F.rows(), folds, seed);
    std::vector<double> cv(sorted.size(), 0.0);
    for (const auto& test_rows : assignment) {
      std::vector<char> in_test(static_cast<std::size_t>(F.rows()), 0);
      for (int r : test_rows) in_test[static_cast<std::size_t>(r)] = 1;
      const auto n_train = F.rows() - static_cast<Eigen::Index>(test_rows.size());
      Eigen::MatrixXd F_train(n_train, F.cols());
      Eigen::VectorXd u_train(n_train);
      Eigen::Index k = 0;
      for (Eigen::Index r = 0; r < F.rows(); ++r) {
        if (in_test[static_cast<std::size_t>(r)]) continue;
        F_train.row(k) = F.row(r);
        u_train(k) = u(r);
        ++k;
      }
      const Standardized s = standardize(F_train);
      const double u_bar = u_train.mean();
      const Eigen::VectorXd centered = u_train.array() - u_bar;
      const auto path = fit_path(s, centered, sorted, nullptr);
      for (std::size_t g = 0; g < sorted.size(); ++g) {
        double sse = 0.0;
        for (int r : test_rows) {
          double pred = u_bar;
          for (int j : s.active) {
            pred += path[g](j) * (F(r, j) - s.mean(j)) / s.scale(j);
          }
          const double err = pred - u(r);
          sse += err * err;
        }
        cv[g] += sse;
      }
    }
    for (auto& v : cv) v /= static_cast<double>(F.rows());
    // Minimum CV error; exact ties go to the larger penalty, which comes
    // first in the descending grid.
    chosen = static_cast<std::size_t>(
        std::min_element(cv.begin(), cv.end()) - cv.begin());
    model.cv_errors = cv;
  }

  const double lambda = sorted[chosen];
  const Standardized s = standardize(F);
  const double u_bar = u.mean();
  const Eigen::VectorXd centered = u.array() - u_bar;
  std::vector<double> warm_grid(sorted.begin(), sorted.begin() + static_cast<long>(chosen) + 1);
  std::vector<double> trace;
  const auto path = fit_path(s, centered, warm_grid, &trace);
  const Eigen::VectorXd& beta_std = path.back();

  model.lambda = lambda;
  model.objective_trace = std::move(trace);
  model.coefficients = Eigen::VectorXd::Zero(F.cols());
  model.intercept = u_bar;
  for (int j : s.active) {
    const double b = beta_std(j) / s.scale(j);
    if (b != 0.0) {
      model.coefficients(j) = b;
      model.intercept -= b * s.mean(j);
      model.support.push_back(j);
    }
  }
  return model;
}

}  // namespace medex::surrogate
