#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "medex/errors.hpp"
#include "medex/gp_ei.hpp"
#include "medex/parallel.hpp"
#include "medex/rng.hpp"

namespace medex::gp {

namespace {

constexpr double kNuggetStart = 1e-10;
constexpr double kNuggetStop = 1e-6;
constexpr double kNuggetStep = 100.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd R(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    R(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index d = 0; d < X.cols(); ++d) {
        const double delta = (X(i, d) - X(j, d)) / theta(d);
        s += delta * delta;
      }
      R(i, j) = std::exp(-0.5 * s);
      R(j, i) = R(i, j);
    }
  }
  return R;
}

struct ProfileFit {
  double mu = 0.0;
  double sigma2 = 0.0;
  double nugget = 0.0;
  double loglik = -kInf;
  Eigen::MatrixXd L;
  Eigen::VectorXd alpha;
};

// Closed-form profile likelihood for fixed lengthscales, escalating the
// nugget until the covariance factors. Returns nullopt when even the largest
// nugget fails.
std::optional<ProfileFit> profile_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& theta) {
  const Eigen::Index n = X.rows();
  const Eigen::MatrixXd R = kernel_matrix(X, theta);
  for (double nugget = kNuggetStart; nugget <= kNuggetStop * (1.0 + 1e-12);
       nugget *= kNuggetStep) {
    Eigen::MatrixXd Rn = R;
    Rn.diagonal().array() += nugget;
    Eigen::LLT<Eigen::MatrixXd> llt(Rn);
    if (llt.info() != Eigen::Success) continue;

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd Ri_y = llt.solve(y);
    const Eigen::VectorXd Ri_1 = llt.solve(ones);
    const double denom = ones.dot(Ri_1);
    if (!(denom > 0.0)) continue;

    ProfileFit fit;
    fit.nugget = nugget;
    fit.mu = ones.dot(Ri_y) / denom;
    const Eigen::VectorXd centered = y.array() - fit.mu;
    fit.alpha = llt.solve(centered);
    fit.sigma2 = std::max(centered.dot(fit.alpha) / static_cast<double>(n), 1e-30);
    double logdet = 0.0;
    const Eigen::MatrixXd L = llt.matrixL();
    for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(L(i, i));
    fit.loglik = -0.5 * (static_cast<double>(n) * std::log(fit.sigma2) + logdet +
                         static_cast<double>(n));
    fit.L = L;
    return fit;
  }
  return std::nullopt;
}

Eigen::VectorXd kernel_vector(const GpModel& model, const Eigen::VectorXd& x) {
  Eigen::VectorXd r(model.X.rows());
  for (Eigen::Index i = 0; i < model.X.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index d = 0; d < model.X.cols(); ++d) {
      const double delta = (x(d) - model.X(i, d)) / model.theta(d);
      s += delta * delta;
    }
    r(i) = std::exp(-0.5 * s);
  }
  return r;
}

double min_distance_to_rows(const Eigen::MatrixXd& rows, Eigen::Index count,
                            const Eigen::VectorXd& x) {
  double best = kInf;
  for (Eigen::Index i = 0; i < count; ++i) {
    best = std::min(best, (rows.row(i).transpose() - x).norm());
  }
  return best;
}

}  // namespace

GpModel fit_gp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               std::pair<double, double> theta_bounds, int restarts, std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n < 2 || p < 1) throw std::invalid_argument("gp fit needs at least two rows");
  if (y.size() != n) throw std::invalid_argument("gp fit: inputs and outputs must match");
  if (!(theta_bounds.first > 0.0) || !(theta_bounds.second > theta_bounds.first)) {
    throw std::invalid_argument("gp fit: lengthscale bounds must satisfy 0 < lo < hi");
  }
  if (restarts < 1) throw std::invalid_argument("gp fit: restarts must be >= 1");

  const double lo = std::log(theta_bounds.first);
  const double hi = std::log(theta_bounds.second);
  rng::Stream stream(rng::derive(seed, "gp-fit"));

  const auto evaluate = [&](const Eigen::VectorXd& log_theta) {
    return profile_likelihood(X, y, log_theta.array().exp());
  };

  Eigen::VectorXd best_log_theta;
  std::optional<ProfileFit> best_fit;
  std::vector<double> initial_logliks;

  for (int start = 0; start < restarts; ++start) {
    Eigen::VectorXd v(p);
    if (start == 0) {
      v.setConstant(0.5 * (lo + hi));  // deterministic center start
    } else {
      for (Eigen::Index d = 0; d < p; ++d) v(d) = stream.uniform(lo, hi);
    }
    auto current = evaluate(v);
    initial_logliks.push_back(current ? current->loglik : -kInf);

    double step = 0.5 * (hi - lo) / 4.0;
    int budget = 300;
    while (step >= 1e-3 && budget > 0) {
      Eigen::VectorXd best_move = v;
      double best_ll = current ? current->loglik : -kInf;
      std::optional<ProfileFit> best_move_fit = current;
      bool improved = false;
      for (Eigen::Index d = 0; d < p && budget > 0; ++d) {
        for (const double sign : {+1.0, -1.0}) {
          Eigen::VectorXd trial = v;
          trial(d) = std::clamp(trial(d) + sign * step, lo, hi);
          if (trial(d) == v(d)) continue;
          auto fit = evaluate(trial);
          --budget;
          if (fit && fit->loglik > best_ll) {
            best_ll = fit->loglik;
            best_move = trial;
            best_move_fit = std::move(fit);
            improved = true;
          }
        }
      }
      if (improved) {
        v = best_move;
        current = std::move(best_move_fit);
      } else {
        step *= 0.5;
      }
    }

    if (current && (!best_fit || current->loglik > best_fit->loglik)) {
      best_fit = std::move(current);
      best_log_theta = v;
    }
  }

  if (!best_fit) {
    throw ConvergenceError(
        "gp fit failed: covariance not positive definite after nugget escalation");
  }

  GpModel model;
  model.X = X;
  model.y = y;
  model.theta = best_log_theta.array().exp();
  model.mu = best_fit->mu;
  model.sigma2 = best_fit->sigma2;
  model.nugget = best_fit->nugget;
  model.L = std::move(best_fit->L);
  model.alpha = std::move(best_fit->alpha);
  model.loglik = best_fit->loglik;
  model.restart_initial_logliks = std::move(initial_logliks);
  return model;
}

std::pair<double, double> gp_predict(const GpModel& model, const Eigen::VectorXd& x) {
  if (model.X.rows() == 0) throw std::invalid_argument("gp predict: model is not fitted");
  if (x.size() != model.X.cols()) {
    throw std::invalid_argument("gp predict: expected " + std::to_string(model.X.cols()) +
                                " inputs, got " + std::to_string(x.size()));
  }
  const Eigen::VectorXd r = kernel_vector(model, x);
  const double mean = model.mu + r.dot(model.alpha);
  const Eigen::VectorXd v = model.L.triangularView<Eigen::Lower>().solve(r);
  const double variance = model.sigma2 * std::max(0.0, 1.0 - v.squaredNorm());
  return {mean, std::sqrt(variance)};
}

double ei_value(double mean, double sd, double f_min) {
  if (sd <= 1e-15) return std::max(f_min - mean, 0.0);
  const double u = (f_min - mean) / sd;
  const double cdf = 0.5 * std::erfc(-u / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * u * u) / std::sqrt(2.0 * 3.14159265358979323846);
  return std::max((f_min - mean) * cdf + sd * pdf, 0.0);
}

double expected_improvement(const GpModel& model, const Eigen::VectorXd& x, double f_min) {
  const auto [mean, sd] = gp_predict(model, x);
  return ei_value(mean, sd, f_min);
}

EiResult ei_optimize(const med::LogResponseFunction& f, const Eigen::MatrixXd& initial, int n_new,
                     const EiConfig& config,
                     const std::optional<Eigen::VectorXd>& initial_losses) {
  const Eigen::Index n0 = initial.rows();
  const Eigen::Index p = initial.cols();
  if (n0 < 2 || p < 1) throw std::invalid_argument("ei needs at least two initial points");
  if (n_new < 0) throw std::invalid_argument("ei: n_new must be >= 0");
  if (config.candidate_pool < 1 || config.polish_starts < 1) {
    throw std::invalid_argument("ei: candidate pool and polish starts must be positive");
  }
  if ((initial.array() < 0.0).any() || (initial.array() > 1.0).any()) {
    throw std::invalid_argument("ei: initial design must lie in the unit box");
  }
  if (initial_losses && initial_losses->size() != n0) {
    throw std::invalid_argument("ei: initial losses must match the initial design");
  }

  EiResult result;
  result.all_points.resize(n0 + n_new, p);
  result.all_points.topRows(n0) = initial;
  result.losses.resize(n0 + n_new);
  if (initial_losses) {
    result.losses.head(n0) = *initial_losses;
  } else {
    for (Eigen::Index i = 0; i < n0; ++i) {
      result.losses(i) = std::exp(-f(initial.row(i).transpose()));
      ++result.new_evaluations;
    }
  }

  for (int step = 1; step <= n_new; ++step) {
    const Eigen::Index n = n0 + step - 1;
    const Eigen::MatrixXd X = result.all_points.topRows(n);
    const Eigen::VectorXd y = result.losses.head(n);

    std::optional<GpModel> model;
    try {
      model = fit_gp(X, y, config.theta_bounds, config.restarts,
                     rng::derive(config.seed, "ei-gp", static_cast<std::uint64_t>(step)));
    } catch (const ConvergenceError&) {
      ++result.gp_failures;
    }

    rng::Stream stream(
        rng::derive(config.seed, "ei-candidates", static_cast<std::uint64_t>(step)));
    Eigen::MatrixXd candidates(config.candidate_pool, p);
    for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
      for (Eigen::Index d = 0; d < p; ++d) candidates(i, d) = stream.uniform01();
    }

    Eigen::VectorXd chosen;
    if (model) {
      const double f_min = y.minCoeff();
      std::vector<double> scores(static_cast<std::size_t>(candidates.rows()));
      util::parallel_for(candidates.rows(), [&](Eigen::Index i) {
        scores[static_cast<std::size_t>(i)] =
            expected_improvement(*model, candidates.row(i).transpose(), f_min);
      });

      // The best handful of candidates seed a coordinate-wise polish.
      std::vector<Eigen::Index> order(scores.size());
      std::iota(order.begin(), order.end(), 0);
      const auto starts = std::min<std::size_t>(
          static_cast<std::size_t>(config.polish_starts), order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<long>(starts), order.end(),
                        [&](Eigen::Index a, Eigen::Index b) {
                          const double sa = scores[static_cast<std::size_t>(a)];
                          const double sb = scores[static_cast<std::size_t>(b)];
                          return sa != sb ? sa > sb : a < b;
                        });

      double best_score = -kInf;
      for (std::size_t k = 0; k < starts; ++k) {
        Eigen::VectorXd x = candidates.row(order[k]).transpose();
        double value = scores[static_cast<std::size_t>(order[k])];
        double polish_step = 0.05;
        int budget = 200;
        while (polish_step >= 1e-4 && budget > 0) {
          Eigen::VectorXd best_move = x;
          double best_value = value;
          bool improved = false;
          for (Eigen::Index d = 0; d < p && budget > 0; ++d) {
            for (const double sign : {+1.0, -1.0}) {
              Eigen::VectorXd trial = x;
              trial(d) = std::clamp(trial(d) + sign * polish_step, 0.0, 1.0);
              if (trial(d) == x(d)) continue;
              const double trial_value = expected_improvement(*model, trial, f_min);
              --budget;
              if (trial_value > best_value) {
                best_value = trial_value;
                best_move = trial;
                improved = true;
              }
            }
          }
          if (improved) {
            x = best_move;
            value = best_value;
          } else {
            polish_step *= 0.5;
          }
        }
        if (value > best_score) {
          best_score = value;
          chosen = x;
        }
      }
    } else {
      // Exploration fallback: the candidate farthest from everything seen.
      double best_distance = -kInf;
      for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
        const double d = min_distance_to_rows(result.all_points, n, candidates.row(i).transpose());
        if (d > best_distance) {
          best_distance = d;
          chosen = candidates.row(i).transpose();
        }
      }
    }

    result.all_points.row(n) = chosen.transpose();
    result.losses(n) = std::exp(-f(chosen));
    ++result.new_evaluations;
  }
  return result;
}

}  // namespace medex::gp
