#ifndef MEDEX_GP_EI_HPP
#define MEDEX_GP_EI_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "medex/med.hpp"

namespace medex::gp {

// Constant-mean kriging model with an anisotropic squared-exponential kernel
// R_ij = exp(-sum_d (x_id - x_jd)^2 / (2 theta_d^2)).
struct GpModel {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd theta;   // per-dimension lengthscales
  double mu = 0.0;         // profiled constant mean
  double sigma2 = 0.0;     // profiled process variance
  double nugget = 0.0;
  Eigen::MatrixXd L;       // lower Cholesky factor of R + nugget * I
  Eigen::VectorXd alpha;   // (R + nugget * I)^{-1} (y - mu * 1)
  double loglik = 0.0;
  std::vector<double> restart_initial_logliks;
};

// Maximizes the profile log-likelihood over log-lengthscales by multi-start
// coordinate pattern search; the mean and variance have closed forms given
// theta. Cholesky failures escalate the nugget from 1e-10 to 1e-6 before
// giving up with a ConvergenceError.
GpModel fit_gp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               std::pair<double, double> theta_bounds = {1e-2, 1e1}, int restarts = 4,
               std::uint64_t seed = 0);

// Posterior mean and (nonnegative) standard deviation at x.
std::pair<double, double> gp_predict(const GpModel& model, const Eigen::VectorXd& x);

// Closed-form expected improvement for a N(mean, sd^2) prediction against the
// incumbent best value; collapses to max(f_min - mean, 0) as sd -> 0.
double ei_value(double mean, double sd, double f_min);

double expected_improvement(const GpModel& model, const Eigen::VectorXd& x, double f_min);

struct EiConfig {
  int candidate_pool = 4096;  // uniform candidates scored per step
  int polish_starts = 5;      // best candidates refined by coordinate search
  int restarts = 3;           // GP fit restarts per step
  std::pair<double, double> theta_bounds = {1e-2, 1e1};
  std::uint64_t seed = 0;
};

struct EiResult {
  Eigen::MatrixXd all_points;  // initial rows followed by the selected points
  Eigen::VectorXd losses;      // loss per row (imputed where infeasible)
  long new_evaluations = 0;
  int gp_failures = 0;  // steps that fell back to max-distance exploration
};

// Sequential expected-improvement search on the loss surface: fit a GP to all
// evaluated losses, pick the EI argmax over a dense candidate set plus local
// polish, evaluate it, and repeat n_new times. f follows the MED convention
// (log reciprocal loss), so losses are recovered as exp(-f). When a GP fit
// fails the step evaluates the candidate farthest from the data instead.
EiResult ei_optimize(const med::LogResponseFunction& f, const Eigen::MatrixXd& initial, int n_new,
                     const EiConfig& config = {},
                     const std::optional<Eigen::VectorXd>& initial_losses = std::nullopt);

}  // namespace medex::gp

#endif
