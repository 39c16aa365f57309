#ifndef MEDEX_MED_HPP
#define MEDEX_MED_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "medex/bench.hpp"
#include "medex/classify.hpp"
#include "medex/design.hpp"

namespace medex::med {

// Maps x in [0,1]^p to log r(x) where r(x) = 1/L(x); L is the true loss (with
// imputation) or a surrogate prediction.
using LogResponseFunction = std::function<double(const Eigen::VectorXd&)>;

// Losses are floored at this value before any log, so log r stays finite at
// exact target hits.
inline constexpr double kLossFloor = 1e-12;

// log q(x) = -log r(x) / (2p); the whole pipeline stays in the log domain.
double charge_log(double log_r, int p);

// E = sum_{i<j} q_i q_j / d_ij, accumulated as exp(log q_i + log q_j - log d).
// Coincident rows yield +infinity rather than an exception.
double total_energy(const Eigen::MatrixXd& points, const Eigen::VectorXd& log_charges);

// Energy added by placing x with log-charge lq_x against the existing set.
double energy_increment(const Eigen::MatrixXd& points, const Eigen::VectorXd& log_charges,
                        const Eigen::VectorXd& x, double log_charge_x);

enum class ClipPolicy { clip, reject };

struct MedConfig {
  int n = 20;               // batch size per iteration; must match the initial design
  int K = 4;                // iteration count
  int candidate_pool = 50;  // candidates drawn per new point
  double jitter_scale = 0.1;   // sd of the local Gaussian jitter, per dimension
  double jitter_decay = 0.7;   // jitter_scale multiplier applied after each iteration
  double local_fraction = 0.8; // share of candidates drawn near the parent point
  ClipPolicy clip_policy = ClipPolicy::clip;
  std::uint64_t seed = 0;
};

struct IterationStats {
  int iteration = 0;
  double best_loss = 0.0;    // min over every point evaluated so far
  double total_energy = 0.0; // energy of the full point set after this iteration
};

struct MedResult {
  Eigen::MatrixXd all_points;  // (K+1)*n rows: initial design then generated batches
  Eigen::VectorXd log_r;       // matching log-response values
  std::vector<IterationStats> energy_trace;
  long new_evaluations = 0;    // calls to f for generated points; exactly K*n
};

// Completes the loss column of an evaluation table: feasible rows keep their
// observed loss, infeasible rows receive the max observed feasible loss or
// the caller's M (which must be at least that max). All entries are floored
// at kLossFloor.
std::vector<double> impute_losses(const bench::EvaluationTable& table,
                                  std::optional<double> fixed_M = std::nullopt);

// Sequential minimum energy design. Each of K iterations proposes n points:
// per parent point (previous batch), candidate_pool candidates are drawn
// (local jitter around the parent plus global uniform draws), ranked by the
// energy increment against the current set using the nearest evaluated
// neighbor's charge as a proxy, and the best candidate is then evaluated with
// f. f is called exactly once per accepted point: K*n new evaluations.
// initial_log_r supplies the initial design's values when the caller already
// evaluated them; otherwise f is asked for those too (not counted as new).
MedResult med_generate(const design::DesignMatrix& initial, const LogResponseFunction& f,
                       const MedConfig& cfg,
                       const std::optional<Eigen::VectorXd>& initial_log_r = std::nullopt);

// Keeps the rows whose predicted feasibility probability reaches pi_star.
Eigen::MatrixXd filter_feasible(const Eigen::MatrixXd& points,
                                const classify::FeasibilityModel& model, double pi_star);

}  // namespace medex::med

#endif
