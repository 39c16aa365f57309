#include "medex/med.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "medex/errors.hpp"
#include "medex/io.hpp"
#include "medex/rng.hpp"

namespace medex::med {

double charge_log(double log_r, int p) {
  if (p < 1) throw std::invalid_argument("charge_log: dimension must be positive");
  if (!std::isfinite(log_r)) throw std::invalid_argument("charge_log: log_r must be finite");
  return -log_r / (2.0 * p);
}

double total_energy(const Eigen::MatrixXd& points, const Eigen::VectorXd& log_charges) {
  const Eigen::Index m = points.rows();
  if (m < 2) throw std::invalid_argument("total_energy: need at least two points");
  if (log_charges.size() != m)
    throw std::invalid_argument("total_energy: one charge per point required");
  double energy = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      double d2 = (points.row(i) - points.row(j)).squaredNorm();
      if (d2 == 0.0) return std::numeric_limits<double>::infinity();
      energy += std::exp(log_charges(i) + log_charges(j) - 0.5 * std::log(d2));
    }
  }
  return energy;
}

double energy_increment(const Eigen::MatrixXd& points, const Eigen::VectorXd& log_charges,
                        const Eigen::VectorXd& x, double log_charge_x) {
  double inc = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double d2 = (points.row(i).transpose() - x).squaredNorm();
    if (d2 == 0.0) return std::numeric_limits<double>::infinity();
    inc += std::exp(log_charge_x + log_charges(i) - 0.5 * std::log(d2));
  }
  return inc;
}

std::vector<double> impute_losses(const bench::EvaluationTable& table,
                                  std::optional<double> fixed_M) {
  if (table.feasible_count() == 0)
    throw EvaluationError("initial design found no feasible points");
  double M = table.max_feasible_loss();
  if (fixed_M) {
    if (*fixed_M < M)
      throw std::invalid_argument("impute_losses: fixed M is below the max observed loss");
    M = *fixed_M;
  }
  std::vector<double> out;
  out.reserve(table.records.size());
  for (const auto& rec : table.records) {
    double value = rec.z == 1 && rec.loss ? *rec.loss : M;
    out.push_back(std::max(value, kLossFloor));
  }
  return out;
}

namespace {

std::string point_to_string(const Eigen::VectorXd& x) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    if (d) os << ",";
    os << io::format_real(x(d));
  }
  os << ")";
  return os.str();
}

bool in_unit_box(const Eigen::VectorXd& x) {
  return (x.array() >= 0.0).all() && (x.array() <= 1.0).all();
}

double call_log_response(const LogResponseFunction& f, const Eigen::VectorXd& x) {
  double value;
  try {
    value = f(x);
  } catch (const std::exception& e) {
    throw EvaluationError(std::string("log-response evaluation failed at x=") +
                          point_to_string(x) + ": " + e.what());
  }
  if (std::isnan(value))
    throw EvaluationError("log-response evaluation returned NaN at x=" + point_to_string(x));
  return value;
}

}  // namespace

MedResult med_generate(const design::DesignMatrix& initial, const LogResponseFunction& f,
                       const MedConfig& cfg,
                       const std::optional<Eigen::VectorXd>& initial_log_r) {
  const int n = initial.n();
  const int p = initial.p();
  if (cfg.n != n) throw std::invalid_argument("med_generate: config n must match initial rows");
  if (n < 2) throw std::invalid_argument("med_generate: need at least two initial points");
  if (cfg.K < 1) throw std::invalid_argument("med_generate: K must be >= 1");
  if (cfg.candidate_pool < 1)
    throw std::invalid_argument("med_generate: candidate_pool must be >= 1");
  if (cfg.jitter_scale <= 0.0 || cfg.jitter_scale > 1.0)
    throw std::invalid_argument("med_generate: jitter_scale outside (0,1]");
  if (cfg.local_fraction < 0.0 || cfg.local_fraction > 1.0)
    throw std::invalid_argument("med_generate: local_fraction outside [0,1]");
  if ((initial.points.array() < 0.0).any() || (initial.points.array() > 1.0).any())
    throw std::invalid_argument("med_generate: initial design outside [0,1]^p");
  if (initial_log_r && initial_log_r->size() != n)
    throw std::invalid_argument("med_generate: initial_log_r length must match initial rows");

  const Eigen::Index total = static_cast<Eigen::Index>(cfg.K + 1) * n;
  MedResult result;
  result.all_points.resize(total, p);
  result.all_points.topRows(n) = initial.points;
  result.log_r.resize(total);
  Eigen::VectorXd log_q(total);
  for (int i = 0; i < n; ++i) {
    double lr = initial_log_r ? (*initial_log_r)(i)
                              : call_log_response(f, initial.points.row(i).transpose());
    result.log_r(i) = lr;
    log_q(i) = charge_log(lr, p);
  }

  rng::Stream stream(rng::derive(cfg.seed, "med-generate"));
  constexpr double kDuplicateGuard = 1e-9;
  double jitter = cfg.jitter_scale;
  Eigen::Index count = n;

  for (int k = 1; k <= cfg.K; ++k) {
    const Eigen::Index parent_offset = static_cast<Eigen::Index>(k - 1) * n;
    for (int j = 0; j < n; ++j) {
      const Eigen::VectorXd parent =
          result.all_points.row(parent_offset + j).transpose();

      Eigen::VectorXd best_candidate;
      double best_increment = std::numeric_limits<double>::infinity();
      int found = 0;
      // Keep drawing pools until at least one candidate clears the duplicate
      // guard; in practice the first pool always does.
      for (int attempt = 0; attempt < 100 && found == 0; ++attempt) {
        for (int c = 0; c < cfg.candidate_pool; ++c) {
          Eigen::VectorXd x(p);
          bool local = stream.uniform01() < cfg.local_fraction;
          if (local) {
            for (int d = 0; d < p; ++d) x(d) = parent(d) + jitter * stream.normal();
            if (cfg.clip_policy == ClipPolicy::clip) {
              x = x.cwiseMax(0.0).cwiseMin(1.0);
            } else {
              int redraws = 0;
              while (!in_unit_box(x) && redraws < 100) {
                for (int d = 0; d < p; ++d) x(d) = parent(d) + jitter * stream.normal();
                ++redraws;
              }
              if (!in_unit_box(x))
                for (int d = 0; d < p; ++d) x(d) = stream.uniform01();
            }
          } else {
            for (int d = 0; d < p; ++d) x(d) = stream.uniform01();
          }

          double nearest_d2 = std::numeric_limits<double>::infinity();
          Eigen::Index nearest = 0;
          for (Eigen::Index i = 0; i < count; ++i) {
            double d2 = (result.all_points.row(i).transpose() - x).squaredNorm();
            if (d2 < nearest_d2) {
              nearest_d2 = d2;
              nearest = i;
            }
          }
          if (nearest_d2 < kDuplicateGuard * kDuplicateGuard) continue;

          // Charge proxy: the nearest evaluated point's response stands in
          // for the candidate's, so ranking needs no extra f calls.
          double proxy_log_q = charge_log(result.log_r(nearest), p);
          double inc = energy_increment(result.all_points.topRows(count), log_q.head(count), x,
                                        proxy_log_q);
          // Strict inequality: ties keep the earliest candidate.
          if (inc < best_increment) {
            best_increment = inc;
            best_candidate = x;
          }
          ++found;
        }
      }
      if (found == 0)
        throw EvaluationError("med_generate: could not draw a candidate distinct from the "
                              "existing design");

      double lr = call_log_response(f, best_candidate);
      result.all_points.row(count) = best_candidate.transpose();
      result.log_r(count) = lr;
      log_q(count) = charge_log(lr, p);
      ++count;
      ++result.new_evaluations;
    }
    IterationStats stats;
    stats.iteration = k;
    stats.best_loss = std::exp(-result.log_r.head(count).maxCoeff());
    stats.total_energy = total_energy(result.all_points.topRows(count), log_q.head(count));
    result.energy_trace.push_back(stats);
    jitter *= cfg.jitter_decay;
  }
  return result;
}

Eigen::MatrixXd filter_feasible(const Eigen::MatrixXd& points,
                                const classify::FeasibilityModel& model, double pi_star) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    if (model.predict_proba(points.row(i).transpose()) >= pi_star) keep.push_back(i);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), points.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = points.row(keep[i]);
  return out;
}

}  // namespace medex::med
