#ifndef MEDEX_BENCH_HPP
#define MEDEX_BENCH_HPP

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace medex::bench {

//! Raw evaluator outcome: feasibility flag plus responses (empty when z=0).
struct Evaluation {
  int z = 0;
  Eigen::VectorXd y;
};

//! An evaluable multi-response system on [0,1]^p with q outputs, target
//! vector T and positive weights W. Built-in problems are pure functions;
//! external problems shell out to a user command (see external_problem).
struct Problem {
  std::string name;
  int p = 0;
  int q = 0;
  Eigen::VectorXd targets;
  Eigen::VectorXd weights;
  std::function<Evaluation(const Eigen::VectorXd&)> evaluator;
  //! Optional batch form; set for external problems where one process call
  //! evaluates many rows. Falls back to row-by-row calls when absent.
  std::function<std::vector<Evaluation>(const Eigen::MatrixXd&)> batch_evaluator;
};

//! One row of the campaign data table: input x, feasibility z, and, exactly
//! when z=1, the response vector and its loss.
struct EvaluationRecord {
  Eigen::VectorXd x;
  int z = 0;
  std::optional<Eigen::VectorXd> y;
  std::optional<double> loss;
  std::string source = "initial";  // provenance: initial | med | ei | validation
  int cycle = 0;
};

struct EvaluationTable {
  std::vector<EvaluationRecord> records;

  std::size_t count() const { return records.size(); }
  std::size_t feasible_count() const;
  std::size_t infeasible_count() const { return count() - feasible_count(); }
  //! Largest loss among feasible records; throws if there are none.
  double max_feasible_loss() const;
  //! n x p matrix of all inputs, in record order.
  Eigen::MatrixXd inputs() const;
};

//! Weighted squared error loss: sum_j ((y_j - T_j)/w_j)^2.
double loss(const Eigen::VectorXd& y, const Eigen::VectorXd& targets,
            const Eigen::VectorXd& weights);

//! The two-input two-output illustration problem. Responses
//!   y1 = log(2 + (x1-0.7)(x1-0.3)),  y2 = log(2 + x2^2 + 0.5 x2 - x1),
//! targets (log 2, log 2). Infeasible inside the ellipse where
//!   u(x) = -0.25 + ((x1-0.1)/0.25)^2 + ((x2-0.2)/0.5)^2 < 0
//! (z = 1 exactly when the logistic probability e^u/(1+e^u) >= 0.5, so the
//! boundary u = 0 counts as feasible). Loss is zero at
//! (0.3, (-0.5+sqrt(1.45))/2) and (0.7, (-0.5+sqrt(3.05))/2).
Problem toy2d(double w1 = 1.0, double w2 = 20.0);

//! Modified DTLZ2 benchmark with q = p responses. For p = 4:
//!   y1 = (1+g) cos(a1) cos(a2) cos(b),  y2 = (1+g) cos(a1) cos(a2) sin(b),
//!   y3 = (1+g) cos(a1) sin(a2),         y4 = (1+g) sin(a1),
//! with a_i = x_i * 3pi/2, b = x3 * pi/2, g = (2 x4 - 0.5)^2, targets all
//! 0.7, weights (1,1,1,3), infeasible when x1,x2,x3 <= 0.2 and x4 <= 0.1.
//! For p > 4 the chain extends in the same pattern: angle factor 3pi/2 on
//! x1..x_{p-2}, pi/2 on x_{p-1}, g depends on x_p alone, targets stay 0.7,
//! weight 3 on the last response, and the infeasible box is [0,0.2] on all
//! but the last coordinate and [0,0.1] on the last.
Problem dtlz2_mod(int p);

//! Evaluate the problem at x (must lie in [0,1]^p; out-of-domain input is an
//! error here, clipping is the caller's business) and assemble a record.
EvaluationRecord evaluate(const Problem& problem, const Eigen::VectorXd& x);

//! Description of an external simulator invoked as
//!   command <input_csv> <output_csv>
//! Input: rows x1,...,xp (header unless write_header=false). Output: rows
//! z,y1,...,yq in the same order. A run past timeout_seconds is killed and
//! reported as all-infeasible (z=0), mirroring a non-converging simulation;
//! a nonzero exit is an EvaluationError and unparseable output a FormatError.
struct ExternalEvaluatorSpec {
  std::string command;
  int p = 0;
  int q = 0;
  Eigen::VectorXd targets;
  Eigen::VectorXd weights;
  double timeout_seconds = 60.0;
  bool write_header = true;
  bool batch_safe = false;  // true: concurrent invocations allowed
};

Problem external_problem(const ExternalEvaluatorSpec& spec);

}  // namespace medex::bench

#endif
