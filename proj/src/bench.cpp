#include "medex/bench.hpp"

#include <cmath>
#include <stdexcept>

namespace medex::bench {

std::size_t EvaluationTable::feasible_count() const {
  std::size_t n1 = 0;
  for (const auto& r : records) n1 += r.z == 1 ? 1 : 0;
  return n1;
}

double EvaluationTable::max_feasible_loss() const {
  double m = -1.0;
  for (const auto& r : records)
    if (r.z == 1 && r.loss) m = std::max(m, *r.loss);
  if (m < 0.0) throw std::runtime_error("evaluation table has no feasible records");
  return m;
}

Eigen::MatrixXd EvaluationTable::inputs() const {
  if (records.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(records.size()), records.front().x.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = records[i].x.transpose();
  return m;
}

double loss(const Eigen::VectorXd& y, const Eigen::VectorXd& targets,
            const Eigen::VectorXd& weights) {
  if (y.size() != targets.size() || y.size() != weights.size())
    throw std::invalid_argument("loss: y, targets, weights must have equal length");
  if ((weights.array() <= 0.0).any())
    throw std::invalid_argument("loss: weights must be positive");
  return ((y - targets).array() / weights.array()).square().sum();
}

Problem toy2d(double w1, double w2) {
  Problem prob;
  prob.name = "toy2d";
  prob.p = 2;
  prob.q = 2;
  prob.targets = Eigen::Vector2d(std::log(2.0), std::log(2.0));
  prob.weights = Eigen::Vector2d(w1, w2);
  prob.evaluator = [](const Eigen::VectorXd& x) {
    const double x1 = x(0), x2 = x(1);
    const double r1 = (x1 - 0.1) / 0.25;
    const double r2 = (x2 - 0.2) / 0.5;
    const double u = -0.25 + r1 * r1 + r2 * r2;
    Evaluation ev;
    if (u < 0.0) return ev;  // pi(u) < 0.5 -> infeasible
    ev.z = 1;
    ev.y.resize(2);
    ev.y(0) = std::log(2.0 + (x1 - 0.7) * (x1 - 0.3));
    ev.y(1) = std::log(2.0 + x2 * x2 + 0.5 * x2 - x1);
    return ev;
  };
  return prob;
}

Problem dtlz2_mod(int p) {
  if (p < 4) throw std::invalid_argument("dtlz2_mod: p must be >= 4");
  constexpr double pi = 3.14159265358979323846;
  Problem prob;
  prob.name = "dtlz2";
  prob.p = p;
  prob.q = p;
  prob.targets = Eigen::VectorXd::Constant(p, 0.7);
  prob.weights = Eigen::VectorXd::Ones(p);
  prob.weights(p - 1) = 3.0;
  prob.evaluator = [p, pi](const Eigen::VectorXd& x) {
    Evaluation ev;
    bool infeasible = x(p - 1) <= 0.1;
    for (int i = 0; infeasible && i < p - 1; ++i) infeasible = x(i) <= 0.2;
    if (infeasible) return ev;

    // Angles: 3pi/2 on x1..x_{p-2}, pi/2 on x_{p-1}; g from x_p only.
    Eigen::VectorXd a(p - 1);
    for (int i = 0; i < p - 2; ++i) a(i) = x(i) * 1.5 * pi;
    a(p - 2) = x(p - 2) * 0.5 * pi;
    const double g = (2.0 * x(p - 1) - 0.5) * (2.0 * x(p - 1) - 0.5);

    ev.z = 1;
    ev.y.resize(p);
    // y_1 carries the full cosine chain; each later response peels off one
    // cosine and ends in the sine of the removed angle; y_p = (1+g) sin(a_1).
    double chain = 1.0 + g;
    for (int i = 0; i < p - 1; ++i) chain *= std::cos(a(i));
    ev.y(0) = chain;
    for (int k = 2; k <= p; ++k) {
      double v = 1.0 + g;
      for (int i = 0; i < p - k; ++i) v *= std::cos(a(i));
      v *= std::sin(a(p - k));
      ev.y(k - 1) = v;
    }
    return ev;
  };
  return prob;
}

EvaluationRecord evaluate(const Problem& problem, const Eigen::VectorXd& x) {
  if (x.size() != problem.p)
    throw std::invalid_argument("evaluate: x has dimension " + std::to_string(x.size()) +
                                ", problem expects " + std::to_string(problem.p));
  if ((x.array() < 0.0).any() || (x.array() > 1.0).any())
    throw std::invalid_argument("evaluate: x outside [0,1]^p");

  Evaluation ev = problem.evaluator(x);
  EvaluationRecord rec;
  rec.x = x;
  rec.z = ev.z;
  if (ev.z == 1) {
    if (ev.y.size() != problem.q)
      throw std::runtime_error("evaluate: evaluator returned " + std::to_string(ev.y.size()) +
                               " responses, expected " + std::to_string(problem.q));
    rec.y = ev.y;
    rec.loss = loss(ev.y, problem.targets, problem.weights);
  }
  return rec;
}

}  // namespace medex::bench
