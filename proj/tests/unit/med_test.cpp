#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "medex/bench.hpp"
#include "medex/design.hpp"
#include "medex/errors.hpp"
#include "medex/med.hpp"
#include "medex/rng.hpp"

namespace med = medex::med;
namespace bench = medex::bench;
namespace classify = medex::classify;
namespace design = medex::design;
using medex::rng::derive;
using medex::rng::Stream;

namespace {

// True-loss log response for a built-in problem, with infeasible inputs
// mapped to the given substitute loss.
med::LogResponseFunction problem_log_response(const bench::Problem& prob, double infeasible_loss) {
  return [prob, infeasible_loss](const Eigen::VectorXd& x) {
    auto rec = bench::evaluate(prob, x);
    double value = rec.z == 1 ? *rec.loss : infeasible_loss;
    return -std::log(std::max(value, med::kLossFloor));
  };
}

bench::EvaluationRecord feasible_record(double loss_value) {
  bench::EvaluationRecord rec;
  rec.x = Eigen::Vector2d(0.5, 0.5);
  rec.z = 1;
  rec.y = Eigen::Vector2d(0.0, 0.0);
  rec.loss = loss_value;
  return rec;
}

bench::EvaluationRecord infeasible_record() {
  bench::EvaluationRecord rec;
  rec.x = Eigen::Vector2d(0.1, 0.2);
  rec.z = 0;
  return rec;
}

}  // namespace

TEST_SUITE("med") {

TEST_CASE("charge spot values") {
  CHECK(med::charge_log(0.0, 3) == 0.0);
  CHECK(std::exp(med::charge_log(std::log(16.0), 2)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::exp(med::charge_log(std::log(4.0), 1)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(med::charge_log(0.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(med::charge_log(std::numeric_limits<double>::infinity(), 2),
                  std::invalid_argument);
}

TEST_CASE("total energy matches hand values") {
  Eigen::MatrixXd two(2, 2);
  two << 0.0, 0.0, 0.5, 0.0;
  CHECK(med::total_energy(two, Eigen::Vector2d(0.0, 0.0)) == doctest::Approx(2.0));

  Eigen::MatrixXd three(3, 1);
  three << 0.0, 0.5, 1.0;
  CHECK(med::total_energy(three, Eigen::Vector3d(0.0, 0.0, 0.0)) == doctest::Approx(5.0));

  // Doubling every charge quadruples the energy.
  double log2 = std::log(2.0);
  CHECK(med::total_energy(three, Eigen::Vector3d(log2, log2, log2)) == doctest::Approx(20.0));

  Eigen::MatrixXd dup(2, 2);
  dup << 0.3, 0.3, 0.3, 0.3;
  CHECK(std::isinf(med::total_energy(dup, Eigen::Vector2d(0.0, 0.0))));

  CHECK_THROWS_AS(med::total_energy(Eigen::MatrixXd::Zero(1, 2), Eigen::VectorXd::Zero(1)),
                  std::invalid_argument);
}

TEST_CASE("total energy agrees with a brute-force double loop") {
  Stream s(derive(3, "energy"));
  for (int rep = 0; rep < 20; ++rep) {
    int m = 2 + static_cast<int>(s.uniform_int(49));
    int p = 1 + static_cast<int>(s.uniform_int(5));
    Eigen::MatrixXd pts(m, p);
    Eigen::VectorXd lq(m);
    for (int i = 0; i < m; ++i) {
      for (int d = 0; d < p; ++d) pts(i, d) = s.uniform01();
      lq(i) = s.uniform(-2.0, 2.0);
    }
    double brute = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        brute += std::exp(lq(i)) * std::exp(lq(j)) / (pts.row(i) - pts.row(j)).norm();
    double fast = med::total_energy(pts, lq);
    CHECK(std::abs(fast - brute) <= 1e-12 * std::max(1.0, std::abs(brute)));
  }
}

TEST_CASE("energy increment equals the energy difference") {
  Stream s(derive(7, "increment"));
  Eigen::MatrixXd pts(10, 3);
  Eigen::VectorXd lq(10);
  for (int i = 0; i < 10; ++i) {
    for (int d = 0; d < 3; ++d) pts(i, d) = s.uniform01();
    lq(i) = s.uniform(-1.0, 1.0);
  }
  Eigen::VectorXd x(3);
  x << 0.21, 0.52, 0.83;
  double lqx = 0.4;

  Eigen::MatrixXd grown(11, 3);
  grown.topRows(10) = pts;
  grown.row(10) = x.transpose();
  Eigen::VectorXd lq_grown(11);
  lq_grown.head(10) = lq;
  lq_grown(10) = lqx;
  double diff = med::total_energy(grown, lq_grown) - med::total_energy(pts, lq);
  CHECK(med::energy_increment(pts, lq, x, lqx) ==
        doctest::Approx(diff).epsilon(1e-10));
}

TEST_CASE("imputation fills infeasible rows with the worst observed loss") {
  bench::EvaluationTable table;
  table.records.push_back(feasible_record(0.5));
  table.records.push_back(infeasible_record());
  table.records.push_back(feasible_record(2.0));
  table.records.push_back(infeasible_record());

  auto losses = med::impute_losses(table);
  REQUIRE(losses.size() == 4);
  CHECK(losses[0] == 0.5);
  CHECK(losses[1] == 2.0);
  CHECK(losses[2] == 2.0);
  CHECK(losses[3] == 2.0);

  auto fixed = med::impute_losses(table, 5.0);
  CHECK(fixed[1] == 5.0);
  CHECK(fixed[0] == 0.5);
  CHECK_THROWS_AS(med::impute_losses(table, 1.0), std::invalid_argument);
}

TEST_CASE("imputation respects the loss floor and feasibility requirements") {
  bench::EvaluationTable all_feasible;
  all_feasible.records.push_back(feasible_record(0.25));
  all_feasible.records.push_back(feasible_record(0.0));
  auto losses = med::impute_losses(all_feasible);
  CHECK(losses[0] == 0.25);
  CHECK(losses[1] == med::kLossFloor);

  bench::EvaluationTable none;
  none.records.push_back(infeasible_record());
  CHECK_THROWS_WITH_AS(med::impute_losses(none), "initial design found no feasible points",
                       medex::EvaluationError);
}

TEST_CASE("generation spends exactly K*n evaluations on new points") {
  auto prob = bench::toy2d();
  auto initial = design::maximin_lhd(10, 2, 20, 1);

  long calls = 0;
  auto base = problem_log_response(prob, 10.0);
  med::LogResponseFunction counting = [&](const Eigen::VectorXd& x) {
    ++calls;
    return base(x);
  };

  med::MedConfig cfg;
  cfg.n = 10;
  cfg.K = 3;
  cfg.seed = 5;
  Eigen::VectorXd initial_log_r(10);
  for (int i = 0; i < 10; ++i) initial_log_r(i) = base(initial.points.row(i).transpose());

  auto result = med::med_generate(initial, counting, cfg, initial_log_r);
  CHECK(calls == 30);
  CHECK(result.new_evaluations == 30);
  CHECK(result.all_points.rows() == 40);
  CHECK(result.log_r.size() == 40);
  CHECK(result.energy_trace.size() == 3);

  // Without precomputed values the initial design is evaluated too, but those
  // calls are not "new".
  calls = 0;
  auto again = med::med_generate(initial, counting, cfg);
  CHECK(calls == 40);
  CHECK(again.new_evaluations == 30);
}

TEST_CASE("generation is bit-reproducible and stays in the box") {
  auto prob = bench::toy2d();
  auto initial = design::maximin_lhd(8, 2, 20, 2);
  auto f = problem_log_response(prob, 5.0);
  med::MedConfig cfg;
  cfg.n = 8;
  cfg.K = 3;
  cfg.seed = 11;

  auto a = med::med_generate(initial, f, cfg);
  auto b = med::med_generate(initial, f, cfg);
  CHECK(a.all_points == b.all_points);
  CHECK(a.log_r == b.log_r);
  CHECK(a.all_points.minCoeff() >= 0.0);
  CHECK(a.all_points.maxCoeff() <= 1.0);

  cfg.clip_policy = med::ClipPolicy::reject;
  auto c = med::med_generate(initial, f, cfg);
  CHECK(c.all_points.minCoeff() >= 0.0);
  CHECK(c.all_points.maxCoeff() <= 1.0);
}

TEST_CASE("candidate ranking is invariant to rescaling the response") {
  auto prob = bench::toy2d();
  auto initial = design::maximin_lhd(8, 2, 20, 3);
  auto f = problem_log_response(prob, 5.0);
  // r -> c * r shifts log r by log c; the greedy choice must not move.
  med::LogResponseFunction scaled = [&](const Eigen::VectorXd& x) {
    return f(x) + std::log(37.0);
  };
  med::MedConfig cfg;
  cfg.n = 8;
  cfg.K = 2;
  cfg.seed = 13;
  auto base = med::med_generate(initial, f, cfg);
  auto shifted = med::med_generate(initial, scaled, cfg);
  CHECK(base.all_points == shifted.all_points);
}

TEST_CASE("constant response degrades to a space-filling spread") {
  med::LogResponseFunction flat = [](const Eigen::VectorXd&) { return 0.0; };
  std::vector<double> med_min, uniform_min;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto initial = design::maximin_lhd(10, 2, 20, seed);
    med::MedConfig cfg;
    cfg.n = 10;
    cfg.K = 2;
    cfg.seed = seed;
    auto result = med::med_generate(initial, flat, cfg);
    med_min.push_back(design::min_pairwise_distance(result.all_points));
    uniform_min.push_back(
        design::min_pairwise_distance(design::uniform_design(30, 2, seed).points));
  }
  std::sort(med_min.begin(), med_min.end());
  std::sort(uniform_min.begin(), uniform_min.end());
  CHECK(0.5 * (med_min[4] + med_min[5]) >= 0.5 * (uniform_min[4] + uniform_min[5]));
}

TEST_CASE("generation rejects malformed configuration") {
  auto initial = design::random_lhd(6, 2, 1);
  med::LogResponseFunction flat = [](const Eigen::VectorXd&) { return 0.0; };
  med::MedConfig cfg;
  cfg.n = 5;  // mismatch
  CHECK_THROWS_AS(med::med_generate(initial, flat, cfg), std::invalid_argument);
  cfg.n = 6;
  cfg.K = 0;
  CHECK_THROWS_AS(med::med_generate(initial, flat, cfg), std::invalid_argument);
  cfg.K = 1;
  cfg.candidate_pool = 0;
  CHECK_THROWS_AS(med::med_generate(initial, flat, cfg), std::invalid_argument);

  cfg.candidate_pool = 10;
  design::DesignMatrix outside;
  outside.points = Eigen::MatrixXd::Constant(6, 2, 1.5);
  CHECK_THROWS_AS(med::med_generate(outside, flat, cfg), std::invalid_argument);
}

TEST_CASE("evaluator failures carry the offending point") {
  auto initial = design::random_lhd(4, 2, 9);
  med::LogResponseFunction broken = [](const Eigen::VectorXd& x) -> double {
    if (x(0) > -1.0) throw std::runtime_error("backend exploded");
    return 0.0;
  };
  med::MedConfig cfg;
  cfg.n = 4;
  cfg.K = 1;
  try {
    med::med_generate(initial, broken, cfg);
    FAIL("expected an EvaluationError");
  } catch (const medex::EvaluationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("backend exploded") != std::string::npos);
    CHECK(msg.find("x=(") != std::string::npos);
  }
}

TEST_CASE("feasibility gate keeps the points above the threshold") {
  classify::LogisticModel model;
  model.intercept = -5.0;
  model.coefficients = Eigen::VectorXd::Constant(1, 10.0);
  model.feature_means = Eigen::VectorXd::Zero(1);
  model.feature_sds = Eigen::VectorXd::Ones(1);

  Eigen::MatrixXd points(5, 1);
  points << 0.1, 0.3, 0.5, 0.7, 0.9;
  auto kept = med::filter_feasible(points, model, 0.5);
  REQUIRE(kept.rows() == 3);  // sigma(0) = 0.5 at x = 0.5, boundary included
  CHECK(kept(0, 0) == 0.5);
  CHECK(kept(1, 0) == 0.7);
  CHECK(kept(2, 0) == 0.9);

  CHECK(med::filter_feasible(points, model, 0.0).rows() == 5);
  CHECK(med::filter_feasible(points, model, 1.1).rows() == 0);
}

}  // TEST_SUITE
