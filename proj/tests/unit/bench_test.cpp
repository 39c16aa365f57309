#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sys/stat.h>

#include "medex/bench.hpp"
#include "medex/errors.hpp"
#include "medex/io.hpp"

namespace bench = medex::bench;
namespace fs = std::filesystem;

namespace {

// The two zero-loss inputs of the toy problem.
Eigen::Vector2d toy_optimum_a() { return {0.3, (-0.5 + std::sqrt(1.45)) / 2.0}; }
Eigen::Vector2d toy_optimum_b() { return {0.7, (-0.5 + std::sqrt(3.05)) / 2.0}; }

fs::path write_script(const std::string& name, const std::string& body) {
  fs::path dir = fs::temp_directory_path() / "medex-bench-test";
  fs::create_directories(dir);
  fs::path file = dir / name;
  medex::io::atomic_write(file, body);
  chmod(file.c_str(), 0755);
  return file;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("loss matches hand values and validates dimensions") {
  Eigen::Vector2d t(1.0, 2.0), w(1.0, 0.5);
  CHECK(bench::loss(t, t, w) == 0.0);

  Eigen::VectorXd y1(1), t1(1), w1(1);
  t1 << 3.0;
  w1 << 0.5;
  y1 << 3.0 + 2.0 * 0.5;  // y - T = 2w
  CHECK(bench::loss(y1, t1, w1) == doctest::Approx(4.0));

  Eigen::VectorXd bad(3);
  CHECK_THROWS_AS(bench::loss(bad, t1, w1), std::invalid_argument);
  Eigen::VectorXd wneg(1);
  wneg << -1.0;
  CHECK_THROWS_AS(bench::loss(y1, t1, wneg), std::invalid_argument);
}

TEST_CASE("toy problem loss at the center matches the published value") {
  auto prob = bench::toy2d();
  auto rec = bench::evaluate(prob, Eigen::Vector2d(0.5, 0.5));
  REQUIRE(rec.z == 1);
  REQUIRE(rec.loss.has_value());
  // y1 = log 1.96, y2 = log 2 -> loss = (log 0.98)^2
  double expected = std::log(0.98) * std::log(0.98);
  CHECK(*rec.loss == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(*rec.loss - 4.081e-4) < 1e-5);
}

TEST_CASE("toy problem optima are feasible zero-loss points") {
  auto prob = bench::toy2d();
  for (const Eigen::Vector2d& x : {toy_optimum_a(), toy_optimum_b()}) {
    auto rec = bench::evaluate(prob, x);
    CHECK(rec.z == 1);
    REQUIRE(rec.loss.has_value());
    CHECK(*rec.loss < 1e-15);
  }
}

TEST_CASE("toy problem infeasible ellipse and boundary rule") {
  auto prob = bench::toy2d();
  auto center = bench::evaluate(prob, Eigen::Vector2d(0.1, 0.2));
  CHECK(center.z == 0);
  CHECK_FALSE(center.y.has_value());
  CHECK_FALSE(center.loss.has_value());

  // x = (0.1, 0.2 + 0.25) puts u at exactly zero; the boundary is feasible.
  double x2 = 0.2 + 0.25;
  CHECK(bench::evaluate(prob, Eigen::Vector2d(0.1, x2)).z == 1);
  CHECK(bench::evaluate(prob, Eigen::Vector2d(0.1, x2 - 1e-6)).z == 0);
}

TEST_CASE("dtlz2 responses match the hand-evaluated point") {
  auto prob = bench::dtlz2_mod(4);
  CHECK(prob.q == 4);
  CHECK(prob.weights(3) == 3.0);
  auto rec = bench::evaluate(prob, Eigen::Vector4d(0.0, 0.0, 0.0, 0.25));
  REQUIRE(rec.z == 1);
  REQUIRE(rec.y.has_value());
  CHECK((*rec.y)(0) == doctest::Approx(1.0));
  CHECK((*rec.y)(1) == doctest::Approx(0.0));
  CHECK((*rec.y)(2) == doctest::Approx(0.0));
  CHECK((*rec.y)(3) == doctest::Approx(0.0));
  double expected = 0.09 + 0.49 + 0.49 + (0.7 / 3.0) * (0.7 / 3.0);
  CHECK(*rec.loss == doctest::Approx(expected).epsilon(1e-9));
  CHECK(*rec.loss == doctest::Approx(1.12444).epsilon(1e-4));
}

TEST_CASE("dtlz2 infeasible box and boundaries") {
  auto prob = bench::dtlz2_mod(4);
  CHECK(bench::evaluate(prob, Eigen::Vector4d(0.1, 0.1, 0.1, 0.05)).z == 0);
  CHECK(bench::evaluate(prob, Eigen::Vector4d(0.2, 0.2, 0.2, 0.1)).z == 0);   // closed box
  CHECK(bench::evaluate(prob, Eigen::Vector4d(0.21, 0.2, 0.2, 0.1)).z == 1);  // outside on x1
  CHECK(bench::evaluate(prob, Eigen::Vector4d(0.2, 0.2, 0.2, 0.11)).z == 1);  // outside on x4
  CHECK_THROWS_AS(bench::dtlz2_mod(3), std::invalid_argument);
}

TEST_CASE("dtlz2 squared responses sum to (1+g)^2") {
  for (int p : {4, 6}) {
    auto prob = bench::dtlz2_mod(p);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(p, 0.37);
    x(0) = 0.0;
    x(1) = 0.0;
    auto rec = bench::evaluate(prob, x);
    REQUIRE(rec.z == 1);
    double g = (2.0 * x(p - 1) - 0.5) * (2.0 * x(p - 1) - 0.5);
    CHECK(rec.y->squaredNorm() == doctest::Approx((1.0 + g) * (1.0 + g)).epsilon(1e-12));
  }
}

TEST_CASE("evaluate validates the domain and recomputes loss consistently") {
  auto prob = bench::toy2d();
  CHECK_THROWS_AS(bench::evaluate(prob, Eigen::Vector2d(-0.1, 0.5)), std::invalid_argument);
  CHECK_THROWS_AS(bench::evaluate(prob, Eigen::Vector2d(0.5, 1.2)), std::invalid_argument);

  auto rec = bench::evaluate(prob, Eigen::Vector2d(0.8, 0.3));
  REQUIRE(rec.z == 1);
  CHECK(*rec.loss == bench::loss(*rec.y, prob.targets, prob.weights));
}

TEST_CASE("evaluation table bookkeeping") {
  auto prob = bench::toy2d();
  bench::EvaluationTable table;
  table.records.push_back(bench::evaluate(prob, Eigen::Vector2d(0.5, 0.5)));
  table.records.push_back(bench::evaluate(prob, Eigen::Vector2d(0.1, 0.2)));
  table.records.push_back(bench::evaluate(prob, Eigen::Vector2d(0.9, 0.9)));
  CHECK(table.count() == 3);
  CHECK(table.feasible_count() == 2);
  CHECK(table.infeasible_count() == 1);
  auto rec_a = bench::evaluate(prob, Eigen::Vector2d(0.5, 0.5));
  auto rec_b = bench::evaluate(prob, Eigen::Vector2d(0.9, 0.9));
  CHECK(table.max_feasible_loss() == std::max(*rec_a.loss, *rec_b.loss));
  auto X = table.inputs();
  CHECK(X.rows() == 3);
  CHECK(X(1, 0) == 0.1);
}

TEST_CASE("external problem round-trips a well-behaved stub") {
  auto script = write_script("echo_targets.py", R"(#!/usr/bin/env python3
import sys
rows = [l.strip() for l in open(sys.argv[1]) if l.strip()]
body = rows[1:]  # header x1,...,xp
with open(sys.argv[2], "w") as out:
    for _ in body:
        out.write("1,1,2\n")
)");
  bench::ExternalEvaluatorSpec spec;
  spec.command = "python3 " + script.string();
  spec.p = 2;
  spec.q = 2;
  spec.targets = Eigen::Vector2d(1.0, 2.0);
  spec.weights = Eigen::Vector2d(1.0, 1.0);
  auto prob = bench::external_problem(spec);

  auto rec = bench::evaluate(prob, Eigen::Vector2d(0.25, 0.75));
  CHECK(rec.z == 1);
  CHECK(*rec.loss == 0.0);

  Eigen::MatrixXd batch(3, 2);
  batch << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  auto evals = prob.batch_evaluator(batch);
  REQUIRE(evals.size() == 3);
  for (const auto& ev : evals) CHECK(ev.z == 1);
}

TEST_CASE("external problem reads headers and blank cells on failed rows") {
  auto script = write_script("mixed.py", R"(#!/usr/bin/env python3
import sys
rows = [l.strip() for l in open(sys.argv[1]) if l.strip()]
n = len(rows) - 1  # header x1,...,xp
with open(sys.argv[2], "w") as out:
    out.write("z,y1,y2\n")
    for i in range(n):
        out.write("1,0.5,1.5\n" if i % 2 == 0 else "0,,\n")
)");
  bench::ExternalEvaluatorSpec spec;
  spec.command = "python3 " + script.string();
  spec.p = 1;
  spec.q = 2;
  spec.targets = Eigen::Vector2d(0.5, 1.5);
  spec.weights = Eigen::Vector2d(1.0, 1.0);
  auto prob = bench::external_problem(spec);

  Eigen::MatrixXd batch(3, 1);
  batch << 0.1, 0.5, 0.9;
  auto evals = prob.batch_evaluator(batch);
  REQUIRE(evals.size() == 3);
  CHECK(evals[0].z == 1);
  CHECK(evals[0].y(0) == 0.5);
  CHECK(evals[1].z == 0);
  CHECK(evals[2].z == 1);

  // A word where a number or blank belongs means the columns are misaligned.
  auto garbled = write_script("garbled.sh", "#!/bin/sh\necho '0,oops,1' > \"$2\"\n");
  spec.command = garbled.string();
  auto prob2 = bench::external_problem(spec);
  Eigen::MatrixXd one(1, 1);
  one << 0.5;
  CHECK_THROWS_AS(prob2.batch_evaluator(one), medex::FormatError);

  // Feasible rows must carry every response.
  auto hollow = write_script("hollow.sh", "#!/bin/sh\necho '1,,2' > \"$2\"\n");
  spec.command = hollow.string();
  auto prob3 = bench::external_problem(spec);
  CHECK_THROWS_AS(prob3.batch_evaluator(one), medex::FormatError);
}

TEST_CASE("external problem treats a timeout as infeasible") {
  auto script = write_script("sleeper.sh", "#!/bin/sh\nsleep 5\n");
  bench::ExternalEvaluatorSpec spec;
  spec.command = script.string();
  spec.p = 1;
  spec.q = 1;
  spec.targets = Eigen::VectorXd::Ones(1);
  spec.weights = Eigen::VectorXd::Ones(1);
  spec.timeout_seconds = 0.2;
  auto prob = bench::external_problem(spec);
  Eigen::MatrixXd batch(2, 1);
  batch << 0.1, 0.9;
  auto evals = prob.batch_evaluator(batch);
  REQUIRE(evals.size() == 2);
  CHECK(evals[0].z == 0);
  CHECK(evals[1].z == 0);
}

TEST_CASE("external problem distinguishes failures from bad output") {
  auto failing = write_script("fail.sh", "#!/bin/sh\nexit 3\n");
  bench::ExternalEvaluatorSpec spec;
  spec.command = failing.string();
  spec.p = 1;
  spec.q = 2;
  spec.targets = Eigen::Vector2d(0.0, 0.0);
  spec.weights = Eigen::Vector2d(1.0, 1.0);
  auto prob = bench::external_problem(spec);
  Eigen::MatrixXd one(1, 1);
  one << 0.5;
  CHECK_THROWS_AS(prob.batch_evaluator(one), medex::EvaluationError);

  auto short_rows = write_script("short.sh", "#!/bin/sh\necho 1,1 > \"$2\"\n");
  spec.command = short_rows.string();
  auto prob2 = bench::external_problem(spec);
  CHECK_THROWS_AS(prob2.batch_evaluator(one), medex::FormatError);
}

}  // TEST_SUITE
