#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>

#include "medex/campaign.hpp"
#include "medex/classify.hpp"
#include "medex/design.hpp"
#include "medex/gp_ei.hpp"
#include "medex/med.hpp"
#include "medex/surrogate.hpp"

namespace py = pybind11;
using namespace medex;

namespace {

nlohmann::json to_nlohmann(const py::object& obj) {
  // Route dicts (or any python object) through the JSON text form.
  const std::string text =
      py::isinstance<py::str>(obj)
          ? obj.cast<std::string>()
          : py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return nlohmann::json::parse(text);
}

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(py::str(j.dump()));
}

design::DesignMatrix build_design(const std::string& type, int n, int p, int sweeps,
                                  std::uint64_t seed) {
  switch (campaign::design_type_from_name(type)) {
    case campaign::DesignType::random_lhd:
      return design::random_lhd(n, p, seed);
    case campaign::DesignType::maximin_lhd:
      return design::maximin_lhd(n, p, sweeps, seed);
    case campaign::DesignType::omlhd:
      return design::omlhd(n, p, {}, sweeps, seed);
    case campaign::DesignType::uniform:
      return design::uniform_design(n, p, seed);
  }
  throw std::logic_error("unreachable design type");
}

py::dict record_to_dict(const bench::EvaluationRecord& rec) {
  py::dict d;
  d["x"] = rec.x;
  d["z"] = rec.z;
  d["y"] = rec.y ? py::cast(*rec.y) : py::object(py::none());
  d["loss"] = rec.loss ? py::cast(*rec.loss) : py::object(py::none());
  d["source"] = rec.source;
  d["cycle"] = rec.cycle;
  return d;
}

py::dict med_result_to_dict(const med::MedResult& result) {
  py::dict d;
  d["all_points"] = result.all_points;
  d["log_r"] = result.log_r;
  d["new_evaluations"] = result.new_evaluations;
  py::list trace;
  for (const auto& it : result.energy_trace) {
    py::dict row;
    row["iteration"] = it.iteration;
    row["best_loss"] = it.best_loss;
    row["total_energy"] = it.total_energy;
    trace.append(row);
  }
  d["energy_trace"] = trace;
  return d;
}

}  // namespace

PYBIND11_MODULE(_medex, m) {
  m.doc() = "Sequential exploration of expensive constrained systems";

  m.def(
      "make_design",
      [](const std::string& type, int n, int p, int sweeps, std::uint64_t seed) {
        return build_design(type, n, p, sweeps, seed).points;
      },
      py::arg("type"), py::arg("n"), py::arg("p"), py::arg("sweeps") = 50, py::arg("seed") = 0,
      "Space-filling design on [0,1]^p; type is lhd|maximin|omlhd|uniform.");

  m.def(
      "evaluate",
      [](const py::object& problem, const Eigen::VectorXd& x) {
        const auto spec = campaign::ProblemSpec::from_json(to_nlohmann(problem));
        return record_to_dict(bench::evaluate(spec.instantiate(), x));
      },
      py::arg("problem"), py::arg("x"),
      "Evaluate a problem spec (dict or JSON string) at one point.");

  m.def(
      "loss",
      [](const Eigen::VectorXd& y, const Eigen::VectorXd& targets,
         const Eigen::VectorXd& weights) { return bench::loss(y, targets, weights); },
      py::arg("y"), py::arg("targets"), py::arg("weights"),
      "Weighted squared error sum_j ((y_j - T_j) / w_j)^2.");

  m.def(
      "med_generate",
      [](const Eigen::MatrixXd& initial, const std::function<double(Eigen::VectorXd)>& f, int K,
         int candidate_pool, double jitter_scale, double jitter_decay, double local_fraction,
         std::uint64_t seed, const std::optional<Eigen::VectorXd>& initial_log_r) {
        med::MedConfig cfg;
        cfg.n = static_cast<int>(initial.rows());
        cfg.K = K;
        cfg.candidate_pool = candidate_pool;
        cfg.jitter_scale = jitter_scale;
        cfg.jitter_decay = jitter_decay;
        cfg.local_fraction = local_fraction;
        cfg.seed = seed;
        const auto result = med::med_generate(design::DesignMatrix{initial}, f, cfg, initial_log_r);
        return med_result_to_dict(result);
      },
      py::arg("initial"), py::arg("f"), py::arg("K") = 4, py::arg("candidate_pool") = 50,
      py::arg("jitter_scale") = 0.1, py::arg("jitter_decay") = 0.7,
      py::arg("local_fraction") = 0.8, py::arg("seed") = 0,
      py::arg("initial_log_r") = std::nullopt,
      "Minimum energy design: K batches of initial.rows() points each; f maps a point to the "
      "log response -log(loss).");

  py::class_<classify::FeasibilityModel, std::shared_ptr<classify::FeasibilityModel>>(
      m, "Classifier", "Fitted feasibility model")
      .def_property_readonly("kind", &classify::FeasibilityModel::kind)
      .def("predict_proba", &classify::FeasibilityModel::predict_proba, py::arg("x"))
      .def("to_json", [](const classify::FeasibilityModel& model) {
        return to_python(model.to_json());
      })
      .def_static("from_json", [](const py::object& j) {
        return classify::model_from_json(to_nlohmann(j));
      });

  m.def(
      "fit_logistic",
      [](const Eigen::MatrixXd& X, const std::vector<int>& z) {
        return std::shared_ptr<classify::FeasibilityModel>(
            std::make_shared<classify::LogisticModel>(classify::fit_logistic(X, z)));
      },
      py::arg("X"), py::arg("z"), "Penalized logistic feasibility classifier.");

  m.def(
      "fit_forest",
      [](const Eigen::MatrixXd& X, const std::vector<int>& z, int ntree, std::uint64_t seed) {
        return std::shared_ptr<classify::FeasibilityModel>(
            std::make_shared<classify::ForestModel>(classify::fit_forest(X, z, ntree, 0, 1, seed)));
      },
      py::arg("X"), py::arg("z"), py::arg("ntree") = 200, py::arg("seed") = 0,
      "Random forest feasibility classifier.");

  py::class_<surrogate::LossSurrogate>(m, "Surrogate", "Fitted loss surrogate")
      .def("predict_loss",
           [](const surrogate::LossSurrogate& s, const Eigen::VectorXd& x) {
             return surrogate::predict_loss(s, x);
           },
           py::arg("x"))
      .def("to_json",
           [](const surrogate::LossSurrogate& s) { return to_python(s.to_json()); })
      .def_static("from_json", [](const py::object& j) {
        return surrogate::LossSurrogate::from_json(to_nlohmann(j));
      });

  m.def(
      "fit_loss_surrogate",
      [](const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Eigen::VectorXd& targets,
         const Eigen::VectorXd& weights, double delta, int num_clusters, double inclusion_rule,
         int folds, std::uint64_t seed,
         const std::shared_ptr<classify::FeasibilityModel>& classifier, double pi_star) {
        surrogate::SurrogateOptions opts;
        opts.delta = delta;
        opts.num_clusters = num_clusters;
        opts.inclusion_rule = inclusion_rule;
        opts.folds = folds;
        opts.seed = seed;
        return surrogate::fit_loss_surrogate(X, Y, targets, weights, opts, classifier, pi_star);
      },
      py::arg("X"), py::arg("Y"), py::arg("targets"), py::arg("weights"), py::arg("delta") = 0.95,
      py::arg("num_clusters") = 0, py::arg("inclusion_rule") = 0.01, py::arg("folds") = 5,
      py::arg("seed") = 0, py::arg("classifier") = nullptr, py::arg("pi_star") = 0.5,
      "Screen responses, cluster transformed residuals, and fit chained lasso models.");

  py::class_<gp::GpModel>(m, "GpModel", "Fitted Gaussian process")
      .def_readonly("theta", &gp::GpModel::theta)
      .def_readonly("mu", &gp::GpModel::mu)
      .def_readonly("sigma2", &gp::GpModel::sigma2)
      .def_readonly("nugget", &gp::GpModel::nugget)
      .def_readonly("loglik", &gp::GpModel::loglik)
      .def("predict",
           [](const gp::GpModel& model, const Eigen::VectorXd& x) {
             return gp::gp_predict(model, x);
           },
           py::arg("x"), "Posterior (mean, sd) at x.");

  m.def(
      "fit_gp",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::pair<double, double> bounds,
         int restarts, std::uint64_t seed) { return gp::fit_gp(X, y, bounds, restarts, seed); },
      py::arg("X"), py::arg("y"), py::arg("theta_bounds") = std::pair<double, double>{1e-2, 1e1},
      py::arg("restarts") = 4, py::arg("seed") = 0,
      "Anisotropic squared-exponential GP with profiled mean and variance.");

  m.def(
      "expected_improvement",
      [](const gp::GpModel& model, const Eigen::VectorXd& x, double f_min) {
        return gp::expected_improvement(model, x, f_min);
      },
      py::arg("model"), py::arg("x"), py::arg("f_min"));

  m.def(
      "ei_optimize",
      [](const std::function<double(Eigen::VectorXd)>& f, const Eigen::MatrixXd& initial,
         int n_new, std::uint64_t seed, const std::optional<Eigen::VectorXd>& initial_losses) {
        gp::EiConfig cfg;
        cfg.seed = seed;
        const auto result = gp::ei_optimize(f, initial, n_new, cfg, initial_losses);
        py::dict d;
        d["all_points"] = result.all_points;
        d["losses"] = result.losses;
        d["new_evaluations"] = result.new_evaluations;
        d["gp_failures"] = result.gp_failures;
        return d;
      },
      py::arg("f"), py::arg("initial"), py::arg("n_new"), py::arg("seed") = 0,
      py::arg("initial_losses") = std::nullopt,
      "Sequential expected-improvement minimization of the log response.");

  m.def(
      "run_exploration",
      [](const py::object& config) {
        const auto cfg = campaign::CampaignConfig::from_json(to_nlohmann(config));
        const auto problem = cfg.problem.instantiate();
        const auto state = campaign::run_exploration(cfg);
        py::dict d;
        d["state"] = to_python(state.to_json());
        d["table_csv"] = campaign::table_to_csv(state.table, problem.p, problem.q);
        py::list records;
        for (const auto& rec : state.table.records) records.append(record_to_dict(rec));
        d["records"] = records;
        return d;
      },
      py::arg("config"),
      "Run a full exploration campaign from a config dict or JSON string.");

  m.def(
      "compare_designs",
      [](const py::object& problem, int initial_size, int design_sweeps, int reps,
         std::uint64_t seed_base, int threads) {
        const auto spec = campaign::ProblemSpec::from_json(to_nlohmann(problem));
        campaign::CompareConfig cfg;
        cfg.initial_size = initial_size;
        cfg.design_sweeps = design_sweeps;
        cfg.reps = reps;
        cfg.seed_base = seed_base;
        cfg.threads = threads;
        const auto stats = campaign::compare_designs(spec, cfg);
        py::dict d;
        d["summary"] = to_python(stats.to_json());
        d["csv"] = stats.to_csv();
        return d;
      },
      py::arg("problem"), py::arg("initial_size") = 100, py::arg("design_sweeps") = 50,
      py::arg("reps") = 50, py::arg("seed_base") = 0, py::arg("threads") = 0,
      "Paired comparison of the proposed design against uniform sampling.");

  m.def(
      "table_from_csv",
      [](const std::string& text, int p, int q) {
        const auto table = campaign::table_from_csv(text, p, q);
        py::list records;
        for (const auto& rec : table.records) records.append(record_to_dict(rec));
        return records;
      },
      py::arg("text"), py::arg("p"), py::arg("q"),
      "Parse an evaluation table CSV into a list of record dicts.");

  m.attr("__version__") = "0.1.0";
}
