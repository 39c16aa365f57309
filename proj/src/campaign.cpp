#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "medex/campaign.hpp"
#include "medex/design.hpp"
#include "medex/errors.hpp"
#include "medex/gp_ei.hpp"
#include "medex/io.hpp"
#include "medex/parallel.hpp"
#include "medex/rng.hpp"

namespace medex::campaign {

namespace {

constexpr int kSchemaVersion = 1;

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return key == k; }) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

const json& require(const json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing key '" + std::string(key) + "' in " + where);
  return *it;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (j.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()),
                    static_cast<Eigen::Index>(j.at(0).size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != m.cols()) {
      throw FormatError("ragged matrix in state document");
    }
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(i, c) = row.at(static_cast<std::size_t>(c));
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i));
  return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

design::DesignMatrix make_initial(const InitialDesign& d, int p, std::uint64_t seed) {
  switch (d.type) {
    case DesignType::random_lhd:
      return design::random_lhd(d.size, p, seed);
    case DesignType::maximin_lhd:
      return design::maximin_lhd(d.size, p, d.sweeps, seed);
    case DesignType::omlhd:
      return design::omlhd(d.size, p, {}, d.sweeps, seed);
    case DesignType::uniform:
      return design::uniform_design(d.size, p, seed);
  }
  throw std::logic_error("unreachable design type");
}

// Evaluates every row (batched when the problem supports it) and appends the
// records with the given provenance.
void append_rows(bench::EvaluationTable& table, const bench::Problem& problem,
                 const Eigen::MatrixXd& points, const std::string& source, int cycle) {
  if (problem.batch_evaluator) {
    const auto evals = problem.batch_evaluator(points);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      bench::EvaluationRecord rec;
      rec.x = points.row(i).transpose();
      rec.z = evals[static_cast<std::size_t>(i)].z;
      if (rec.z == 1) {
        rec.y = evals[static_cast<std::size_t>(i)].y;
        rec.loss = bench::loss(*rec.y, problem.targets, problem.weights);
      }
      rec.source = source;
      rec.cycle = cycle;
      table.records.push_back(std::move(rec));
    }
    return;
  }
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    auto rec = bench::evaluate(problem, points.row(i).transpose());
    rec.source = source;
    rec.cycle = cycle;
    table.records.push_back(std::move(rec));
  }
}

std::vector<int> feasibility_labels(const bench::EvaluationTable& table) {
  std::vector<int> z;
  z.reserve(table.count());
  for (const auto& rec : table.records) z.push_back(rec.z);
  return z;
}

std::shared_ptr<classify::FeasibilityModel> fit_campaign_classifier(
    const CampaignConfig& cfg, const bench::EvaluationTable& table, int cycle) {
  const Eigen::MatrixXd X = table.inputs();
  const std::vector<int> z = feasibility_labels(table);
  switch (cfg.classifier) {
    case ClassifierKind::none:
      return nullptr;
    case ClassifierKind::logistic:
      return std::make_shared<classify::LogisticModel>(classify::fit_logistic(X, z));
    case ClassifierKind::forest:
      return std::make_shared<classify::ForestModel>(classify::fit_forest(
          X, z, 200, 0, 1,
          rng::derive(cfg.seed, "forest", static_cast<std::uint64_t>(cycle))));
    case ClassifierKind::select_best: {
      const auto split = classify::stratified_split(
          z, 0.2, rng::derive(cfg.seed, "select-split", static_cast<std::uint64_t>(cycle)));
      const auto take = [&](const std::vector<int>& rows, Eigen::MatrixXd& Xs,
                            std::vector<int>& zs) {
        Xs.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
        zs.clear();
        for (std::size_t i = 0; i < rows.size(); ++i) {
          Xs.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
          zs.push_back(z[static_cast<std::size_t>(rows[i])]);
        }
      };
      Eigen::MatrixXd X_train, X_test;
      std::vector<int> z_train, z_test;
      take(split.train, X_train, z_train);
      take(split.test, X_test, z_test);
      const std::uint64_t forest_seed =
          rng::derive(cfg.seed, "select-forest", static_cast<std::uint64_t>(cycle));
      const std::vector<classify::ClassifierCandidate> candidates = {
          {"logistic",
           [](const Eigen::MatrixXd& Xf, const std::vector<int>& zf) {
             return std::make_shared<classify::LogisticModel>(classify::fit_logistic(Xf, zf));
           }},
          {"forest",
           [forest_seed](const Eigen::MatrixXd& Xf, const std::vector<int>& zf) {
             return std::make_shared<classify::ForestModel>(
                 classify::fit_forest(Xf, zf, 200, 0, 1, forest_seed));
           }},
      };
      auto result = classify::select_classifier(candidates, X_train, z_train, X_test, z_test);
      // The chosen family is refit on everything the campaign has seen.
      return candidates[static_cast<std::size_t>(result.chosen_index)].fit(X, z);
    }
  }
  throw std::logic_error("unreachable classifier kind");
}

struct LossStats {
  double min = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double sd = 0.0;
  std::size_t count = 0;
};

LossStats loss_stats(std::vector<double> losses) {
  LossStats s;
  s.count = losses.size();
  if (losses.empty()) return s;
  std::sort(losses.begin(), losses.end());
  s.min = losses.front();
  const std::size_t m = losses.size() / 2;
  s.median = losses.size() % 2 == 1 ? losses[m] : 0.5 * (losses[m - 1] + losses[m]);
  if (losses.size() >= 2) {
    const double mean = std::accumulate(losses.begin(), losses.end(), 0.0) /
                        static_cast<double>(losses.size());
    double ss = 0.0;
    for (double v : losses) ss += (v - mean) * (v - mean);
    s.sd = std::sqrt(ss / static_cast<double>(losses.size() - 1));
  }
  return s;
}

std::vector<double> feasible_losses(const bench::EvaluationTable& table) {
  std::vector<double> losses;
  for (const auto& rec : table.records) {
    if (rec.z == 1) losses.push_back(*rec.loss);
  }
  return losses;
}

// One exploration cycle: refit models, run MED from the previous batch, and
// (in surrogate mode) validate the gated proposals with true evaluations.
void run_cycle(CampaignState& st, const bench::Problem& problem, int cycle) {
  const CampaignConfig& cfg = st.config;
  const int n = cfg.med.n;

  st.classifier = fit_campaign_classifier(cfg, st.table, cycle);

  // Throws when the table holds no feasible point: the campaign cannot rank
  // anything and aborts.
  const std::vector<double> imputed = med::impute_losses(st.table);

  med::MedConfig mc = cfg.med;
  mc.seed = rng::derive(cfg.seed, "med-cycle", static_cast<std::uint64_t>(cycle));
  const design::DesignMatrix seeds{st.last_batch};

  if (!cfg.use_surrogate) {
    Eigen::VectorXd seed_log_r(n);
    for (int i = 0; i < n; ++i) {
      seed_log_r(i) = -std::log(imputed[static_cast<std::size_t>(st.last_batch_rows[
          static_cast<std::size_t>(i)])]);
    }
    double running_max = st.table.max_feasible_loss();
    const med::LogResponseFunction f = [&](const Eigen::VectorXd& x) {
      auto rec = bench::evaluate(problem, x);
      rec.source = "med";
      rec.cycle = cycle;
      double loss = running_max;
      if (rec.z == 1) {
        loss = *rec.loss;
        running_max = std::max(running_max, loss);
      }
      st.table.records.push_back(std::move(rec));
      return -std::log(std::max(loss, med::kLossFloor));
    };
    const auto result = med::med_generate(seeds, f, mc, seed_log_r);
    st.energy_traces.push_back(result.energy_trace);
    st.last_batch = result.all_points.bottomRows(n);
    st.last_batch_rows.clear();
    for (std::size_t i = st.table.count() - static_cast<std::size_t>(n); i < st.table.count();
         ++i) {
      st.last_batch_rows.push_back(static_cast<int>(i));
    }
    return;
  }

  // Surrogate mode: MED explores the fitted loss surface; only proposals the
  // classifier accepts are spent on true evaluations.
  Eigen::Index n_feasible = 0;
  for (const auto& rec : st.table.records) n_feasible += rec.z;
  Eigen::MatrixXd X_feas(n_feasible, problem.p);
  Eigen::MatrixXd Y_feas(n_feasible, problem.q);
  Eigen::Index row = 0;
  for (const auto& rec : st.table.records) {
    if (rec.z != 1) continue;
    X_feas.row(row) = rec.x.transpose();
    Y_feas.row(row) = rec.y->transpose();
    ++row;
  }
  surrogate::SurrogateOptions so = cfg.surrogate;
  so.seed = rng::derive(cfg.seed, "surrogate", static_cast<std::uint64_t>(cycle));
  st.surrogate_model = surrogate::fit_loss_surrogate(
      X_feas, Y_feas, problem.targets, problem.weights, so, st.classifier, cfg.pi_star, 0.0);

  const med::LogResponseFunction f = [&](const Eigen::VectorXd& x) {
    return -std::log(std::max(surrogate::predict_loss(*st.surrogate_model, x), med::kLossFloor));
  };
  const auto result = med::med_generate(seeds, f, mc);
  st.energy_traces.push_back(result.energy_trace);

  const Eigen::MatrixXd generated =
      result.all_points.bottomRows(static_cast<Eigen::Index>(cfg.med.K) * n);
  const Eigen::MatrixXd kept = med::filter_feasible(generated, *st.classifier, cfg.pi_star);
  st.gate_rejections += generated.rows() - kept.rows();
  append_rows(st.table, problem, kept, "validation", cycle);

  st.last_batch = result.all_points.bottomRows(n);
  st.last_batch_rows.clear();  // seeds are re-scored by the next surrogate
}

}  // namespace

bench::Problem ProblemSpec::instantiate() const {
  if (name == "toy2d") return bench::toy2d(toy_w1, toy_w2);
  if (name == "dtlz2") return bench::dtlz2_mod(p);
  if (name == "external") return bench::external_problem(external);
  throw ConfigError("unknown problem '" + name + "'");
}

json ProblemSpec::to_json() const {
  if (name == "toy2d") return {{"name", name}, {"w1", toy_w1}, {"w2", toy_w2}};
  if (name == "dtlz2") return {{"name", name}, {"p", p}};
  if (name == "external") {
    return {{"name", name},
            {"command", external.command},
            {"p", external.p},
            {"q", external.q},
            {"targets", vector_to_json(external.targets)},
            {"weights", vector_to_json(external.weights)},
            {"timeout_seconds", external.timeout_seconds},
            {"write_header", external.write_header},
            {"batch_safe", external.batch_safe}};
  }
  throw ConfigError("unknown problem '" + name + "'");
}

ProblemSpec ProblemSpec::from_json(const json& j) {
  ProblemSpec spec;
  spec.name = require(j, "name", "problem").get<std::string>();
  if (spec.name == "toy2d") {
    check_keys(j, {"name", "w1", "w2"}, "problem");
    spec.toy_w1 = j.value("w1", 1.0);
    spec.toy_w2 = j.value("w2", 20.0);
  } else if (spec.name == "dtlz2") {
    check_keys(j, {"name", "p"}, "problem");
    spec.p = require(j, "p", "problem (dtlz2)").get<int>();
  } else if (spec.name == "external") {
    check_keys(j,
               {"name", "command", "p", "q", "targets", "weights", "timeout_seconds",
                "write_header", "batch_safe"},
               "problem");
    spec.external.command = require(j, "command", "problem (external)").get<std::string>();
    spec.external.p = require(j, "p", "problem (external)").get<int>();
    spec.external.q = require(j, "q", "problem (external)").get<int>();
    spec.external.targets = vector_from_json(require(j, "targets", "problem (external)"));
    spec.external.weights = vector_from_json(require(j, "weights", "problem (external)"));
    spec.external.timeout_seconds = j.value("timeout_seconds", 60.0);
    spec.external.write_header = j.value("write_header", true);
    spec.external.batch_safe = j.value("batch_safe", false);
  } else {
    throw ConfigError("unknown problem '" + spec.name + "'");
  }
  return spec;
}

std::string design_type_name(DesignType type) {
  switch (type) {
    case DesignType::random_lhd: return "lhd";
    case DesignType::maximin_lhd: return "maximin";
    case DesignType::omlhd: return "omlhd";
    case DesignType::uniform: return "uniform";
  }
  throw std::logic_error("unreachable design type");
}

DesignType design_type_from_name(const std::string& name) {
  if (name == "lhd") return DesignType::random_lhd;
  if (name == "maximin") return DesignType::maximin_lhd;
  if (name == "omlhd") return DesignType::omlhd;
  if (name == "uniform") return DesignType::uniform;
  throw ConfigError("unknown design type '" + name + "' (expected lhd|maximin|omlhd|uniform)");
}

std::string classifier_kind_name(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::none: return "none";
    case ClassifierKind::logistic: return "logistic";
    case ClassifierKind::forest: return "forest";
    case ClassifierKind::select_best: return "select";
  }
  throw std::logic_error("unreachable classifier kind");
}

ClassifierKind classifier_kind_from_name(const std::string& name) {
  if (name == "none") return ClassifierKind::none;
  if (name == "logistic") return ClassifierKind::logistic;
  if (name == "forest") return ClassifierKind::forest;
  if (name == "select") return ClassifierKind::select_best;
  throw ConfigError("unknown classifier '" + name + "' (expected none|logistic|forest|select)");
}

void CampaignConfig::validate() const {
  if (initial.size < 2) throw ConfigError("initial design size must be >= 2");
  if (initial.size != med.n) {
    throw ConfigError("initial design size must equal the MED batch size (got " +
                      std::to_string(initial.size) + " vs " + std::to_string(med.n) + ")");
  }
  if (cycles < 1) throw ConfigError("cycles must be >= 1");
  if (med.K < 1) throw ConfigError("MED iteration count must be >= 1");
  if (med.candidate_pool < 1) throw ConfigError("candidate pool must be >= 1");
  if (!(pi_star >= 0.0 && pi_star <= 1.0)) throw ConfigError("pi_star must lie in [0, 1]");
  if (use_surrogate && classifier == ClassifierKind::none) {
    throw ConfigError("surrogate mode requires a classifier for the feasibility gate");
  }
  (void)problem.instantiate();  // rejects unknown problem names early
}

json CampaignConfig::to_json() const {
  return {{"schema_version", kSchemaVersion},
          {"seed", seed},
          {"problem", problem.to_json()},
          {"initial_design",
           {{"type", design_type_name(initial.type)},
            {"size", initial.size},
            {"sweeps", initial.sweeps}}},
          {"med",
           {{"batch", med.n},
            {"iterations", med.K},
            {"candidate_pool", med.candidate_pool},
            {"jitter_scale", med.jitter_scale},
            {"jitter_decay", med.jitter_decay},
            {"local_fraction", med.local_fraction},
            {"clip_policy", med.clip_policy == med::ClipPolicy::clip ? "clip" : "reject"}}},
          {"classifier", classifier_kind_name(classifier)},
          {"surrogate",
           {{"enabled", use_surrogate},
            {"delta", surrogate.delta},
            {"epsilon", surrogate.epsilon},
            {"clusters", surrogate.num_clusters},
            {"inclusion_rule", surrogate.inclusion_rule},
            {"folds", surrogate.folds},
            {"sd_screen", surrogate.sd_screen}}},
          {"pi_star", pi_star},
          {"cycles", cycles}};
}

CampaignConfig CampaignConfig::from_json(const json& j) {
  check_keys(j,
             {"schema_version", "seed", "problem", "initial_design", "med", "classifier",
              "surrogate", "pi_star", "cycles"},
             "config");
  if (require(j, "schema_version", "config").get<int>() != kSchemaVersion) {
    throw ConfigError("unsupported config schema_version (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  CampaignConfig cfg;
  cfg.problem = ProblemSpec::from_json(require(j, "problem", "config"));
  cfg.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("initial_design")) {
    const auto& d = j.at("initial_design");
    check_keys(d, {"type", "size", "sweeps"}, "initial_design");
    if (d.contains("type")) cfg.initial.type = design_type_from_name(d.at("type"));
    cfg.initial.size = d.value("size", cfg.initial.size);
    cfg.initial.sweeps = d.value("sweeps", cfg.initial.sweeps);
  }
  if (j.contains("med")) {
    const auto& m = j.at("med");
    check_keys(m,
               {"batch", "iterations", "candidate_pool", "jitter_scale", "jitter_decay",
                "local_fraction", "clip_policy"},
               "med");
    cfg.med.n = m.value("batch", cfg.med.n);
    cfg.med.K = m.value("iterations", cfg.med.K);
    cfg.med.candidate_pool = m.value("candidate_pool", cfg.med.candidate_pool);
    cfg.med.jitter_scale = m.value("jitter_scale", cfg.med.jitter_scale);
    cfg.med.jitter_decay = m.value("jitter_decay", cfg.med.jitter_decay);
    cfg.med.local_fraction = m.value("local_fraction", cfg.med.local_fraction);
    if (m.contains("clip_policy")) {
      const std::string policy = m.at("clip_policy");
      if (policy == "clip") {
        cfg.med.clip_policy = med::ClipPolicy::clip;
      } else if (policy == "reject") {
        cfg.med.clip_policy = med::ClipPolicy::reject;
      } else {
        throw ConfigError("unknown clip_policy '" + policy + "' (expected clip|reject)");
      }
    }
  }
  if (j.contains("classifier")) {
    cfg.classifier = classifier_kind_from_name(j.at("classifier"));
  }
  if (j.contains("surrogate")) {
    const auto& s = j.at("surrogate");
    check_keys(s, {"enabled", "delta", "epsilon", "clusters", "inclusion_rule", "folds",
                   "sd_screen"},
               "surrogate");
    cfg.use_surrogate = s.value("enabled", false);
    cfg.surrogate.delta = s.value("delta", cfg.surrogate.delta);
    cfg.surrogate.epsilon = s.value("epsilon", cfg.surrogate.epsilon);
    cfg.surrogate.num_clusters = s.value("clusters", cfg.surrogate.num_clusters);
    cfg.surrogate.inclusion_rule = s.value("inclusion_rule", cfg.surrogate.inclusion_rule);
    cfg.surrogate.folds = s.value("folds", cfg.surrogate.folds);
    cfg.surrogate.sd_screen = s.value("sd_screen", cfg.surrogate.sd_screen);
  }
  cfg.pi_star = j.value("pi_star", cfg.pi_star);
  cfg.cycles = j.value("cycles", cfg.cycles);
  return cfg;
}

CycleMetrics compute_metrics(const bench::EvaluationTable& table, int cycle) {
  const auto stats = loss_stats(feasible_losses(table));
  CycleMetrics m;
  m.cycle = cycle;
  m.min_loss = stats.min;
  m.median_loss = stats.median;
  m.sd_loss = stats.sd;
  m.feasible_fraction = table.count() == 0
                            ? 0.0
                            : static_cast<double>(table.feasible_count()) /
                                  static_cast<double>(table.count());
  return m;
}

json CampaignState::to_json() const {
  json metrics_json = json::array();
  for (const auto& m : metrics) {
    metrics_json.push_back({{"cycle", m.cycle},
                            {"min_loss", m.min_loss},
                            {"median_loss", m.median_loss},
                            {"sd_loss", m.sd_loss},
                            {"feasible_fraction", m.feasible_fraction}});
  }
  json traces = json::array();
  for (const auto& trace : energy_traces) {
    json t = json::array();
    for (const auto& it : trace) {
      t.push_back({{"iteration", it.iteration},
                   {"best_loss", it.best_loss},
                   {"total_energy", it.total_energy}});
    }
    traces.push_back(std::move(t));
  }
  return {{"schema_version", kSchemaVersion},
          {"config", config.to_json()},
          {"completed_cycles", completed_cycles},
          {"gate_rejections", gate_rejections},
          {"metrics", metrics_json},
          {"energy_traces", traces},
          {"last_batch", matrix_to_json(last_batch)},
          {"last_batch_rows", last_batch_rows},
          {"classifier", classifier ? classifier->to_json() : json(nullptr)},
          {"surrogate", surrogate_model ? surrogate_model->to_json() : json(nullptr)}};
}

CampaignState CampaignState::from_json(const json& j, bench::EvaluationTable table) {
  if (require(j, "schema_version", "state").get<int>() != kSchemaVersion) {
    throw FormatError("unsupported state schema_version");
  }
  CampaignState st;
  st.config = CampaignConfig::from_json(require(j, "config", "state"));
  st.table = std::move(table);
  st.completed_cycles = require(j, "completed_cycles", "state").get<int>();
  st.gate_rejections = require(j, "gate_rejections", "state").get<long>();
  for (const auto& m : require(j, "metrics", "state")) {
    CycleMetrics cm;
    cm.cycle = m.at("cycle").get<int>();
    cm.min_loss = m.at("min_loss").get<double>();
    cm.median_loss = m.at("median_loss").get<double>();
    cm.sd_loss = m.at("sd_loss").get<double>();
    cm.feasible_fraction = m.at("feasible_fraction").get<double>();
    st.metrics.push_back(cm);
  }
  for (const auto& t : require(j, "energy_traces", "state")) {
    std::vector<med::IterationStats> trace;
    for (const auto& it : t) {
      med::IterationStats s;
      s.iteration = it.at("iteration").get<int>();
      s.best_loss = it.at("best_loss").get<double>();
      s.total_energy = it.at("total_energy").get<double>();
      trace.push_back(s);
    }
    st.energy_traces.push_back(std::move(trace));
  }
  st.last_batch = matrix_from_json(require(j, "last_batch", "state"));
  st.last_batch_rows = require(j, "last_batch_rows", "state").get<std::vector<int>>();
  if (!require(j, "classifier", "state").is_null()) {
    st.classifier = classify::model_from_json(j.at("classifier"));
  }
  if (!require(j, "surrogate", "state").is_null()) {
    st.surrogate_model = surrogate::LossSurrogate::from_json(j.at("surrogate"));
  }
  return st;
}

CampaignState run_exploration(const CampaignConfig& cfg, const CycleCallback& on_cycle) {
  cfg.validate();
  const bench::Problem problem = cfg.problem.instantiate();

  CampaignState st;
  st.config = cfg;
  const auto initial =
      make_initial(cfg.initial, problem.p, rng::derive(cfg.seed, "initial-design"));
  append_rows(st.table, problem, initial.points, "initial", 0);
  st.last_batch = initial.points;
  for (int i = 0; i < cfg.initial.size; ++i) st.last_batch_rows.push_back(i);

  return resume_exploration(std::move(st), on_cycle);
}

CampaignState resume_exploration(CampaignState state, const CycleCallback& on_cycle) {
  state.config.validate();
  const bench::Problem problem = state.config.problem.instantiate();
  if (state.last_batch.rows() != state.config.med.n) {
    throw std::invalid_argument("campaign state: seed batch does not match the MED batch size");
  }
  for (int cycle = state.completed_cycles + 1; cycle <= state.config.cycles; ++cycle) {
    run_cycle(state, problem, cycle);
    state.completed_cycles = cycle;
    state.metrics.push_back(compute_metrics(state.table, cycle));
    if (on_cycle) on_cycle(state);
  }
  return state;
}

json ComparisonStats::to_json() const {
  return {{"schema_version", kSchemaVersion},
          {"repetitions", reps.size()},
          {"min_win_rate", min_win_rate},
          {"median_win_rate", median_win_rate},
          {"sd_ratio_above_one_rate", sd_ratio_above_one_rate}};
}

std::string ComparisonStats::to_csv() const {
  std::string out =
      "rep,seed,proposed_min,proposed_median,proposed_sd,uniform_min,uniform_median,"
      "uniform_sd,delta_min,delta_median,sd_ratio,win_min,win_median\n";
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const auto& r = reps[i];
    out += std::to_string(i) + "," + std::to_string(r.seed) + "," +
           io::format_real(r.proposed_min) + "," + io::format_real(r.proposed_median) + "," +
           io::format_real(r.proposed_sd) + "," + io::format_real(r.uniform_min) + "," +
           io::format_real(r.uniform_median) + "," + io::format_real(r.uniform_sd) + "," +
           io::format_real(r.delta_min) + "," + io::format_real(r.delta_median) + "," +
           io::format_real(r.sd_ratio) + "," + std::to_string(r.win_min ? 1 : 0) + "," +
           std::to_string(r.win_median ? 1 : 0) + "\n";
  }
  return out;
}

ComparisonStats compare_designs(const ProblemSpec& problem_spec, const CompareConfig& cfg) {
  if (cfg.reps < 1) throw ConfigError("comparison needs at least one repetition");
  if (cfg.initial_size < 2) throw ConfigError("comparison initial size must be >= 2");
  const bench::Problem problem = problem_spec.instantiate();
  const int N = cfg.initial_size;

  ComparisonStats stats;
  stats.reps.resize(static_cast<std::size_t>(cfg.reps));
  util::parallel_for(
      cfg.reps,
      [&](int i) {
        const std::uint64_t seed = cfg.seed_base + static_cast<std::uint64_t>(i);
        RepResult rep;
        rep.seed = seed;

        // Proposed arm: N-point maximin LHD plus one MED batch of N points,
        // consuming true losses with imputation.
        bench::EvaluationTable table;
        const auto initial = design::maximin_lhd(N, problem.p, cfg.design_sweeps,
                                                 rng::derive(seed, "proposed-initial"));
        append_rows(table, problem, initial.points, "initial", 0);
        const auto imputed = med::impute_losses(table);
        Eigen::VectorXd seed_log_r(N);
        for (int k = 0; k < N; ++k) {
          seed_log_r(k) = -std::log(imputed[static_cast<std::size_t>(k)]);
        }
        double running_max = table.max_feasible_loss();
        const med::LogResponseFunction f = [&](const Eigen::VectorXd& x) {
          auto rec = bench::evaluate(problem, x);
          rec.source = "med";
          rec.cycle = 1;
          double loss = running_max;
          if (rec.z == 1) {
            loss = *rec.loss;
            running_max = std::max(running_max, loss);
          }
          table.records.push_back(std::move(rec));
          return -std::log(std::max(loss, med::kLossFloor));
        };
        med::MedConfig mc = cfg.med;
        mc.n = N;
        mc.K = 1;
        mc.seed = rng::derive(seed, "proposed-med");
        med::med_generate(initial, f, mc, seed_log_r);
        const auto proposed = loss_stats(feasible_losses(table));

        // Uniform arm: 2N i.i.d. points, feasible losses only.
        bench::EvaluationTable uniform_table;
        const auto uniform =
            design::uniform_design(2 * N, problem.p, rng::derive(seed, "uniform-arm"));
        append_rows(uniform_table, problem, uniform.points, "initial", 0);
        const auto uni = loss_stats(feasible_losses(uniform_table));

        rep.proposed_min = proposed.min;
        rep.proposed_median = proposed.median;
        rep.proposed_sd = proposed.sd;
        rep.uniform_min = uni.min;
        rep.uniform_median = uni.median;
        rep.uniform_sd = uni.sd;
        rep.delta_min = uni.min - proposed.min;
        rep.delta_median = uni.median - proposed.median;
        rep.sd_ratio = proposed.sd > 0.0 ? uni.sd / proposed.sd
                                         : std::numeric_limits<double>::quiet_NaN();
        rep.win_min = proposed.min < uni.min;
        rep.win_median = proposed.median < uni.median;
        stats.reps[static_cast<std::size_t>(i)] = rep;
      },
      cfg.threads);

  double min_wins = 0.0, median_wins = 0.0, sd_above = 0.0;
  for (const auto& r : stats.reps) {
    min_wins += r.win_min ? 1.0 : 0.0;
    median_wins += r.win_median ? 1.0 : 0.0;
    sd_above += r.sd_ratio > 1.0 ? 1.0 : 0.0;
  }
  const double denom = static_cast<double>(stats.reps.size());
  stats.min_win_rate = min_wins / denom;
  stats.median_win_rate = median_wins / denom;
  stats.sd_ratio_above_one_rate = sd_above / denom;
  return stats;
}

BestRegion best_region_points(const bench::EvaluationTable& table, double loss_cutoff) {
  if (!(loss_cutoff > 0.0)) throw std::invalid_argument("loss cutoff must be positive");
  std::vector<const bench::EvaluationRecord*> hits;
  for (const auto& rec : table.records) {
    if (rec.z == 1 && *rec.loss < loss_cutoff) hits.push_back(&rec);
  }
  BestRegion region;
  region.count = static_cast<long>(hits.size());
  if (!hits.empty()) {
    region.points.resize(static_cast<Eigen::Index>(hits.size()), hits.front()->x.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
      region.points.row(static_cast<Eigen::Index>(i)) = hits[i]->x.transpose();
    }
  }
  if (hits.size() >= 2) {
    region.min_pairwise_distance = design::min_pairwise_distance(region.points);
  }
  return region;
}

std::vector<TimingRow> timing_profile(const std::vector<int>& p_list,
                                      const std::vector<int>& n_list, std::uint64_t seed) {
  std::vector<TimingRow> rows;
  for (int p : p_list) {
    if (p < 4) throw ConfigError("timing profile requires p >= 4 (dtlz2 domain)");
    const bench::Problem problem = bench::dtlz2_mod(p);
    for (int n : n_list) {
      if (n < 2) throw ConfigError("timing profile requires n >= 2");
      const std::uint64_t run_seed =
          rng::derive(seed, "timing", static_cast<std::uint64_t>(p),
                      static_cast<std::uint64_t>(n));
      bench::EvaluationTable table;
      const auto initial = design::maximin_lhd(n, p, 20, rng::derive(run_seed, "initial"));
      append_rows(table, problem, initial.points, "initial", 0);
      const auto imputed = med::impute_losses(table);
      Eigen::VectorXd seed_log_r(n);
      for (int k = 0; k < n; ++k) seed_log_r(k) = -std::log(imputed[static_cast<std::size_t>(k)]);
      double running_max = table.max_feasible_loss();
      const med::LogResponseFunction f = [&](const Eigen::VectorXd& x) {
        const auto rec = bench::evaluate(problem, x);
        double loss = running_max;
        if (rec.z == 1) {
          loss = *rec.loss;
          running_max = std::max(running_max, loss);
        }
        return -std::log(std::max(loss, med::kLossFloor));
      };
      med::MedConfig mc;
      mc.n = n;
      mc.K = 1;
      mc.seed = rng::derive(run_seed, "med");

      const auto start = std::chrono::steady_clock::now();
      med::med_generate(initial, f, mc, seed_log_r);
      const auto stop = std::chrono::steady_clock::now();
      rows.push_back({p, n, std::chrono::duration<double>(stop - start).count()});
    }
  }
  return rows;
}

std::string timing_to_csv(const std::vector<TimingRow>& rows) {
  std::string out = "p,n,seconds\n";
  for (const auto& r : rows) {
    out += std::to_string(r.p) + "," + std::to_string(r.n) + "," + io::format_real(r.seconds) +
           "\n";
  }
  return out;
}

std::string table_to_csv(const bench::EvaluationTable& table, int p, int q) {
  std::string out = "cycle,source";
  for (int j = 1; j <= p; ++j) out += ",x" + std::to_string(j);
  out += ",z";
  for (int j = 1; j <= q; ++j) out += ",y" + std::to_string(j);
  out += ",loss\n";
  for (const auto& rec : table.records) {
    if (rec.x.size() != p) throw std::invalid_argument("record dimension mismatch in table");
    out += std::to_string(rec.cycle) + "," + rec.source;
    for (int j = 0; j < p; ++j) out += "," + io::format_real(rec.x(j));
    out += "," + std::to_string(rec.z);
    for (int j = 0; j < q; ++j) {
      out += ",";
      if (rec.y) out += io::format_real((*rec.y)(j));
    }
    out += ",";
    if (rec.loss) out += io::format_real(*rec.loss);
    out += "\n";
  }
  return out;
}

bench::EvaluationTable table_from_csv(const std::string& text, int p, int q) {
  const auto rows = io::parse_csv(text);
  if (rows.empty()) throw FormatError("evaluation table: empty document");
  const std::size_t expected = 2 + static_cast<std::size_t>(p) + 1 + static_cast<std::size_t>(q) + 1;
  if (rows.front().size() != expected || rows.front()[0] != "cycle") {
    throw FormatError("evaluation table: unexpected header");
  }
  const auto to_double = [](const std::string& cell, std::size_t row) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size() || cell.empty()) {
      throw FormatError("evaluation table: bad number in row " + std::to_string(row));
    }
    return v;
  };

  bench::EvaluationTable table;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != expected) {
      throw FormatError("evaluation table: row " + std::to_string(r + 1) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(expected));
    }
    bench::EvaluationRecord rec;
    rec.cycle = static_cast<int>(to_double(cells[0], r + 1));
    rec.source = cells[1];
    rec.x.resize(p);
    for (int j = 0; j < p; ++j) rec.x(j) = to_double(cells[2 + static_cast<std::size_t>(j)], r + 1);
    const double z = to_double(cells[2 + static_cast<std::size_t>(p)], r + 1);
    if (z != 0.0 && z != 1.0) {
      throw FormatError("evaluation table: z must be 0 or 1 in row " + std::to_string(r + 1));
    }
    rec.z = static_cast<int>(z);
    const std::size_t y_start = 3 + static_cast<std::size_t>(p);
    const std::string& loss_cell = cells[y_start + static_cast<std::size_t>(q)];
    if (rec.z == 1) {
      Eigen::VectorXd y(q);
      for (int j = 0; j < q; ++j) {
        y(j) = to_double(cells[y_start + static_cast<std::size_t>(j)], r + 1);
      }
      rec.y = std::move(y);
      rec.loss = to_double(loss_cell, r + 1);
    } else {
      for (int j = 0; j < q; ++j) {
        if (!cells[y_start + static_cast<std::size_t>(j)].empty()) {
          throw FormatError("evaluation table: infeasible row " + std::to_string(r + 1) +
                            " carries responses");
        }
      }
      if (!loss_cell.empty()) {
        throw FormatError("evaluation table: infeasible row " + std::to_string(r + 1) +
                          " carries a loss");
      }
    }
    table.records.push_back(std::move(rec));
  }
  return table;
}

}  // namespace medex::campaign
