#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "medex/campaign.hpp"
#include "medex/cli.hpp"
#include "medex/design.hpp"
#include "medex/errors.hpp"
#include "medex/io.hpp"
#include "medex/parallel.hpp"
#include "medex/rng.hpp"

namespace medex::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string config_hash(const json& config) {
  // nlohmann objects iterate in key order, so dump() is canonical.
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(rng::hash_tag(config.dump())));
  return buf;
}

fs::path resolve_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("MEDEX_OUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return ".";
}

// Collects output files for the manifest; every write is atomic.
struct OutputDir {
  fs::path dir;
  std::vector<std::string> written;

  explicit OutputDir(const fs::path& d) : dir(d) { fs::create_directories(dir); }

  void write(const std::string& name, std::string_view content) {
    io::atomic_write(dir / name, content);
    if (std::find(written.begin(), written.end(), name) == written.end()) {
      written.push_back(name);
    }
  }
};

void write_manifest(OutputDir& out, const std::string& command, const json& config,
                    std::uint64_t seed, const std::string& started) {
  RunManifest m;
  m.command = command;
  m.config_hash = config_hash(config);
  m.seed = seed;
  m.started = started;
  m.finished = utc_now();
  m.outputs = out.written;
  out.write(command + "_manifest.json", m.to_json().dump(2) + "\n");
}

json load_config_file(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
}

const json& require_key(const json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing key '" + std::string(key) + "' in " + where);
  return *it;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return key == k; }) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

struct DesignArgs {
  std::string type = "maximin";
  int n = 0;
  int p = 0;
  int sweeps = 50;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_design(const DesignArgs& a) {
  const std::string started = utc_now();
  const campaign::DesignType type = campaign::design_type_from_name(a.type);
  campaign::InitialDesign spec;
  spec.type = type;
  spec.size = a.n;
  spec.sweeps = a.sweeps;

  design::DesignMatrix dm;
  switch (type) {
    case campaign::DesignType::random_lhd:
      dm = design::random_lhd(a.n, a.p, a.seed);
      break;
    case campaign::DesignType::maximin_lhd:
      dm = design::maximin_lhd(a.n, a.p, a.sweeps, a.seed);
      break;
    case campaign::DesignType::omlhd:
      dm = design::omlhd(a.n, a.p, {}, a.sweeps, a.seed);
      break;
    case campaign::DesignType::uniform:
      dm = design::uniform_design(a.n, a.p, a.seed);
      break;
  }

  OutputDir out(resolve_out_dir(a.out));
  out.write("design.csv", io::matrix_to_csv(dm.points));
  const json config = {{"type", a.type}, {"n", a.n}, {"p", a.p}, {"sweeps", a.sweeps},
                       {"seed", a.seed}};
  write_manifest(out, "design", config, a.seed, started);
  return 0;
}

std::string metrics_csv(const std::vector<campaign::CycleMetrics>& metrics) {
  std::string out = "cycle,min_loss,median_loss,sd_loss,feasible_fraction\n";
  for (const auto& m : metrics) {
    out += std::to_string(m.cycle) + "," + io::format_real(m.min_loss) + "," +
           io::format_real(m.median_loss) + "," + io::format_real(m.sd_loss) + "," +
           io::format_real(m.feasible_fraction) + "\n";
  }
  return out;
}

std::string energy_csv(const std::vector<std::vector<med::IterationStats>>& traces) {
  std::string out = "cycle,iteration,best_loss,total_energy\n";
  for (std::size_t c = 0; c < traces.size(); ++c) {
    for (const auto& it : traces[c]) {
      out += std::to_string(c + 1) + "," + std::to_string(it.iteration) + "," +
             io::format_real(it.best_loss) + "," + io::format_real(it.total_energy) + "\n";
    }
  }
  return out;
}

json explore_report(const campaign::CampaignState& st) {
  json report = {{"schema_version", 1},
                 {"problem", st.config.problem.name},
                 {"cycles", st.completed_cycles},
                 {"evaluations", st.table.count()},
                 {"feasible", st.table.feasible_count()},
                 {"gate_rejections", st.gate_rejections},
                 {"classifier",
                  st.classifier ? json(st.classifier->kind()) : json(nullptr)}};
  const bench::EvaluationRecord* best = nullptr;
  for (const auto& rec : st.table.records) {
    if (rec.z == 1 && (best == nullptr || *rec.loss < *best->loss)) best = &rec;
  }
  if (best != nullptr) {
    report["min_loss"] = *best->loss;
    json x = json::array();
    for (Eigen::Index i = 0; i < best->x.size(); ++i) x.push_back(best->x(i));
    report["best_point"] = std::move(x);
  } else {
    report["min_loss"] = nullptr;
    report["best_point"] = nullptr;
  }
  if (!st.metrics.empty()) {
    const auto& last = st.metrics.back();
    report["median_loss"] = last.median_loss;
    report["sd_loss"] = last.sd_loss;
    report["feasible_fraction"] = last.feasible_fraction;
  }
  return report;
}

void write_checkpoint(OutputDir& out, const campaign::CampaignState& st, int p, int q) {
  out.write("evaluations.csv", campaign::table_to_csv(st.table, p, q));
  const json checkpoint = {{"schema_version", 1},
                           {"table_file", "evaluations.csv"},
                           {"state", st.to_json()}};
  out.write("checkpoint.json", checkpoint.dump(2) + "\n");
}

struct ExploreArgs {
  std::string config_path;
  std::string resume_path;
  std::string out;
};

int cmd_explore(const ExploreArgs& a) {
  const std::string started = utc_now();

  std::optional<campaign::CampaignState> resume_state;
  campaign::CampaignConfig cfg;
  if (!a.resume_path.empty()) {
    const json checkpoint = load_config_file(a.resume_path);
    check_keys(checkpoint, {"schema_version", "table_file", "state"}, "checkpoint");
    const std::string table_file = require_key(checkpoint, "table_file", "checkpoint");
    const fs::path table_path = fs::path(a.resume_path).parent_path() / table_file;
    const auto& state_json = require_key(checkpoint, "state", "checkpoint");
    cfg = campaign::CampaignConfig::from_json(require_key(state_json, "config", "checkpoint"));
    const auto problem = cfg.problem.instantiate();
    try {
      resume_state = campaign::CampaignState::from_json(
          state_json, campaign::table_from_csv(io::read_file(table_path), problem.p, problem.q));
    } catch (const FormatError& e) {
      throw ConfigError(std::string("bad checkpoint: ") + e.what());
    }
  } else {
    cfg = campaign::CampaignConfig::from_json(load_config_file(a.config_path));
  }
  cfg.validate();
  const auto problem = cfg.problem.instantiate();
  const int p = problem.p;
  const int q = problem.q;

  OutputDir out(resolve_out_dir(a.out));
  // Checkpoint after every cycle so an interrupted run can continue.
  const campaign::CycleCallback checkpoint = [&](const campaign::CampaignState& st) {
    write_checkpoint(out, st, p, q);
  };
  const campaign::CampaignState state =
      resume_state.has_value() ? campaign::resume_exploration(std::move(*resume_state), checkpoint)
                               : campaign::run_exploration(cfg, checkpoint);

  write_checkpoint(out, state, p, q);
  out.write("metrics.csv", metrics_csv(state.metrics));
  out.write("energy.csv", energy_csv(state.energy_traces));
  out.write("report.json", explore_report(state).dump(2) + "\n");
  write_manifest(out, "explore", cfg.to_json(), cfg.seed, started);
  return 0;
}

struct CompareArgs {
  std::string config_path;
  std::string out;
  int threads = 0;
};

int cmd_compare(const CompareArgs& a) {
  const std::string started = utc_now();
  const json doc = load_config_file(a.config_path);
  check_keys(doc,
             {"schema_version", "problem", "initial_size", "design_sweeps", "reps", "seed_base",
              "med"},
             "config");
  if (require_key(doc, "schema_version", "config").get<int>() != 1) {
    throw ConfigError("unsupported config schema_version (expected 1)");
  }
  const auto problem = campaign::ProblemSpec::from_json(require_key(doc, "problem", "config"));

  campaign::CompareConfig cc;
  cc.initial_size = doc.value("initial_size", cc.initial_size);
  cc.design_sweeps = doc.value("design_sweeps", cc.design_sweeps);
  cc.reps = doc.value("reps", cc.reps);
  cc.seed_base = doc.value("seed_base", cc.seed_base);
  if (doc.contains("med")) {
    const auto& m = doc.at("med");
    check_keys(m, {"candidate_pool", "jitter_scale", "jitter_decay", "local_fraction"}, "med");
    cc.med.candidate_pool = m.value("candidate_pool", cc.med.candidate_pool);
    cc.med.jitter_scale = m.value("jitter_scale", cc.med.jitter_scale);
    cc.med.jitter_decay = m.value("jitter_decay", cc.med.jitter_decay);
    cc.med.local_fraction = m.value("local_fraction", cc.med.local_fraction);
  }
  cc.threads = a.threads;

  const auto stats = campaign::compare_designs(problem, cc);

  OutputDir out(resolve_out_dir(a.out));
  out.write("comparison.csv", stats.to_csv());
  json summary = stats.to_json();
  summary["problem"] = problem.to_json();
  out.write("summary.json", summary.dump(2) + "\n");
  // The comparison outputs must not depend on the worker count, so the
  // hashed config omits it.
  json config = doc;
  write_manifest(out, "compare", config, cc.seed_base, started);
  return 0;
}

struct BenchArgs {
  std::vector<int> p_list;
  std::vector<int> n_list;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_bench(const BenchArgs& a) {
  const std::string started = utc_now();
  const auto rows = campaign::timing_profile(a.p_list, a.n_list, a.seed);
  OutputDir out(resolve_out_dir(a.out));
  out.write("timing.csv", campaign::timing_to_csv(rows));
  const json config = {{"p", a.p_list}, {"n", a.n_list}, {"seed", a.seed}};
  write_manifest(out, "bench", config, a.seed, started);
  return 0;
}

}  // namespace

json RunManifest::to_json() const {
  return {{"schema_version", 1},
          {"tool", "medex"},
          {"tool_version", tool_version},
          {"command", command},
          {"config_hash", config_hash},
          {"seed", seed},
          {"started", started},
          {"finished", finished},
          {"outputs", outputs}};
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Sequential exploration of expensive constrained systems"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads,
                 "Worker thread cap (0 = hardware); never changes results");
  // Let the option appear after the subcommand as well.
  app.fallthrough();

  DesignArgs da;
  auto* cmd_d = app.add_subcommand("design", "Generate a space-filling design CSV");
  cmd_d->add_option("--type", da.type, "lhd|maximin|omlhd|uniform")->capture_default_str();
  cmd_d->add_option("--n", da.n, "Number of points")->required();
  cmd_d->add_option("--p", da.p, "Input dimension")->required();
  cmd_d->add_option("--sweeps", da.sweeps, "Optimization sweeps")->capture_default_str();
  cmd_d->add_option("--seed", da.seed, "Random seed")->capture_default_str();
  cmd_d->add_option("--out", da.out, "Output directory (default: MEDEX_OUT_DIR or .)");

  ExploreArgs ea;
  auto* cmd_e = app.add_subcommand("explore", "Run an exploration campaign from a config file");
  cmd_e->add_option("config", ea.config_path, "Campaign config JSON");
  cmd_e->add_option("--resume", ea.resume_path, "Continue from a checkpoint.json");
  cmd_e->add_option("--out", ea.out, "Output directory (default: MEDEX_OUT_DIR or .)");

  CompareArgs ca;
  auto* cmd_c = app.add_subcommand("compare", "Compare the proposed design against uniform sampling");
  cmd_c->add_option("config", ca.config_path, "Comparison config JSON")->required();
  cmd_c->add_option("--out", ca.out, "Output directory (default: MEDEX_OUT_DIR or .)");

  BenchArgs ba;
  auto* cmd_b = app.add_subcommand("bench", "Time design generation across problem sizes");
  cmd_b->add_option("--p", ba.p_list, "Input dimensions, comma separated")
      ->required()
      ->delimiter(',');
  cmd_b->add_option("--n", ba.n_list, "Batch sizes, comma separated")->required()->delimiter(',');
  cmd_b->add_option("--seed", ba.seed, "Random seed")->capture_default_str();
  cmd_b->add_option("--out", ba.out, "Output directory (default: MEDEX_OUT_DIR or .)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  util::set_max_threads(threads);
  try {
    if (cmd_d->parsed()) return cmd_design(da);
    if (cmd_e->parsed()) {
      if (ea.config_path.empty() && ea.resume_path.empty()) {
        throw ConfigError("explore needs a config file or --resume checkpoint");
      }
      return cmd_explore(ea);
    }
    if (cmd_c->parsed()) {
      ca.threads = threads;
      return cmd_compare(ca);
    }
    if (cmd_b->parsed()) return cmd_bench(ba);
  } catch (const ConfigError& e) {
    std::cerr << "medex: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "medex: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "medex: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace medex::cli
