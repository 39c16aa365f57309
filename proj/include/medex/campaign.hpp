#ifndef MEDEX_CAMPAIGN_HPP
#define MEDEX_CAMPAIGN_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "medex/bench.hpp"
#include "medex/classify.hpp"
#include "medex/med.hpp"
#include "medex/surrogate.hpp"

namespace medex::campaign {

// A problem reference that round-trips through configs and checkpoints, so a
// resumed run can rebuild the exact evaluator it started with.
struct ProblemSpec {
  std::string name = "toy2d";  // toy2d | dtlz2 | external
  int p = 4;                   // dtlz2 input dimension
  double toy_w1 = 1.0;
  double toy_w2 = 20.0;
  bench::ExternalEvaluatorSpec external;

  bench::Problem instantiate() const;
  nlohmann::json to_json() const;
  static ProblemSpec from_json(const nlohmann::json& j);
};

enum class DesignType { random_lhd, maximin_lhd, omlhd, uniform };

std::string design_type_name(DesignType type);
DesignType design_type_from_name(const std::string& name);

struct InitialDesign {
  DesignType type = DesignType::maximin_lhd;
  int size = 20;   // must equal the MED batch size
  int sweeps = 50; // optimizer budget for the lhd variants
};

enum class ClassifierKind { none, logistic, forest, select_best };

std::string classifier_kind_name(ClassifierKind kind);
ClassifierKind classifier_kind_from_name(const std::string& name);

struct CampaignConfig {
  ProblemSpec problem;
  InitialDesign initial;
  med::MedConfig med;  // med.seed is ignored; cycle streams derive from `seed`
  ClassifierKind classifier = ClassifierKind::logistic;
  bool use_surrogate = false;  // off: MED consumes true (imputed) losses
  surrogate::SurrogateOptions surrogate;
  double pi_star = 0.5;
  int cycles = 1;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError on bad combinations
  nlohmann::json to_json() const;
  static CampaignConfig from_json(const nlohmann::json& j);
};

struct CycleMetrics {
  int cycle = 0;
  double min_loss = 0.0;
  double median_loss = 0.0;
  double sd_loss = 0.0;          // 0 with fewer than two feasible points
  double feasible_fraction = 0.0;
};

// Statistics over the feasible records of a table.
CycleMetrics compute_metrics(const bench::EvaluationTable& table, int cycle);

struct CampaignState {
  CampaignConfig config;
  bench::EvaluationTable table;
  std::shared_ptr<classify::FeasibilityModel> classifier;
  std::optional<surrogate::LossSurrogate> surrogate_model;
  std::vector<CycleMetrics> metrics;
  std::vector<std::vector<med::IterationStats>> energy_traces;  // one per cycle
  int completed_cycles = 0;
  Eigen::MatrixXd last_batch;        // seed batch for the next cycle
  std::vector<int> last_batch_rows;  // its record indices; empty in surrogate mode
  long gate_rejections = 0;          // surrogate proposals failing the gate

  // The JSON document carries everything except the evaluation records,
  // which live in their own CSV (see table_to_csv).
  nlohmann::json to_json() const;
  static CampaignState from_json(const nlohmann::json& j, bench::EvaluationTable table);
};

using CycleCallback = std::function<void(const CampaignState&)>;

// The exploration loop: initial design -> evaluate -> per cycle (classifier
// fit, optional surrogate fit, MED, gate, validation) -> metrics. on_cycle
// fires after every completed cycle, checkpoint-ready state in hand.
CampaignState run_exploration(const CampaignConfig& cfg, const CycleCallback& on_cycle = {});

// Continues a checkpointed state up to config.cycles. A resumed run replays
// the same per-cycle streams, so outputs match an uninterrupted run exactly.
CampaignState resume_exploration(CampaignState state, const CycleCallback& on_cycle = {});

struct CompareConfig {
  int initial_size = 100;  // proposed arm: N maximin + N MED; uniform arm: 2N
  int design_sweeps = 50;
  med::MedConfig med;      // n is forced to initial_size and K to 1
  int reps = 50;
  std::uint64_t seed_base = 0;
  int threads = 0;         // 0: hardware default
};

struct RepResult {
  std::uint64_t seed = 0;
  double proposed_min = 0.0, proposed_median = 0.0, proposed_sd = 0.0;
  double uniform_min = 0.0, uniform_median = 0.0, uniform_sd = 0.0;
  double delta_min = 0.0;     // uniform - proposed; positive favors the proposal
  double delta_median = 0.0;
  double sd_ratio = 0.0;      // sd(uniform) / sd(proposed)
  bool win_min = false;
  bool win_median = false;
};

struct ComparisonStats {
  std::vector<RepResult> reps;
  double min_win_rate = 0.0;
  double median_win_rate = 0.0;
  double sd_ratio_above_one_rate = 0.0;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

// Paired-seed comparison: repetition i runs both arms from seed_base + i.
// Losses are collected over feasible points only on both arms.
ComparisonStats compare_designs(const ProblemSpec& problem, const CompareConfig& cfg);

struct BestRegion {
  long count = 0;
  std::optional<double> min_pairwise_distance;  // absent with fewer than 2 points
  Eigen::MatrixXd points;
};

// Feasible records with loss below the cutoff, plus their spread.
BestRegion best_region_points(const bench::EvaluationTable& table, double loss_cutoff);

struct TimingRow {
  int p = 0;
  int n = 0;
  double seconds = 0.0;
};

// Wall-clock MED generation time on dtlz2_mod(p) for every (p, n) pair.
std::vector<TimingRow> timing_profile(const std::vector<int>& p_list,
                                      const std::vector<int>& n_list, std::uint64_t seed);

std::string timing_to_csv(const std::vector<TimingRow>& rows);

// Evaluation records as CSV: cycle,source,x1..xp,z,y1..yq,loss with empty
// response/loss cells on infeasible rows. Round-trips bit for bit.
std::string table_to_csv(const bench::EvaluationTable& table, int p, int q);
bench::EvaluationTable table_from_csv(const std::string& text, int p, int q);

}  // namespace medex::campaign

#endif
