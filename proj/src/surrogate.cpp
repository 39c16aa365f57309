#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "medex/errors.hpp"
#include "medex/rng.hpp"
#include "medex/surrogate.hpp"

namespace medex::surrogate {

namespace {

constexpr double kConstantSd = 1e-12;
constexpr int kSchemaVersion = 1;

void check_targets_weights(Eigen::Index q, const Eigen::VectorXd& targets,
                           const Eigen::VectorXd& weights) {
  if (targets.size() != q || weights.size() != q) {
    throw std::invalid_argument("responses, targets, and weights must have matching size");
  }
  for (Eigen::Index j = 0; j < q; ++j) {
    if (!(weights(j) > 0.0)) throw std::invalid_argument("weights must be positive");
  }
}

double column_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double denom = da.norm() * db.norm();
  if (denom <= 0.0) return 0.0;
  return da.dot(db) / denom;
}

// Mean silhouette width for a labeling, on a precomputed distance matrix.
double silhouette(const Eigen::MatrixXd& D, const std::vector<int>& labels, int num_clusters) {
  const int n = static_cast<int>(labels.size());
  std::vector<int> sizes(static_cast<std::size_t>(num_clusters), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int own = labels[static_cast<std::size_t>(i)];
    if (sizes[static_cast<std::size_t>(own)] < 2) continue;  // singleton: s(i) = 0
    std::vector<double> sums(static_cast<std::size_t>(num_clusters), 0.0);
    for (int k = 0; k < n; ++k) {
      if (k != i) sums[static_cast<std::size_t>(labels[static_cast<std::size_t>(k)])] += D(i, k);
    }
    const double a = sums[static_cast<std::size_t>(own)] /
                     static_cast<double>(sizes[static_cast<std::size_t>(own)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < num_clusters; ++c) {
      if (c == own || sizes[static_cast<std::size_t>(c)] == 0) continue;
      b = std::min(b, sums[static_cast<std::size_t>(c)] /
                          static_cast<double>(sizes[static_cast<std::size_t>(c)]));
    }
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

// Average-linkage merges on D, recording the label vector at every cluster
// count from n down to 1. Equal-distance ties take the lexicographically
// smallest slot pair, so the tree is deterministic.
std::vector<std::vector<int>> linkage_levels(Eigen::MatrixXd D) {
  const int n = static_cast<int>(D.rows());
  std::vector<int> member_cluster(static_cast<std::size_t>(n));
  std::iota(member_cluster.begin(), member_cluster.end(), 0);
  std::vector<int> sizes(static_cast<std::size_t>(n), 1);
  std::vector<char> alive(static_cast<std::size_t>(n), 1);

  std::vector<std::vector<int>> levels(static_cast<std::size_t>(n + 1));
  levels[static_cast<std::size_t>(n)] = member_cluster;

  for (int count = n; count > 1; --count) {
    int best_a = -1, best_b = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a) {
      if (!alive[static_cast<std::size_t>(a)]) continue;
      for (int b = a + 1; b < n; ++b) {
        if (!alive[static_cast<std::size_t>(b)]) continue;
        if (D(a, b) < best_d) {
          best_d = D(a, b);
          best_a = a;
          best_b = b;
        }
      }
    }
    const double wa = sizes[static_cast<std::size_t>(best_a)];
    const double wb = sizes[static_cast<std::size_t>(best_b)];
    for (int k = 0; k < n; ++k) {
      if (!alive[static_cast<std::size_t>(k)] || k == best_a || k == best_b) continue;
      const double merged = (wa * D(best_a, k) + wb * D(best_b, k)) / (wa + wb);
      D(best_a, k) = merged;
      D(k, best_a) = merged;
    }
    sizes[static_cast<std::size_t>(best_a)] += sizes[static_cast<std::size_t>(best_b)];
    alive[static_cast<std::size_t>(best_b)] = 0;
    for (auto& c : member_cluster) {
      if (c == best_b) c = best_a;
    }
    levels[static_cast<std::size_t>(count - 1)] = member_cluster;
  }
  return levels;
}

// Renumber arbitrary cluster ids to 0..C-1 in order of first appearance.
std::vector<int> renumber(const std::vector<int>& raw, int* num_out) {
  std::vector<int> labels(raw.size(), -1);
  std::vector<int> seen;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto it = std::find(seen.begin(), seen.end(), raw[i]);
    if (it == seen.end()) {
      labels[i] = static_cast<int>(seen.size());
      seen.push_back(raw[i]);
    } else {
      labels[i] = static_cast<int>(it - seen.begin());
    }
  }
  if (num_out) *num_out = static_cast<int>(seen.size());
  return labels;
}

double r_squared(const Eigen::VectorXd& truth, const Eigen::VectorXd& predicted) {
  const double sse = (truth - predicted).squaredNorm();
  const double sst = (truth.array() - truth.mean()).matrix().squaredNorm();
  return 1.0 - sse / std::max(sst, 1e-12);
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& M, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), M.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = M.row(rows[i]);
  return out;
}

Eigen::MatrixXd append_columns(const Eigen::MatrixXd& base, const Eigen::MatrixXd& U,
                               const std::vector<int>& cols) {
  Eigen::MatrixXd out(base.rows(), base.cols() + static_cast<Eigen::Index>(cols.size()));
  out.leftCols(base.cols()) = base;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    out.col(base.cols() + static_cast<Eigen::Index>(k)) = U.col(cols[k]);
  }
  return out;
}

nlohmann::json chain_to_json(const ChainModel& c) {
  return {{"response", c.response},
          {"constant", c.constant},
          {"constant_value", c.constant_value},
          {"predecessors", c.predecessors},
          {"fit_score", c.fit_score},
          {"model", c.constant ? nlohmann::json(nullptr) : c.model.to_json()}};
}

ChainModel chain_from_json(const nlohmann::json& j) {
  ChainModel c;
  c.response = j.at("response").get<int>();
  c.constant = j.at("constant").get<bool>();
  c.constant_value = j.at("constant_value").get<double>();
  c.predecessors = j.at("predecessors").get<std::vector<int>>();
  c.fit_score = j.at("fit_score").get<double>();
  if (!c.constant) c.model = LassoModel::from_json(j.at("model"));
  return c;
}

}  // namespace

SieMatrix sie_matrix(const Eigen::MatrixXd& Y, const Eigen::VectorXd& targets,
                     const Eigen::VectorXd& weights) {
  if (Y.rows() < 2) throw std::invalid_argument("scaled errors need at least two rows");
  check_targets_weights(Y.cols(), targets, weights);
  SieMatrix sie;
  sie.E.resize(Y.rows(), Y.cols());
  for (Eigen::Index j = 0; j < Y.cols(); ++j) {
    sie.E.col(j) = (Y.col(j).array() - targets(j)) / weights(j);
  }
  sie.mean = sie.E.colwise().mean();
  sie.sd = Eigen::VectorXd(Y.cols());
  for (Eigen::Index j = 0; j < Y.cols(); ++j) {
    sie.sd(j) = std::sqrt((sie.E.col(j).array() - sie.mean(j)).matrix().squaredNorm() /
                          static_cast<double>(Y.rows() - 1));
  }
  return sie;
}

ResponseSubset select_responses(const SieMatrix& sie, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must be in (0, 1]");
  const Eigen::Index q = sie.E.cols();
  if (q < 1) throw std::invalid_argument("need at least one response");
  Eigen::VectorXd contribution = sie.E.array().square().colwise().sum();
  const double total = contribution.sum();
  if (!(total > 0.0)) {
    throw std::invalid_argument("all scaled errors are zero; no responses to select");
  }
  std::vector<int> order(static_cast<std::size_t>(q));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return contribution(a) > contribution(b); });
  ResponseSubset subset;
  subset.delta = delta;
  double covered = 0.0;
  for (int j : order) {
    subset.indices.push_back(j);
    covered += contribution(j);
    subset.proportion = covered / total;
    if (subset.proportion >= delta) break;
  }
  return subset;
}

Eigen::MatrixXd transform_responses(const Eigen::MatrixXd& Y, const Eigen::VectorXd& targets,
                                    const Eigen::VectorXd& weights, double epsilon) {
  check_targets_weights(Y.cols(), targets, weights);
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  Eigen::MatrixXd U(Y.rows(), Y.cols());
  for (Eigen::Index j = 0; j < Y.cols(); ++j) {
    const double floor = epsilon * weights(j);
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
      U(i, j) = std::log(std::max(std::abs(Y(i, j) - targets(j)), floor) / weights(j));
    }
  }
  return U;
}

ClusterAssignment cluster_responses(const Eigen::MatrixXd& U, int num_clusters) {
  const int q = static_cast<int>(U.cols());
  if (q < 2) throw std::invalid_argument("clustering needs at least two responses");
  if (U.rows() < 2) throw std::invalid_argument("clustering needs at least two rows");

  std::vector<int> varying, constant;
  for (int j = 0; j < q; ++j) {
    const double sd = std::sqrt((U.col(j).array() - U.col(j).mean()).matrix().squaredNorm() /
                                static_cast<double>(U.rows() - 1));
    (sd > kConstantSd ? varying : constant).push_back(j);
  }

  const int qv = static_cast<int>(varying.size());
  std::vector<int> varying_labels(varying.size(), 0);
  int varying_count = qv > 0 ? 1 : 0;
  if (qv >= 2) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(qv, qv);
    for (int a = 0; a < qv; ++a) {
      for (int b = a + 1; b < qv; ++b) {
        const double d =
            1.0 - std::abs(column_correlation(U.col(varying[static_cast<std::size_t>(a)]),
                                              U.col(varying[static_cast<std::size_t>(b)])));
        D(a, b) = d;
        D(b, a) = d;
      }
    }
    const auto levels = linkage_levels(D);
    int target = num_clusters;
    if (target == 0) {
      // Best mean silhouette over 2..min(10, qv-1); ties to fewer clusters.
      // With only two columns that range is empty and one cluster is used.
      target = 1;
      double best = -std::numeric_limits<double>::infinity();
      for (int c = 2; c <= std::min(10, qv - 1); ++c) {
        int count = 0;
        const auto labels = renumber(levels[static_cast<std::size_t>(c)], &count);
        const double s = silhouette(D, labels, count);
        if (s > best) {
          best = s;
          target = c;
        }
      }
    }
    if (target < 1 || target > qv) {
      throw std::invalid_argument("num_clusters must be between 1 and the varying column count");
    }
    varying_labels = renumber(levels[static_cast<std::size_t>(target)], &varying_count);
  } else if (num_clusters > std::max(qv, 1)) {
    throw std::invalid_argument("num_clusters must be between 1 and the varying column count");
  }

  // Raw ids: HAC labels for varying columns, fresh singleton ids for constant
  // columns, renumbered together by first column appearance.
  std::vector<int> raw(static_cast<std::size_t>(q), -1);
  for (std::size_t k = 0; k < varying.size(); ++k) {
    raw[static_cast<std::size_t>(varying[k])] = varying_labels[k];
  }
  int next = varying_count;
  for (int j : constant) raw[static_cast<std::size_t>(j)] = next++;

  ClusterAssignment assignment;
  assignment.labels = renumber(raw, &assignment.num_clusters);
  return assignment;
}

Eigen::MatrixXd expand_features(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (p < 1) throw std::invalid_argument("feature expansion needs at least one column");
  Eigen::MatrixXd F(n, 2 * p + p * (p - 1) / 2);
  F.leftCols(p) = X;
  F.middleCols(p, p) = X.array().square();
  Eigen::Index col = 2 * p;
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = a + 1; b < p; ++b) {
      F.col(col++) = X.col(a).cwiseProduct(X.col(b));
    }
  }
  return F;
}

void ClusterModelSet::predict_responses(const Eigen::VectorXd& expanded_x,
                                        std::vector<std::pair<int, double>>& out) const {
  out.clear();
  for (const auto& chain : clusters) {
    std::vector<std::pair<int, double>> predicted;  // chain-local predecessor values
    for (const auto& link : chain) {
      double value = link.constant_value;
      if (!link.constant) {
        Eigen::VectorXd input(expanded_x.size() + static_cast<Eigen::Index>(link.predecessors.size()));
        input.head(expanded_x.size()) = expanded_x;
        for (std::size_t k = 0; k < link.predecessors.size(); ++k) {
          const int wanted = link.predecessors[k];
          const auto it = std::find_if(predicted.begin(), predicted.end(),
                                       [&](const auto& pr) { return pr.first == wanted; });
          if (it == predicted.end()) {
            throw std::logic_error("chain references a response that is not yet predicted");
          }
          input(expanded_x.size() + static_cast<Eigen::Index>(k)) = it->second;
        }
        value = link.model.predict(input);
      }
      predicted.emplace_back(link.response, value);
      out.emplace_back(link.response, value);
    }
  }
}

nlohmann::json ClusterModelSet::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& chain : clusters) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& link : chain) c.push_back(chain_to_json(link));
    arr.push_back(c);
  }
  return {{"clusters", arr}};
}

ClusterModelSet ClusterModelSet::from_json(const nlohmann::json& j) {
  ClusterModelSet set;
  for (const auto& c : j.at("clusters")) {
    std::vector<ChainModel> chain;
    for (const auto& link : c) chain.push_back(chain_from_json(link));
    set.clusters.push_back(std::move(chain));
  }
  return set;
}

ClusterModelSet fit_cluster_models(const Eigen::MatrixXd& U, const ClusterAssignment& clusters,
                                   const Eigen::MatrixXd& X, double inclusion_rule, int folds,
                                   std::uint64_t seed) {
  const Eigen::Index n = U.rows();
  if (X.rows() != n) throw std::invalid_argument("responses and inputs must have matching rows");
  if (static_cast<Eigen::Index>(clusters.labels.size()) != U.cols()) {
    throw std::invalid_argument("cluster labels must cover every response column");
  }
  if (n < 5) throw std::invalid_argument("chain fitting needs at least five rows");
  if (!(inclusion_rule >= 0.0)) throw std::invalid_argument("inclusion rule must be >= 0");

  const Eigen::MatrixXd F = expand_features(X);

  // Fixed internal 80/20 split used to score every candidate model.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng::Stream stream(rng::derive(seed, "chain-split"));
  stream.shuffle(order);
  const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n))));
  std::vector<int> test_rows(order.begin(), order.begin() + static_cast<long>(n_test));
  std::vector<int> train_rows(order.begin() + static_cast<long>(n_test), order.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());

  const Eigen::MatrixXd F_train = take_rows(F, train_rows);
  const Eigen::MatrixXd F_test = take_rows(F, test_rows);
  const Eigen::MatrixXd U_train = take_rows(U, train_rows);
  const Eigen::MatrixXd U_test = take_rows(U, test_rows);
  const int eff_folds = std::min<int>(folds, static_cast<int>(train_rows.size()));

  // Candidate fit on the train split, scored on the held-out rows. True
  // predecessor values are used on both sides while selecting; prediction
  // later substitutes the chain's own estimates.
  const auto score_candidate = [&](int col, const std::vector<int>& preds, LassoModel* out) {
    const Eigen::MatrixXd A_train = append_columns(F_train, U_train, preds);
    const Eigen::MatrixXd A_test = append_columns(F_test, U_test, preds);
    LassoModel m = fit_lasso(A_train, U_train.col(col), {}, eff_folds, seed);
    const double score = r_squared(U_test.col(col), m.predict_rows(A_test));
    if (out) *out = std::move(m);
    return score;
  };

  ClusterModelSet set;
  set.clusters.resize(static_cast<std::size_t>(clusters.num_clusters));
  for (int c = 0; c < clusters.num_clusters; ++c) {
    auto& chain = set.clusters[static_cast<std::size_t>(c)];
    std::vector<int> pending;
    for (std::size_t j = 0; j < clusters.labels.size(); ++j) {
      if (clusters.labels[j] != c) continue;
      const int col = static_cast<int>(j);
      const double sd = std::sqrt((U_train.col(col).array() - U_train.col(col).mean())
                                      .matrix()
                                      .squaredNorm() /
                                  static_cast<double>(U_train.rows() - 1));
      if (sd <= kConstantSd) {
        ChainModel link;
        link.response = col;
        link.constant = true;
        link.constant_value = U_train.col(col).mean();
        link.fit_score = 1.0;
        chain.push_back(std::move(link));
      } else {
        pending.push_back(col);
      }
    }

    std::vector<int> predecessors;  // varying TRs already modeled in this chain
    while (!pending.empty()) {
      int best_idx = -1;
      double best_score = -std::numeric_limits<double>::infinity();
      bool best_used_preds = false;
      for (std::size_t k = 0; k < pending.size(); ++k) {
        const int col = pending[k];
        const double base = score_candidate(col, {}, nullptr);
        double score = base;
        bool used = false;
        if (!predecessors.empty()) {
          const double with = score_candidate(col, predecessors, nullptr);
          if (with - base >= inclusion_rule) {
            score = with;
            used = true;
          }
        }
        if (score > best_score) {
          best_score = score;
          best_idx = static_cast<int>(k);
          best_used_preds = used;
        }
      }
      const int col = pending[static_cast<std::size_t>(best_idx)];
      pending.erase(pending.begin() + best_idx);

      ChainModel link;
      link.response = col;
      link.fit_score = best_score;
      link.predecessors = best_used_preds ? predecessors : std::vector<int>{};
      // Structure chosen on the split; coefficients refit on all rows.
      const Eigen::MatrixXd A_full = append_columns(F, U, link.predecessors);
      link.model = fit_lasso(A_full, U.col(col), {}, std::min<int>(folds, static_cast<int>(n)),
                             seed);
      chain.push_back(std::move(link));
      predecessors.push_back(col);
    }
  }
  return set;
}

nlohmann::json LossSurrogate::to_json() const {
  return {{"schema_version", kSchemaVersion},
          {"kind", "loss-surrogate"},
          {"p", p},
          {"pi_star", pi_star},
          {"big_loss_M", big_loss_M},
          {"epsilon", epsilon},
          {"response_columns", response_columns},
          {"models", models.to_json()},
          {"classifier", classifier ? classifier->to_json() : nlohmann::json(nullptr)}};
}

LossSurrogate LossSurrogate::from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != kSchemaVersion) {
    throw FormatError("loss surrogate: unsupported schema version");
  }
  if (j.at("kind").get<std::string>() != "loss-surrogate") {
    throw FormatError("loss surrogate: unexpected kind");
  }
  LossSurrogate s;
  s.p = j.at("p").get<int>();
  s.pi_star = j.at("pi_star").get<double>();
  s.big_loss_M = j.at("big_loss_M").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
  s.response_columns = j.at("response_columns").get<std::vector<int>>();
  s.models = ClusterModelSet::from_json(j.at("models"));
  if (!j.at("classifier").is_null()) s.classifier = classify::model_from_json(j.at("classifier"));
  return s;
}

double predict_loss(const LossSurrogate& s, const Eigen::VectorXd& x) {
  if (s.p < 1 || s.models.clusters.empty()) throw std::invalid_argument("surrogate is not fitted");
  if (x.size() != s.p) {
    throw std::invalid_argument("surrogate expects " + std::to_string(s.p) + " inputs, got " +
                                std::to_string(x.size()));
  }
  if (s.classifier && s.classifier->predict_proba(x) < s.pi_star) return s.big_loss_M;
  Eigen::MatrixXd row(1, x.size());
  row.row(0) = x.transpose();
  const Eigen::VectorXd expanded = expand_features(row).row(0);
  std::vector<std::pair<int, double>> predicted;
  s.models.predict_responses(expanded, predicted);
  double loss = 0.0;
  for (const auto& [col, u_hat] : predicted) {
    const double e = std::exp(u_hat);
    loss += e * e;
  }
  return loss;
}

LossSurrogate fit_loss_surrogate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                 const Eigen::VectorXd& targets, const Eigen::VectorXd& weights,
                                 const SurrogateOptions& options,
                                 std::shared_ptr<classify::FeasibilityModel> classifier,
                                 double pi_star, double big_loss_M) {
  if (X.rows() != Y.rows()) throw std::invalid_argument("inputs and responses must have matching rows");
  const SieMatrix sie = sie_matrix(Y, targets, weights);

  // Responses that never move carry a constant loss share and are dropped.
  std::vector<int> screened;
  for (Eigen::Index j = 0; j < Y.cols(); ++j) {
    if (sie.sd(j) >= options.sd_screen) screened.push_back(static_cast<int>(j));
  }
  if (screened.empty()) {
    throw EvaluationError("all responses are constant over the feasible rows; nothing to model");
  }

  SieMatrix sub;
  sub.E.resize(Y.rows(), static_cast<Eigen::Index>(screened.size()));
  sub.mean.resize(static_cast<Eigen::Index>(screened.size()));
  sub.sd.resize(static_cast<Eigen::Index>(screened.size()));
  for (std::size_t k = 0; k < screened.size(); ++k) {
    sub.E.col(static_cast<Eigen::Index>(k)) = sie.E.col(screened[k]);
    sub.mean(static_cast<Eigen::Index>(k)) = sie.mean(screened[k]);
    sub.sd(static_cast<Eigen::Index>(k)) = sie.sd(screened[k]);
  }
  const ResponseSubset subset = select_responses(sub, options.delta);

  std::vector<int> columns;
  columns.reserve(subset.indices.size());
  for (int k : subset.indices) columns.push_back(screened[static_cast<std::size_t>(k)]);
  std::sort(columns.begin(), columns.end());

  Eigen::MatrixXd Y_sel(Y.rows(), static_cast<Eigen::Index>(columns.size()));
  Eigen::VectorXd t_sel(static_cast<Eigen::Index>(columns.size()));
  Eigen::VectorXd w_sel(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    Y_sel.col(static_cast<Eigen::Index>(k)) = Y.col(columns[k]);
    t_sel(static_cast<Eigen::Index>(k)) = targets(columns[k]);
    w_sel(static_cast<Eigen::Index>(k)) = weights(columns[k]);
  }
  const Eigen::MatrixXd U = transform_responses(Y_sel, t_sel, w_sel, options.epsilon);

  ClusterAssignment assignment;
  if (U.cols() == 1) {
    assignment.labels = {0};
    assignment.num_clusters = 1;
  } else {
    assignment = cluster_responses(U, options.num_clusters);
  }

  LossSurrogate s;
  s.models = fit_cluster_models(U, assignment, X, options.inclusion_rule, options.folds,
                                options.seed);
  s.response_columns = columns;
  s.classifier = std::move(classifier);
  s.pi_star = pi_star;
  s.epsilon = options.epsilon;
  s.p = static_cast<int>(X.cols());

  const Eigen::MatrixXd E2 = sie.E.array().square();
  s.big_loss_M = std::max(big_loss_M, E2.rowwise().sum().maxCoeff());
  return s;
}

}  // namespace medex::surrogate
