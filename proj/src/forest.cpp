#include <algorithm>
#include <cmath>
#include <numeric>

#include "medex/classify.hpp"
#include "medex/parallel.hpp"
#include "medex/rng.hpp"

namespace medex::classify {

namespace {

struct TreeBuilder {
  const Eigen::MatrixXd& X;
  const std::vector<int>& z;
  int mtry;
  int min_leaf;
  rng::Stream& stream;
  ForestModel::Tree nodes;

  // Builds the subtree over `samples` (indices into X) and returns its node id.
  int build(std::vector<int>& samples) {
    int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    long ones = 0;
    for (int s : samples) ones += z[static_cast<std::size_t>(s)];
    double fraction = static_cast<double>(ones) / static_cast<double>(samples.size());
    nodes[static_cast<std::size_t>(id)].fraction = fraction;

    if (ones == 0 || ones == static_cast<long>(samples.size()) ||
        static_cast<int>(samples.size()) < 2 * min_leaf)
      return id;

    // Sample mtry candidate features without replacement (partial
    // Fisher-Yates); the draw order fixes split tie-breaking.
    const int p = static_cast<int>(X.cols());
    std::vector<int> features(static_cast<std::size_t>(p));
    std::iota(features.begin(), features.end(), 0);
    for (int k = 0; k < mtry; ++k) {
      auto swap_with = k + static_cast<int>(stream.uniform_int(
                               static_cast<std::uint64_t>(p - k)));
      std::swap(features[static_cast<std::size_t>(k)],
                features[static_cast<std::size_t>(swap_with)]);
    }

    double best_cost = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int>> order(samples.size());
    for (int k = 0; k < mtry; ++k) {
      int f = features[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < samples.size(); ++i)
        order[i] = {X(samples[i], f), z[static_cast<std::size_t>(samples[i])]};
      std::sort(order.begin(), order.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      long left_n = 0, left_ones = 0;
      const long total_n = static_cast<long>(samples.size());
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        left_n += 1;
        left_ones += order[i].second;
        if (order[i].first == order[i + 1].first) continue;
        long right_n = total_n - left_n;
        if (left_n < min_leaf || right_n < min_leaf) continue;
        double pl = static_cast<double>(left_ones) / static_cast<double>(left_n);
        double pr = static_cast<double>(ones - left_ones) / static_cast<double>(right_n);
        double cost = static_cast<double>(left_n) * pl * (1.0 - pl) +
                      static_cast<double>(right_n) * pr * (1.0 - pr);
        if (cost < best_cost) {
          best_cost = cost;
          best_feature = f;
          best_threshold = 0.5 * (order[i].first + order[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;  // all sampled features constant here

    std::vector<int> left, right;
    for (int s : samples)
      (X(s, best_feature) <= best_threshold ? left : right).push_back(s);
    samples.clear();
    samples.shrink_to_fit();

    nodes[static_cast<std::size_t>(id)].feature = best_feature;
    nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
    int left_id = build(left);
    nodes[static_cast<std::size_t>(id)].left = left_id;
    int right_id = build(right);
    nodes[static_cast<std::size_t>(id)].right = right_id;
    return id;
  }
};

}  // namespace

double ForestModel::predict_tree(std::size_t tree_index, const Eigen::VectorXd& x) const {
  const Tree& tree = trees.at(tree_index);
  int node = 0;
  while (tree[static_cast<std::size_t>(node)].feature >= 0) {
    const Node& nd = tree[static_cast<std::size_t>(node)];
    node = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return tree[static_cast<std::size_t>(node)].fraction;
}

double ForestModel::predict_proba(const Eigen::VectorXd& x) const {
  if (x.size() != p) throw std::invalid_argument("forest predict_proba: dimension mismatch");
  if (trees.empty()) throw std::invalid_argument("forest predict_proba: unfitted model");
  double sum = 0.0;
  for (std::size_t t = 0; t < trees.size(); ++t) sum += predict_tree(t, x);
  return sum / static_cast<double>(trees.size());
}

ForestModel fit_forest(const Eigen::MatrixXd& X, const std::vector<int>& z, int ntree, int mtry,
                       int min_leaf, std::uint64_t seed) {
  if (X.rows() == 0) throw std::invalid_argument("fit_forest: empty data");
  if (static_cast<std::size_t>(X.rows()) != z.size())
    throw std::invalid_argument("fit_forest: X rows and z length differ");
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (mtry == 0) mtry = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
  if (ntree < 1) throw std::invalid_argument("fit_forest: ntree must be >= 1");
  if (mtry < 1 || mtry > p) throw std::invalid_argument("fit_forest: mtry outside [1, p]");
  if (min_leaf < 1) throw std::invalid_argument("fit_forest: min_leaf must be >= 1");

  ForestModel model;
  model.p = p;
  model.mtry = mtry;
  model.min_leaf = min_leaf;
  model.seed = seed;
  model.trees.resize(static_cast<std::size_t>(ntree));
  std::vector<std::vector<char>> in_bag(static_cast<std::size_t>(ntree),
                                        std::vector<char>(static_cast<std::size_t>(n), 0));

  // One derived stream per tree: results do not depend on the worker count.
  util::parallel_for(ntree, [&](int t) {
    rng::Stream stream(rng::derive(seed, "forest-tree", static_cast<std::uint64_t>(t)));
    std::vector<int> samples(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      int s = static_cast<int>(stream.uniform_int(static_cast<std::uint64_t>(n)));
      samples[static_cast<std::size_t>(i)] = s;
      in_bag[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)] = 1;
    }
    TreeBuilder builder{X, z, mtry, min_leaf, stream, {}};
    builder.build(samples);
    model.trees[static_cast<std::size_t>(t)] = std::move(builder.nodes);
  });

  // Out-of-bag accuracy: average each sample's leaf fractions over the trees
  // that never saw it, classify at 0.5.
  long scored = 0, correct = 0;
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    long count = 0;
    for (int t = 0; t < ntree; ++t) {
      if (in_bag[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]) continue;
      sum += model.predict_tree(static_cast<std::size_t>(t), X.row(i).transpose());
      count += 1;
    }
    if (count == 0) continue;
    scored += 1;
    int predicted = sum / static_cast<double>(count) >= 0.5 ? 1 : 0;
    if (predicted == z[static_cast<std::size_t>(i)]) correct += 1;
  }
  if (scored > 0)
    model.oob_accuracy = static_cast<double>(correct) / static_cast<double>(scored);
  return model;
}

nlohmann::json ForestModel::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["kind"] = "forest";
  j["p"] = p;
  j["mtry"] = mtry;
  j["min_leaf"] = min_leaf;
  j["seed"] = seed;
  if (oob_accuracy)
    j["oob_accuracy"] = *oob_accuracy;
  else
    j["oob_accuracy"] = nullptr;
  nlohmann::json jt = nlohmann::json::array();
  for (const Tree& tree : trees) {
    nlohmann::json jn = nlohmann::json::array();
    for (const Node& nd : tree)
      jn.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.fraction});
    jt.push_back(std::move(jn));
  }
  j["trees"] = std::move(jt);
  return j;
}

ForestModel ForestModel::from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "forest") throw FormatError("forest model document has wrong kind");
  ForestModel m;
  m.p = j.at("p").get<int>();
  m.mtry = j.at("mtry").get<int>();
  m.min_leaf = j.at("min_leaf").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("oob_accuracy") && !j["oob_accuracy"].is_null())
    m.oob_accuracy = j["oob_accuracy"].get<double>();
  for (const auto& jn : j.at("trees")) {
    Tree tree;
    for (const auto& row : jn) {
      if (!row.is_array() || row.size() != 5)
        throw FormatError("forest model document has malformed node");
      Node nd;
      nd.feature = row[0].get<int>();
      nd.threshold = row[1].get<double>();
      nd.left = row[2].get<int>();
      nd.right = row[3].get<int>();
      nd.fraction = row[4].get<double>();
      tree.push_back(nd);
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

}  // namespace medex::classify
