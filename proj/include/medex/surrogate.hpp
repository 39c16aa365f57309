#ifndef MEDEX_SURROGATE_HPP
#define MEDEX_SURROGATE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <memory>
#include <optional>
#include <vector>

#include "medex/classify.hpp"

namespace medex::surrogate {

// Scaled individual errors E_ij = (Y_ij - T_j)/w_j over the feasible rows,
// with per-column mean and sd (sample sd, N1-1 denominator).
struct SieMatrix {
  Eigen::MatrixXd E;
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

SieMatrix sie_matrix(const Eigen::MatrixXd& Y, const Eigen::VectorXd& targets,
                     const Eigen::VectorXd& weights);

// Response subset J* chosen greedily by decreasing squared-SIE contribution
// until its share of the total reaches delta.
struct ResponseSubset {
  std::vector<int> indices;
  double proportion = 0.0;
  double delta = 0.0;
};

ResponseSubset select_responses(const SieMatrix& sie, double delta);

// Transformed responses U = log(max(|Y - T|, epsilon * w)/w); the floor keeps
// exact target hits finite.
Eigen::MatrixXd transform_responses(const Eigen::MatrixXd& Y, const Eigen::VectorXd& targets,
                                    const Eigen::VectorXd& weights, double epsilon = 1e-10);

// Cluster labels for the columns of U, numbered 0..num_clusters-1 in order of
// each cluster's first member column.
struct ClusterAssignment {
  std::vector<int> labels;
  int num_clusters = 0;
};

// Hierarchical agglomerative clustering with average linkage on the distance
// 1 - |corr|. num_clusters = 0 picks the count with the best silhouette over
// 2..min(10, q-1). Constant columns always form their own singleton clusters.
ClusterAssignment cluster_responses(const Eigen::MatrixXd& U, int num_clusters = 0);

// First- and second-order feature table: columns x_h, then x_h^2, then the
// cross terms x_h x_h' for h < h' in row-major order; 2p + p(p-1)/2 columns.
Eigen::MatrixXd expand_features(const Eigen::MatrixXd& X);

struct LassoModel {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;  // original feature scale
  std::vector<int> support;      // indices of nonzero coefficients
  double lambda = 0.0;
  std::vector<double> lambda_grid;
  std::vector<double> cv_errors;       // mean CV MSE per grid value (empty without CV)
  std::vector<double> objective_trace; // penalized objective per sweep of the final fit

  double predict(const Eigen::VectorXd& features) const;
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& F) const;
  nlohmann::json to_json() const;
  static LassoModel from_json(const nlohmann::json& j);
};

// Cyclic coordinate descent with soft thresholding on internally standardized
// features, objective RSS/(2n) + lambda * l1(beta). An empty grid builds a
// 50-point log path from lambda_max down to lambda_max * 1e-4. With folds >= 2
// and more than one grid value, lambda is chosen by minimum cross-validation
// error (ties to the sparser model); otherwise the first grid value is used.
LassoModel fit_lasso(const Eigen::MatrixXd& F, const Eigen::VectorXd& u,
                     const std::vector<double>& lambda_grid = {}, int folds = 5,
                     std::uint64_t seed = 0);

// Largest penalty with a fully-zero solution: max |F_std^T u_centered| / n.
double lasso_lambda_max(const Eigen::MatrixXd& F, const Eigen::VectorXd& u);

// One link of a within-cluster model chain: a transformed response regressed
// on the expanded features plus (optionally) the chain's earlier TRs.
struct ChainModel {
  int response = -1;              // column of U this model predicts
  bool constant = false;          // constant TR, modeled by its value alone
  double constant_value = 0.0;
  std::vector<int> predecessors;  // earlier TR columns used as extra inputs
  LassoModel model;               // inputs: [expanded features | predecessors]
  double fit_score = 0.0;         // out-of-sample R^2 on the internal split
};

struct ClusterModelSet {
  std::vector<std::vector<ChainModel>> clusters;  // chain order within each cluster

  // Predicted U value for every modeled column, chains evaluated in order
  // with predicted predecessors substituted for true ones.
  void predict_responses(const Eigen::VectorXd& expanded_x,
                         std::vector<std::pair<int, double>>& out) const;
  nlohmann::json to_json() const;
  static ClusterModelSet from_json(const nlohmann::json& j);
};

// Appendix-style sequential build: per cluster, every TR gets a baseline fit,
// the best out-of-sample R^2 becomes the chain head, and each next TR (again
// picked by best score) may add already-modeled TRs as predictors when that
// improves out-of-sample R^2 by at least inclusion_rule.
ClusterModelSet fit_cluster_models(const Eigen::MatrixXd& U, const ClusterAssignment& clusters,
                                   const Eigen::MatrixXd& X, double inclusion_rule = 0.01,
                                   int folds = 5, std::uint64_t seed = 0);

// Composite loss predictor: M on the infeasible side of the classifier gate,
// otherwise the sum of squared exp(U-hat) over all modeled responses.
// Responses dropped by the variance screen or the delta subset contribute
// nothing; their loss share is constant (screened) or below 1 - delta.
struct LossSurrogate {
  ClusterModelSet models;
  std::vector<int> response_columns;  // original response indices that were modeled
  std::shared_ptr<classify::FeasibilityModel> classifier;  // optional gate
  double pi_star = 0.5;
  double big_loss_M = 0.0;
  double epsilon = 1e-10;
  int p = 0;

  nlohmann::json to_json() const;
  static LossSurrogate from_json(const nlohmann::json& j);
};

double predict_loss(const LossSurrogate& s, const Eigen::VectorXd& x);

struct SurrogateOptions {
  double delta = 0.95;          // Eq.-style share of squared SIE to cover
  double epsilon = 1e-10;       // TR log floor
  int num_clusters = 0;         // 0 = silhouette choice
  double inclusion_rule = 0.01; // min out-of-sample R^2 gain for predecessors
  int folds = 5;
  double sd_screen = 1e-8;      // drop responses with SIE sd below this
  std::uint64_t seed = 0;
};

// Whole pipeline over the feasible rows: SIE -> variance screen -> subset ->
// transform -> cluster -> chain fits. big_loss_M is raised to the max
// observed loss if the caller's value is below it.
LossSurrogate fit_loss_surrogate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                 const Eigen::VectorXd& targets, const Eigen::VectorXd& weights,
                                 const SurrogateOptions& options = {},
                                 std::shared_ptr<classify::FeasibilityModel> classifier = nullptr,
                                 double pi_star = 0.5, double big_loss_M = 0.0);

}  // namespace medex::surrogate

#endif
