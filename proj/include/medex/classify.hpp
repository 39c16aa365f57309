#ifndef MEDEX_CLASSIFY_HPP
#define MEDEX_CLASSIFY_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "medex/errors.hpp"

namespace medex::classify {

// Counts and rates of a binary confusion table. Positive class is z = 1
// (feasible). Rates with a zero denominator are left unset rather than
// reported as NaN.
struct ConfusionMetrics {
  long tp = 0;
  long tn = 0;
  long fp = 0;
  long fn = 0;
  std::optional<double> sensitivity;  // TP / (TP + FN)
  std::optional<double> specificity;  // TN / (TN + FP)
};

// Common interface of the feasibility classifiers. Fitted models are
// immutable and safe to share across threads.
class FeasibilityModel {
 public:
  virtual ~FeasibilityModel() = default;
  virtual std::string kind() const = 0;
  virtual int dimension() const = 0;
  virtual double predict_proba(const Eigen::VectorXd& x) const = 0;
  virtual nlohmann::json to_json() const = 0;

  Eigen::VectorXd predict_proba_rows(const Eigen::MatrixXd& X) const;
};

class LogisticModel final : public FeasibilityModel {
 public:
  double intercept = 0.0;
  Eigen::VectorXd coefficients;  // on the standardized feature scale
  Eigen::VectorXd feature_means;
  Eigen::VectorXd feature_sds;  // constant features carry sd 1 and coefficient 0
  double l2_penalty = 1e-4;
  bool converged = false;
  int iterations = 0;
  std::vector<double> deviance_trace;  // penalized deviance after each Newton step

  std::string kind() const override { return "logistic"; }
  int dimension() const override { return static_cast<int>(coefficients.size()); }
  double predict_proba(const Eigen::VectorXd& x) const override;
  nlohmann::json to_json() const override;
  static LogisticModel from_json(const nlohmann::json& j);
};

class ForestModel final : public FeasibilityModel {
 public:
  // Nodes stored in one flat array per tree; leaves have feature = -1 and
  // carry the class-1 fraction of their training samples.
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;   // index within the same tree, x[feature] <= threshold
    int right = -1;  // x[feature] > threshold
    double fraction = 0.0;
  };
  using Tree = std::vector<Node>;

  int p = 0;
  int mtry = 0;
  int min_leaf = 1;
  std::uint64_t seed = 0;
  std::vector<Tree> trees;
  std::optional<double> oob_accuracy;  // unset when no sample was ever out-of-bag

  std::string kind() const override { return "forest"; }
  int dimension() const override { return p; }
  double predict_proba(const Eigen::VectorXd& x) const override;
  nlohmann::json to_json() const override;
  static ForestModel from_json(const nlohmann::json& j);

  // Leaf fraction reached by a single tree; predict_proba is the mean of
  // these across trees.
  double predict_tree(std::size_t tree_index, const Eigen::VectorXd& x) const;
};

std::shared_ptr<FeasibilityModel> model_from_json(const nlohmann::json& j);

// Thrown when Newton iterations exhaust max_iter; carries the last iterate
// so callers can proceed with the best model found.
class LogisticConvergenceError : public ConvergenceError {
 public:
  LogisticConvergenceError(const std::string& what, LogisticModel last)
      : ConvergenceError(what), last_iterate(std::move(last)) {}
  LogisticModel last_iterate;
};

// Penalized Bernoulli log-likelihood and its gradient on the features as
// given (no internal standardization). The L2 penalty applies to the slope
// coefficients only, never the intercept.
double logistic_loglik(const Eigen::MatrixXd& F, const std::vector<int>& z, double l2_penalty,
                       double intercept, const Eigen::VectorXd& beta);
void logistic_gradient(const Eigen::MatrixXd& F, const std::vector<int>& z, double l2_penalty,
                       double intercept, const Eigen::VectorXd& beta, double& grad_intercept,
                       Eigen::VectorXd& grad_beta);

LogisticModel fit_logistic(const Eigen::MatrixXd& X, const std::vector<int>& z,
                           double l2_penalty = 1e-4, int max_iter = 100, double tol = 1e-8);

// mtry = 0 selects the default ceil(sqrt(p)).
ForestModel fit_forest(const Eigen::MatrixXd& X, const std::vector<int>& z, int ntree = 200,
                       int mtry = 0, int min_leaf = 1, std::uint64_t seed = 0);

ConfusionMetrics confusion_metrics(const Eigen::VectorXd& probs, const std::vector<int>& z,
                                   double threshold = 0.5);

struct ClassifierCandidate {
  std::string name;
  std::function<std::shared_ptr<FeasibilityModel>(const Eigen::MatrixXd&, const std::vector<int>&)>
      fit;
};

struct SelectionPolicy {
  double threshold = 0.5;
};

struct SelectionResult {
  int chosen_index = -1;
  std::shared_ptr<FeasibilityModel> model;
  std::vector<ConfusionMetrics> test_metrics;  // aligned with candidates
};

// Fits every candidate on the training split and picks the one with the
// highest test sensitivity, breaking ties by specificity and then by
// candidate order.
SelectionResult select_classifier(const std::vector<ClassifierCandidate>& candidates,
                                  const Eigen::MatrixXd& X_train, const std::vector<int>& z_train,
                                  const Eigen::MatrixXd& X_test, const std::vector<int>& z_test,
                                  const SelectionPolicy& policy = {});

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
};

// Random split preserving the class balance of z in both parts.
SplitIndices stratified_split(const std::vector<int>& z, double test_fraction, std::uint64_t seed);

}  // namespace medex::classify

#endif
