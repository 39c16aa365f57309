#include "medex/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "medex/rng.hpp"

namespace medex::classify {

namespace {

double sigmoid(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

// log(1 + exp(eta)) without overflow.
double softplus(double eta) {
  return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

void check_xz(const Eigen::MatrixXd& X, const std::vector<int>& z, const char* where) {
  if (X.rows() == 0) throw std::invalid_argument(std::string(where) + ": empty data");
  if (static_cast<std::size_t>(X.rows()) != z.size())
    throw std::invalid_argument(std::string(where) + ": X rows and z length differ");
  for (int zi : z)
    if (zi != 0 && zi != 1)
      throw std::invalid_argument(std::string(where) + ": z must contain only 0/1 flags");
}

}  // namespace

Eigen::VectorXd FeasibilityModel::predict_proba_rows(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict_proba(X.row(i).transpose());
  return out;
}

double logistic_loglik(const Eigen::MatrixXd& F, const std::vector<int>& z, double l2_penalty,
                       double intercept, const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = (F * beta).array() + intercept;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    ll += z[static_cast<std::size_t>(i)] * eta(i) - softplus(eta(i));
  return ll - 0.5 * l2_penalty * beta.squaredNorm();
}

void logistic_gradient(const Eigen::MatrixXd& F, const std::vector<int>& z, double l2_penalty,
                       double intercept, const Eigen::VectorXd& beta, double& grad_intercept,
                       Eigen::VectorXd& grad_beta) {
  Eigen::VectorXd eta = (F * beta).array() + intercept;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    resid(i) = z[static_cast<std::size_t>(i)] - sigmoid(eta(i));
  grad_intercept = resid.sum();
  grad_beta = F.transpose() * resid - l2_penalty * beta;
}

double LogisticModel::predict_proba(const Eigen::VectorXd& x) const {
  if (x.size() != coefficients.size())
    throw std::invalid_argument("logistic predict_proba: dimension mismatch");
  double eta = intercept;
  for (Eigen::Index d = 0; d < x.size(); ++d)
    eta += coefficients(d) * (x(d) - feature_means(d)) / feature_sds(d);
  return sigmoid(eta);
}

LogisticModel fit_logistic(const Eigen::MatrixXd& X, const std::vector<int>& z, double l2_penalty,
                           int max_iter, double tol) {
  check_xz(X, z, "fit_logistic");
  if (l2_penalty < 0) throw std::invalid_argument("fit_logistic: negative penalty");
  if (max_iter < 1) throw std::invalid_argument("fit_logistic: max_iter must be positive");

  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();

  LogisticModel model;
  model.l2_penalty = l2_penalty;
  model.feature_means = X.colwise().mean();
  model.feature_sds = Eigen::VectorXd::Ones(p);
  Eigen::MatrixXd F = X.rowwise() - model.feature_means.transpose();
  for (Eigen::Index d = 0; d < p; ++d) {
    double sd = n > 1 ? std::sqrt(F.col(d).squaredNorm() / static_cast<double>(n - 1)) : 0.0;
    if (sd > 1e-12) {
      model.feature_sds(d) = sd;
      F.col(d) /= sd;
    } else {
      F.col(d).setZero();  // constant feature: centered column is zero, coefficient stays 0
    }
  }

  double ones = static_cast<double>(std::accumulate(z.begin(), z.end(), 0));
  double pbar = std::clamp(ones / static_cast<double>(n), 1e-12, 1.0 - 1e-12);
  model.intercept = std::log(pbar / (1.0 - pbar));
  model.coefficients = Eigen::VectorXd::Zero(p);

  auto penalized_deviance = [&](double b0, const Eigen::VectorXd& b) {
    return -2.0 * logistic_loglik(F, z, l2_penalty, b0, b);
  };
  double deviance = penalized_deviance(model.intercept, model.coefficients);
  model.deviance_trace.push_back(deviance);

  Eigen::VectorXd grad_beta(p);
  double grad_intercept = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    logistic_gradient(F, z, l2_penalty, model.intercept, model.coefficients, grad_intercept,
                      grad_beta);
    double gnorm = std::max(std::abs(grad_intercept),
                            p > 0 ? grad_beta.cwiseAbs().maxCoeff() : 0.0);
    if (gnorm <= tol) {
      model.converged = true;
      model.iterations = it;
      return model;
    }

    Eigen::VectorXd eta = (F * model.coefficients).array() + model.intercept;
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = sigmoid(eta(i));
      w(i) = std::max(s * (1.0 - s), 1e-10);
    }
    Eigen::MatrixXd H(p + 1, p + 1);
    H(0, 0) = w.sum();
    if (p > 0) {
      Eigen::VectorXd Fw = F.transpose() * w;
      H.block(1, 0, p, 1) = Fw;
      H.block(0, 1, 1, p) = Fw.transpose();
      H.block(1, 1, p, p) = F.transpose() * w.asDiagonal() * F;
      H.block(1, 1, p, p).diagonal().array() += l2_penalty;
    }
    Eigen::VectorXd g(p + 1);
    g(0) = grad_intercept;
    if (p > 0) g.tail(p) = grad_beta;
    Eigen::VectorXd delta = H.ldlt().solve(g);

    // Step-halving keeps the penalized deviance non-increasing.
    double step = 1.0;
    double b0_new = model.intercept;
    Eigen::VectorXd b_new = model.coefficients;
    double dev_new = deviance;
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      b0_new = model.intercept + step * delta(0);
      b_new = model.coefficients + (p > 0 ? (step * delta.tail(p)).eval()
                                          : Eigen::VectorXd::Zero(0).eval());
      dev_new = penalized_deviance(b0_new, b_new);
      if (dev_new <= deviance + 1e-12 * (1.0 + std::abs(deviance))) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;  // numerically stuck; gradient test below decides
    model.intercept = b0_new;
    model.coefficients = b_new;
    deviance = dev_new;
    model.deviance_trace.push_back(deviance);
    model.iterations = it + 1;
  }

  logistic_gradient(F, z, l2_penalty, model.intercept, model.coefficients, grad_intercept,
                    grad_beta);
  double gnorm =
      std::max(std::abs(grad_intercept), p > 0 ? grad_beta.cwiseAbs().maxCoeff() : 0.0);
  if (gnorm <= tol) {
    model.converged = true;
    return model;
  }
  throw LogisticConvergenceError(
      "fit_logistic: no convergence in " + std::to_string(max_iter) +
          " iterations (gradient norm " + std::to_string(gnorm) + ")",
      model);
}

nlohmann::json LogisticModel::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["kind"] = "logistic";
  j["intercept"] = intercept;
  j["coefficients"] = std::vector<double>(coefficients.data(), coefficients.data() + coefficients.size());
  j["feature_means"] =
      std::vector<double>(feature_means.data(), feature_means.data() + feature_means.size());
  j["feature_sds"] =
      std::vector<double>(feature_sds.data(), feature_sds.data() + feature_sds.size());
  j["l2_penalty"] = l2_penalty;
  j["converged"] = converged;
  j["iterations"] = iterations;
  return j;
}

LogisticModel LogisticModel::from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "logistic")
    throw FormatError("logistic model document has wrong kind");
  LogisticModel m;
  m.intercept = j.at("intercept").get<double>();
  auto coef = j.at("coefficients").get<std::vector<double>>();
  auto means = j.at("feature_means").get<std::vector<double>>();
  auto sds = j.at("feature_sds").get<std::vector<double>>();
  if (coef.size() != means.size() || coef.size() != sds.size())
    throw FormatError("logistic model document has inconsistent array lengths");
  m.coefficients = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
  m.feature_means =
      Eigen::Map<const Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
  m.feature_sds = Eigen::Map<const Eigen::VectorXd>(sds.data(), static_cast<Eigen::Index>(sds.size()));
  m.l2_penalty = j.value("l2_penalty", 1e-4);
  m.converged = j.value("converged", true);
  m.iterations = j.value("iterations", 0);
  return m;
}

std::shared_ptr<FeasibilityModel> model_from_json(const nlohmann::json& j) {
  std::string kind = j.value("kind", "");
  if (kind == "logistic") return std::make_shared<LogisticModel>(LogisticModel::from_json(j));
  if (kind == "forest") return std::make_shared<ForestModel>(ForestModel::from_json(j));
  throw FormatError("unknown classifier kind '" + kind + "'");
}

ConfusionMetrics confusion_metrics(const Eigen::VectorXd& probs, const std::vector<int>& z,
                                   double threshold) {
  if (probs.size() == 0) throw std::invalid_argument("confusion_metrics: empty input");
  if (static_cast<std::size_t>(probs.size()) != z.size())
    throw std::invalid_argument("confusion_metrics: probs and z length differ");
  ConfusionMetrics m;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    bool predicted = probs(i) >= threshold;
    bool actual = z[static_cast<std::size_t>(i)] == 1;
    if (actual)
      (predicted ? m.tp : m.fn) += 1;
    else
      (predicted ? m.fp : m.tn) += 1;
  }
  if (m.tp + m.fn > 0)
    m.sensitivity = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  if (m.tn + m.fp > 0)
    m.specificity = static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fp);
  return m;
}

SelectionResult select_classifier(const std::vector<ClassifierCandidate>& candidates,
                                  const Eigen::MatrixXd& X_train, const std::vector<int>& z_train,
                                  const Eigen::MatrixXd& X_test, const std::vector<int>& z_test,
                                  const SelectionPolicy& policy) {
  if (candidates.empty()) throw std::invalid_argument("select_classifier: no candidates");
  SelectionResult result;
  double best_sens = -1.0;
  double best_spec = -1.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    auto model = candidates[c].fit(X_train, z_train);
    auto metrics =
        confusion_metrics(model->predict_proba_rows(X_test), z_test, policy.threshold);
    double sens = metrics.sensitivity.value_or(-1.0);
    double spec = metrics.specificity.value_or(-1.0);
    if (result.chosen_index < 0 || sens > best_sens ||
        (sens == best_sens && spec > best_spec)) {
      result.chosen_index = static_cast<int>(c);
      result.model = model;
      best_sens = sens;
      best_spec = spec;
    }
    result.test_metrics.push_back(metrics);
  }
  return result;
}

SplitIndices stratified_split(const std::vector<int>& z, double test_fraction,
                              std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction > 1.0)
    throw std::invalid_argument("stratified_split: test_fraction outside [0,1]");
  SplitIndices out;
  for (int cls : {0, 1}) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < z.size(); ++i)
      if (z[i] == cls) idx.push_back(static_cast<int>(i));
    if (idx.empty()) continue;
    rng::Stream stream(rng::derive(seed, "stratified-split", static_cast<std::uint64_t>(cls)));
    stream.shuffle(idx);
    auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(idx.size())));
    if (n_test >= idx.size() && test_fraction < 1.0) n_test = idx.size() - 1;
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_test ? out.test : out.train).push_back(idx[i]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace medex::classify
