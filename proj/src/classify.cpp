#include "adprog/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "adprog/error.hpp"

namespace adprog::classify {
namespace {

std::vector<double> class_weights(const std::vector<int>& y, bool balance) {
  std::vector<double> c(y.size(), 1.0);
  if (!balance) return c;
  const auto pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const auto neg = static_cast<double>(y.size()) - pos;
  const double n = static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) c[i] = n / (2.0 * (y[i] == 1 ? pos : neg));
  return c;
}

}  // namespace

double svm_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& X, const std::vector<int>& y,
                     double C, const std::vector<double>& sample_weight) {
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double margin = y[ui] * (X.row(i).dot(w) + b);
    const double c = sample_weight.empty() ? 1.0 : sample_weight[ui];
    hinge += c * std::max(0.0, 1.0 - margin);
  }
  return 0.5 * w.squaredNorm() + C * hinge;
}

LinearClassifier svm_train(const Eigen::MatrixXd& X, const std::vector<int>& y, const SvmOptions& options) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw DataError("svm_train: X and y differ in length");
  if (!(options.C > 0.0)) throw ConfigError("svm_train: C must be positive");
  if (options.epochs < 1) throw ConfigError("svm_train: epochs must be >= 1");
  if (!X.allFinite()) throw DataError("svm_train: non-finite input");
  bool has_pos = false, has_neg = false;
  for (int label : y) {
    if (label == 1) has_pos = true;
    else if (label == -1) has_neg = true;
    else throw DataError("svm_train: labels must be -1 or +1");
  }
  if (!has_pos || !has_neg) throw DataError("svm_train: training labels contain a single class");

  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const std::vector<double> c = class_weights(y, options.balance_classes);
  // Dividing the objective by C N gives lambda/2 ||w||^2 + mean hinge.
  const double lambda = 1.0 / (options.C * static_cast<double>(n));
  const double radius = std::sqrt(2.0 / lambda);
  // Offset so the first step has unit size instead of 1 / lambda.
  const double t0 = std::max(0.0, 1.0 / lambda - 1.0);

  LinearClassifier model;
  model.C = options.C;
  model.w = Eigen::VectorXd::Zero(p);
  model.b = 0.0;
  double best = svm_objective(model.w, model.b, X, y, options.C, c);
  model.report.objective_history.push_back(best);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  double b = 0.0;
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  double t = 0.0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::VectorXd w_avg = Eigen::VectorXd::Zero(p);
    double b_avg = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::size_t i = order[k];
      const auto row = static_cast<Eigen::Index>(i);
      t += 1.0;
      const double eta = 1.0 / (lambda * (t + t0));
      const double margin = y[i] * (X.row(row).dot(w) + b);
      w *= (1.0 - eta * lambda);
      if (margin < 1.0) {
        w.noalias() += (eta * c[i] * y[i]) * X.row(row).transpose();
        b += eta * c[i] * y[i];
      }
      const double norm = w.norm();
      if (norm > radius) w *= radius / norm;
      const double wk = 1.0 / static_cast<double>(k + 1);
      w_avg += wk * (w - w_avg);
      b_avg += wk * (b - b_avg);
    }
    const double obj = svm_objective(w_avg, b_avg, X, y, options.C, c);
    if (obj < best) {
      best = obj;
      model.w = w_avg;
      model.b = b_avg;
    }
    model.report.objective_history.push_back(best);
  }
  model.report.epochs = options.epochs;
  model.report.objective = best;
  return model;
}

Decision svm_predict(const LinearClassifier& model, const Eigen::VectorXd& x) {
  if (x.size() != model.w.size()) {
    throw DataError("svm_predict: expected " + std::to_string(model.w.size()) + " features, got " +
                    std::to_string(x.size()));
  }
  Decision d;
  d.score = model.w.dot(x) + model.b;
  d.label = d.score >= 0.0 ? 1 : -1;
  return d;
}

}  // namespace adprog::classify
