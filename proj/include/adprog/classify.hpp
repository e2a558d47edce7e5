#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace adprog::classify {

struct TrainingReport {
  int epochs = 0;
  double objective = 0.0;
  /// Best objective seen after each epoch (starts from the w = 0, b = 0 value).
  std::vector<double> objective_history;
};

struct LinearClassifier {
  Eigen::VectorXd w;
  double b = 0.0;
  double C = 1.0;
  TrainingReport report;
};

struct SvmOptions {
  double C = 1.0;
  int epochs = 200;
  std::uint64_t seed = 0;
  /// Scale each sample's penalty by N / (2 N_class) so both classes weigh the same.
  bool balance_classes = false;
};

/// 0.5 ||w||^2 + C sum_i c_i max(0, 1 - y_i (w'x_i + b)).
double svm_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& X, const std::vector<int>& y,
                     double C, const std::vector<double>& sample_weight = {});

/// Averaged stochastic subgradient descent (Pegasos with an unregularized
/// bias). Labels are -1/+1 and both classes must be present.
LinearClassifier svm_train(const Eigen::MatrixXd& X, const std::vector<int>& y, const SvmOptions& options = {});

struct Decision {
  int label = 1;
  double score = 0.0;
};

/// sign(w'x + b) with a score of exactly zero mapped to +1.
Decision svm_predict(const LinearClassifier& model, const Eigen::VectorXd& x);

}  // namespace adprog::classify
