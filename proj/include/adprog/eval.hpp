#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adprog/classify.hpp"
#include "adprog/cohort.hpp"
#include "adprog/forecast.hpp"
#include "adprog/preprocess.hpp"
#include "adprog/survival.hpp"

namespace adprog::eval {

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignments;

  int fold_of(const std::string& patient_id) const;
  /// Patients of fold `f` in shuffled order.
  std::vector<std::string> patients_in(int f) const;

 private:
  friend FoldPlan kfold_split(const std::vector<std::string>&, int, std::uint64_t);
  std::vector<std::string> shuffled_;
};

/// Seeded shuffle followed by round-robin assignment; fold sizes differ by at most one.
FoldPlan kfold_split(const std::vector<std::string>& patient_ids, int k = 10, std::uint64_t seed = 0);

double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

struct Confusion {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  long total() const { return tp + fp + fn + tn; }
};

struct ClassificationMetrics {
  Confusion confusion;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  /// Set when the corresponding denominator was zero (the value is then 0).
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
  bool accuracy_undefined = false;
};

ClassificationMetrics metrics_from_confusion(const Confusion& c);
/// Labels are 1 (positive) and 0 or -1 (negative).
ClassificationMetrics classification_metrics(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Mean and sample standard deviation; sd is 0 (flagged) for fewer than two values.
struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t count = 0;
  bool sd_undefined = false;
};
Summary summarize(const std::vector<double>& values);

inline constexpr std::array<forecast::ModelKind, 3> kModelKinds = {forecast::ModelKind::sGP, forecast::ModelKind::pGP,
                                                                 forecast::ModelKind::tGP};

struct CvOptions {
  int folds = 10;
  std::uint64_t seed = 0;
  forecast::SourceOptions gp;
  /// Fit z-normalization on each fold's training rows. When false the set is
  /// standardized once over all rows (unless it is already standardized).
  bool normalize_per_fold = true;
};

struct ForecastRow {
  int fold = 0;
  forecast::HorizonForecast forecast;
  std::array<double, 4> truth{};
};

struct CvReport {
  int k = 0;
  /// [model kind][fold]: absolute errors pooled over horizons and test rows.
  std::array<std::vector<double>, 3> fold_mae;
  std::array<Summary, 3> summary;
  /// [model kind][fold][horizon]
  std::array<std::vector<std::array<double, 4>>, 3> fold_horizon_mae;
  /// [model kind][horizon], pooled over all folds.
  std::array<std::array<double, 4>, 3> horizon_mae{};
  /// Every test-row forecast, grouped by fold, then patient, anchor and model kind.
  std::vector<ForecastRow> forecasts;
  FoldPlan plan;
};

/// Patient-independent k-fold evaluation of sGP, pGP and tGP. For every test
/// row the personalized and target models condition on the patient's earlier
/// rows only.
CvReport run_cv(const SupervisedSet& set, const CvOptions& options);

struct ConversionOptions {
  survival::CovariateMode mode = survival::CovariateMode::Levels;
  bool normalize_probabilities = false;
  classify::SvmOptions svm;
  int folds = 10;
  std::uint64_t seed = 0;
};

struct ConversionRow {
  std::string patient_id;
  int fold = 0;
  std::array<double, 4> probabilities{};
  bool truth = false;  // converted within 24 months
  classify::Decision decision;
};

struct ConversionReport {
  std::vector<ConversionRow> rows;
  ClassificationMetrics metrics;
  /// Cox coefficients per fold.
  std::vector<Eigen::VectorXd> fold_beta;
};

/// Out-of-fold conversion classification: per fold a Cox model is fitted on
/// the training patients, their window probabilities train the classifier,
/// and the held-out patients are scored.
ConversionReport run_conversion(const std::vector<survival::PatientScores>& scores,
                                const std::map<std::string, ConversionLabel>& labels,
                                const ConversionOptions& options);

}  // namespace adprog::eval
