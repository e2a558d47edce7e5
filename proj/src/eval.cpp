#include "adprog/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "adprog/error.hpp"

namespace adprog::eval {

int FoldPlan::fold_of(const std::string& patient_id) const {
  const auto it = assignments.find(patient_id);
  if (it == assignments.end()) throw DataError("patient " + patient_id + " is not in the fold plan");
  return it->second;
}

std::vector<std::string> FoldPlan::patients_in(int f) const {
  std::vector<std::string> out;
  for (const auto& id : shuffled_) {
    if (assignments.at(id) == f) out.push_back(id);
  }
  return out;
}

FoldPlan kfold_split(const std::vector<std::string>& patient_ids, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold_split: k must be at least 2");
  if (static_cast<std::size_t>(k) > patient_ids.size()) {
    throw DataError("kfold_split: k = " + std::to_string(k) + " exceeds the number of patients (" +
                    std::to_string(patient_ids.size()) + ")");
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.shuffled_ = patient_ids;
  std::mt19937_64 rng(seed);
  std::shuffle(plan.shuffled_.begin(), plan.shuffled_.end(), rng);
  for (std::size_t i = 0; i < plan.shuffled_.size(); ++i) {
    if (!plan.assignments.emplace(plan.shuffled_[i], static_cast<int>(i % static_cast<std::size_t>(k))).second) {
      throw DataError("kfold_split: duplicate patient id " + plan.shuffled_[i]);
    }
  }
  return plan;
}

double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size()) throw DataError("mae: length mismatch");
  if (pred.size() == 0) throw DataError("mae: empty input");
  return (pred - truth).cwiseAbs().mean();
}

ClassificationMetrics metrics_from_confusion(const Confusion& c) {
  ClassificationMetrics m;
  m.confusion = c;
  const auto ratio = [](long num, long den, bool& undefined) {
    if (den == 0) {
      undefined = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(c.tp, c.tp + c.fp, m.precision_undefined);
  m.recall = ratio(c.tp, c.tp + c.fn, m.recall_undefined);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, m.f1_undefined);
  m.accuracy = ratio(c.tp + c.tn, c.total(), m.accuracy_undefined);
  return m;
}

ClassificationMetrics classification_metrics(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw DataError("classification_metrics: length mismatch");
  const auto positive = [](int v) {
    if (v == 1) return true;
    if (v == 0 || v == -1) return false;
    throw DataError("classification_metrics: labels must be 1, 0 or -1");
  };
  Confusion c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = positive(predicted[i]);
    const bool t = positive(truth[i]);
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return metrics_from_confusion(c);
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) {
    s.sd_undefined = true;
    return s;
  }
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) {
    s.sd_undefined = true;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return s;
}

namespace {

std::vector<std::string> unique_in_order(const std::vector<std::string>& ids) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (seen.insert(id).second) out.push_back(id);
  }
  return out;
}

}  // namespace

CvReport run_cv(const SupervisedSet& set, const CvOptions& options) {
  using forecast::ModelKind;
  if (set.rows() == 0) throw DataError("run_cv: no supervised rows");
  const std::vector<std::string> patients = unique_in_order(set.patient_of_row);

  CvReport report;
  report.k = options.folds;
  report.plan = kfold_split(patients, options.folds, options.seed);

  std::map<std::string, std::vector<Eigen::Index>> rows_of;
  for (Eigen::Index i = 0; i < set.rows(); ++i) rows_of[set.patient_of_row[static_cast<std::size_t>(i)]].push_back(i);
  for (auto& [id, rows] : rows_of) {
    std::stable_sort(rows.begin(), rows.end(), [&](Eigen::Index a, Eigen::Index b) {
      return set.anchor_month[static_cast<std::size_t>(a)] < set.anchor_month[static_cast<std::size_t>(b)];
    });
  }

  SupervisedSet global;
  const bool per_fold = options.normalize_per_fold && !set.norm_params;
  if (!per_fold) {
    if (set.norm_params) {
      global = set;
    } else {
      std::vector<Eigen::Index> all(static_cast<std::size_t>(set.rows()));
      std::iota(all.begin(), all.end(), 0);
      global = normalize_supervised(set, all);
    }
  }

  for (int f = 0; f < options.folds; ++f) {
    std::vector<Eigen::Index> train_rows;
    for (Eigen::Index i = 0; i < set.rows(); ++i) {
      if (report.plan.fold_of(set.patient_of_row[static_cast<std::size_t>(i)]) != f) train_rows.push_back(i);
    }
    if (train_rows.empty()) throw DataError("run_cv: fold " + std::to_string(f) + " leaves no training rows");
    const SupervisedSet data = per_fold ? normalize_supervised(set, train_rows) : global;
    const forecast::SourceModel source = forecast::train_source(data.subset(train_rows), options.gp);
    const forecast::SourcePredictor sgp(source);

    std::array<double, 3> abs_sum{};
    std::array<std::array<double, 4>, 3> horizon_sum{};
    std::size_t n_rows = 0;
    for (const auto& pid : patients) {
      if (report.plan.fold_of(pid) != f) continue;
      const auto& rows = rows_of.at(pid);
      const auto m = static_cast<Eigen::Index>(rows.size());
      Eigen::MatrixXd Xp(m, data.X.cols());
      Eigen::MatrixXd Yp(m, 4);
      std::vector<int> anchors;
      for (Eigen::Index r = 0; r < m; ++r) {
        Xp.row(r) = data.X.row(rows[static_cast<std::size_t>(r)]);
        Yp.row(r) = data.y.row(rows[static_cast<std::size_t>(r)]);
        anchors.push_back(data.anchor_month[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])]);
      }
      for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::VectorXd x = Xp.row(r).transpose();
        const int anchor = anchors[static_cast<std::size_t>(r)];
        const auto history = forecast::causal_history(Xp, Yp, anchors, anchor);

        std::array<forecast::HorizonForecast, 3> fc;
        fc[0] = forecast::forecast(sgp, x, anchor, pid);
        fc[1] = forecast::forecast(forecast::personalize(source, history), x, anchor, pid);
        const bool has_target = std::any_of(history.begin(), history.end(), [](const forecast::HistoryRow& h) {
          return std::any_of(h.y.begin(), h.y.end(), [](const auto& v) { return v.has_value(); });
        });
        if (has_target) {
          fc[2] = forecast::forecast(forecast::train_target(history, source), x, anchor, pid, &sgp);
        } else {
          fc[2] = fc[0];
          fc[2].kind = ModelKind::tGP;
          fc[2].fallback.fill(true);
        }

        std::array<double, 4> truth{};
        for (std::size_t h = 0; h < 4; ++h) truth[h] = Yp(r, static_cast<Eigen::Index>(h));
        for (std::size_t k = 0; k < 3; ++k) {
          for (std::size_t h = 0; h < 4; ++h) {
            const double err = std::abs(fc[k].mean[h] - truth[h]);
            abs_sum[k] += err;
            horizon_sum[k][h] += err;
          }
          report.forecasts.push_back({f, fc[k], truth});
        }
        ++n_rows;
      }
    }
    if (n_rows == 0) throw DataError("run_cv: fold " + std::to_string(f) + " has no test rows");
    for (std::size_t k = 0; k < 3; ++k) {
      report.fold_mae[k].push_back(abs_sum[k] / (4.0 * static_cast<double>(n_rows)));
      std::array<double, 4> per_h{};
      for (std::size_t h = 0; h < 4; ++h) per_h[h] = horizon_sum[k][h] / static_cast<double>(n_rows);
      report.fold_horizon_mae[k].push_back(per_h);
    }
  }

  for (std::size_t k = 0; k < 3; ++k) {
    report.summary[k] = summarize(report.fold_mae[k]);
    std::array<double, 4> sum{};
    std::size_t count = 0;
    for (const auto& row : report.forecasts) {
      if (row.forecast.kind != kModelKinds[k]) continue;
      for (std::size_t h = 0; h < 4; ++h) sum[h] += std::abs(row.forecast.mean[h] - row.truth[h]);
      ++count;
    }
    for (std::size_t h = 0; h < 4; ++h) report.horizon_mae[k][h] = sum[h] / static_cast<double>(count);
  }
  return report;
}

ConversionReport run_conversion(const std::vector<survival::PatientScores>& scores,
                                const std::map<std::string, ConversionLabel>& labels,
                                const ConversionOptions& options) {
  std::vector<std::string> ids;
  for (const auto& s : scores) ids.push_back(s.patient_id);
  // Checks coverage and builds every patient's record once.
  const auto records = survival::build_survival_records(scores, labels, options.mode);
  const FoldPlan plan = kfold_split(ids, options.folds, options.seed);

  ConversionReport report;
  report.rows.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    report.rows[i].patient_id = ids[i];
    report.rows[i].fold = plan.fold_of(ids[i]);
    report.rows[i].truth = records[i].event;
  }

  const auto features = [](const std::array<double, 4>& p) { return Eigen::Vector4d(p[0], p[1], p[2], p[3]); };
  for (int f = 0; f < options.folds; ++f) {
    std::vector<survival::SurvivalRecord> train;
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (report.rows[i].fold != f) {
        train.push_back(records[i]);
        train_idx.push_back(i);
      }
    }
    const survival::CoxModel cox = survival::cox_fit(train);
    report.fold_beta.push_back(cox.beta);

    Eigen::MatrixXd X(static_cast<Eigen::Index>(train.size()), 4);
    std::vector<int> y;
    for (std::size_t j = 0; j < train.size(); ++j) {
      X.row(static_cast<Eigen::Index>(j)) =
          features(survival::conversion_probabilities(cox, train[j].z, options.normalize_probabilities)).transpose();
      y.push_back(train[j].event ? 1 : -1);
    }
    const classify::LinearClassifier svm = classify::svm_train(X, y, options.svm);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (report.rows[i].fold != f) continue;
      auto& row = report.rows[i];
      row.probabilities = survival::conversion_probabilities(cox, records[i].z, options.normalize_probabilities);
      row.decision = classify::svm_predict(svm, features(row.probabilities));
    }
  }

  std::vector<int> predicted, truth;
  for (const auto& row : report.rows) {
    predicted.push_back(row.decision.label);
    truth.push_back(row.truth ? 1 : 0);
  }
  report.metrics = classification_metrics(predicted, truth);
  return report;
}

}  // namespace adprog::eval
