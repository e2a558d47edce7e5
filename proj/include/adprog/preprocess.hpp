#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adprog/cohort.hpp"

namespace adprog {

struct Removal {
  std::string patient_id;
  std::string reason;
};

struct FilterResult {
  Cohort cohort;
  std::vector<Removal> removed;
};

FilterResult filter_min_visits(const Cohort& cohort, int min_visits = 4);
FilterResult filter_required_months(const Cohort& cohort, const std::vector<int>& required = {0, 6, 12, 18, 24},
                                    int tolerance = 0);
/// Removes patients whose fraction of masked feature cells over all their
/// visits exceeds `max_missing_fraction`.
FilterResult filter_missingness(const Cohort& cohort, double max_missing_fraction = 0.90);

struct FillResult {
  Cohort cohort;
  /// (patient_id, column name) pairs masked across every visit of the patient.
  std::vector<std::pair<std::string, std::string>> fully_missing;
};

/// Per patient and column: carry the last observed value forward; leading
/// gaps take the first later observation. ADAS-Cog13 and clinical status are
/// filled the same way.
FillResult forward_fill(const Cohort& cohort);

/// Retained groups and per-group column name patterns. Patterns are exact
/// names or globs using '*' and '?'.
struct FeatureSelectionConfig {
  std::map<FeatureGroup, std::vector<std::string>> groups;
};

struct FeatureSelection {
  Cohort cohort;
  /// Columns matched by the configuration, including the label column when
  /// the configuration lists it.
  std::size_t selected_columns = 0;
  /// Columns kept as model inputs (`selected_columns` minus the label).
  std::size_t input_columns = 0;
  std::map<FeatureGroup, std::size_t> per_group;
};

FeatureSelection select_features(const Cohort& cohort, const FeatureSelectionConfig& config);

bool glob_match(std::string_view pattern, std::string_view text);

/// Column-wise standardization learned on a subset of rows.
struct NormParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  std::vector<bool> constant;  // sd == 0 (or no finite value) over the fit rows

  /// Standardizes `X`; constant columns and non-finite cells map to 0.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
};

/// Fits mean and sample standard deviation over `fit_rows`, ignoring NaN cells.
NormParams fit_normalization(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& fit_rows);

struct Normalized {
  Eigen::MatrixXd X;
  NormParams params;
};

Normalized z_normalize(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& fit_rows);

inline constexpr std::array<int, 4> kHorizons = {6, 12, 18, 24};

/// One row per (patient, anchor visit t) with ADAS-Cog13 present at
/// t+6, t+12, t+18 and t+24. X holds the raw (unnormalized) features at t;
/// NaN marks cells still missing after filling.
struct SupervisedSet {
  Eigen::MatrixXd X;
  Eigen::MatrixXd y;  // N x 4
  std::vector<std::string> patient_of_row;
  std::vector<int> anchor_month;
  std::vector<std::string> feature_names;
  /// Set once the rows have been standardized.
  std::optional<NormParams> norm_params;
  /// Patients that contributed no rows.
  std::vector<std::string> no_rows;

  Eigen::Index rows() const { return X.rows(); }
  SupervisedSet subset(const std::vector<Eigen::Index>& rows) const;
};

SupervisedSet build_supervised(const Cohort& cohort, int tolerance = 0);

/// Standardizes with statistics from `fit_rows` and imputes remaining
/// missing cells with 0 (the fit mean).
SupervisedSet normalize_supervised(const SupervisedSet& set, const std::vector<Eigen::Index>& fit_rows);

}  // namespace adprog
