#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "adprog/cohort.hpp"
#include "adprog/config.hpp"
#include "adprog/eval.hpp"
#include "adprog/preprocess.hpp"
#include "adprog/survival.hpp"

namespace adprog::cli {

struct WaterfallStage {
  std::string stage;
  std::size_t before = 0;
  std::size_t after = 0;
  std::size_t dropped() const { return before - after; }
};

struct PreprocessOutcome {
  Cohort cohort;  // filtered, filled and feature-selected; not standardized
  std::vector<WaterfallStage> waterfall;
  std::vector<std::pair<std::string, Removal>> removed;  // (stage, removal)
  std::vector<std::pair<std::string, std::string>> fully_missing;
  std::optional<FeatureSelection> selection;
  SupervisedSet supervised;  // raw features
};

/// min-visits -> required-months -> missingness -> fill -> select -> build.
/// Standardization happens later, per fold or globally.
PreprocessOutcome run_preprocess(const Cohort& cohort, const config::PreprocessConfig& config);

std::string waterfall_csv(const std::vector<WaterfallStage>& stages);

/// Cross-validation settings of a run (folds, seed, GP options, normalization scope).
eval::CvOptions cv_options(const config::RunConfig& config);

struct ConversionInputs {
  std::vector<survival::PatientScores> scores;
  std::map<std::string, ConversionLabel> labels;
  /// Patients left out, with the reason.
  std::vector<std::pair<std::string, std::string>> skipped;
};

/// Month-0 ensemble forecasts (mean of sGP, pGP and tGP) from a CV run paired
/// with the patients' conversion labels. Baseline-AD patients are skipped.
ConversionInputs conversion_inputs(const Cohort& cohort, const eval::CvReport& cv, int month_tolerance = 0);

Cohort load_input(const config::RunConfig& config);

int cmd_synth(const config::RunConfig& config, std::ostream& out);
int cmd_ingest(const config::RunConfig& config, std::ostream& out);
int cmd_preprocess(const config::RunConfig& config, std::ostream& out);
int cmd_stats(const config::RunConfig& config, std::ostream& out);
int cmd_cluster(const config::RunConfig& config, std::ostream& out);
int cmd_cv(const config::RunConfig& config, std::ostream& out);
int cmd_convert(const config::RunConfig& config, std::ostream& out);
int cmd_pipeline(const config::RunConfig& config, std::ostream& out);

/// Full command line (without the program name). Returns the exit code:
/// 0 success, 1 runtime failure, 2 configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace adprog::cli
