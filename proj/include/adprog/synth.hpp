#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adprog/cohort.hpp"
#include "adprog/survival.hpp"

namespace adprog::synth {

/// Per-patient linear score trajectories with features that are a fixed
/// linear map of the latent state. Group order everywhere is CN, MCI, AD.
struct CohortSpec {
  int n_patients = 200;
  std::vector<int> months = {0, 6, 12, 18, 24};
  std::array<double, 3> proportions = {0.3, 0.5, 0.2};
  std::array<double, 3> score_mean = {8.780, 15.735, 33.010};
  std::array<double, 3> score_sd = {4.4512, 7.5023, 11.7477};
  /// Score points per month; slopes are truncated at zero and capped so the
  /// latent score stays within [0, 85] over the schedule.
  std::array<double, 3> slope_mean = {0.02, 0.12, 0.35};
  std::array<double, 3> slope_sd = {0.01, 0.05, 0.10};
  /// Per-patient additive score offset that the features do not reveal.
  double offset_sd = 0.0;
  double score_noise_sd = 0.0;

  int feature_dim = 12;
  double feature_noise_sd = 0.0;
  /// Per-patient constant added to every feature vector of that patient.
  double signature_sd = 0.0;
  double missing_rate = 0.0;

  /// CN becomes MCI once the latent score reaches this level.
  double mci_threshold = 13.0;
  /// MCI -> AD hazard per month: rate * exp(gamma * (latent - threshold)).
  double conversion_threshold = 24.0;
  double conversion_rate = 0.02;
  double conversion_gamma = 0.5;

  /// Injected defects, each affecting distinct extra patients: too few visits,
  /// a missing required month, and almost entirely masked features.
  int under_visit = 0;
  int missing_month = 0;
  int sparse = 0;

  std::uint64_t seed = 0;

  /// Throws ConfigError describing the first invalid field.
  void validate() const;
};

struct PatientTruth {
  std::string patient_id;
  ClinicalStatus group = ClinicalStatus::CN;
  double baseline = 0.0;  // latent score at month 0
  double slope = 0.0;
  double offset = 0.0;
  /// Month of the first AD visit, -1 when the patient never converts.
  int conversion_month = -1;
  std::string defect;  // empty, "under_visit", "missing_month" or "sparse"
};

struct GeneratedCohort {
  Cohort cohort;
  CohortSchema schema;
  std::vector<PatientTruth> truth;
  Eigen::MatrixXd feature_map;  // D x 2
};

GeneratedCohort generate_cohort(const CohortSpec& spec);

/// Writes cohort.csv, schema.json and truth.csv into `dir`.
void write_generated(const GeneratedCohort& g, const std::filesystem::path& dir);
std::string truth_csv(const std::vector<PatientTruth>& truth);

/// Standard-normal covariates, exponential event times with rate
/// baseline_rate * exp(z' beta), rounded up to the next of 6/12/18/24 months
/// and administratively censored at 24. Each subject is independently
/// censored with probability `censor_rate` at a uniform time in (0, 24].
std::vector<survival::SurvivalRecord> generate_survival_data(const Eigen::VectorXd& beta_true, int n,
                                                             double censor_rate, std::uint64_t seed,
                                                             double baseline_rate = 0.005);

}  // namespace adprog::synth
