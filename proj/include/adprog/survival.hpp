#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adprog/cohort.hpp"

namespace adprog::survival {

struct SurvivalRecord {
  Eigen::VectorXd z;
  double time = 0.0;  // event or censoring month
  bool event = false;
};

struct PartialLikelihood {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

/// Breslow-tied log partial likelihood with risk sets {j : time_j >= t}.
/// Throws DataError when there are no events.
PartialLikelihood log_partial_likelihood(const Eigen::VectorXd& beta, const std::vector<SurvivalRecord>& records);

/// Cumulative baseline hazard as a right-continuous step function.
struct BaselineHazard {
  std::vector<double> times;       // distinct event times, increasing
  std::vector<double> cumulative;  // H0 at each knot

  double operator()(double t) const;
};

BaselineHazard breslow_baseline(const Eigen::VectorXd& beta, const std::vector<SurvivalRecord>& records);

struct CoxFitReport {
  int iterations = 0;
  double gradient_norm = 0.0;  // infinity norm at the returned beta
  double initial_log_likelihood = 0.0;
  double log_likelihood = 0.0;
  /// Number of identifiable coefficient directions (p unless covariates are collinear).
  int rank = 0;
};

struct CoxModel {
  Eigen::VectorXd beta;
  BaselineHazard baseline;
  CoxFitReport report;
};

struct CoxOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
  /// ||beta|| beyond this is treated as divergence (no finite maximizer).
  double divergence_norm = 50.0;
  /// Information-matrix eigen-directions at beta = 0 below this fraction of
  /// the largest eigenvalue are treated as collinear and left at zero.
  double collinearity_tolerance = 1e-7;
};

/// Newton-Raphson from beta = 0 with step halving. Throws DataError naming a
/// covariate that is constant over all records and NumericalError("monotone
/// likelihood") when the coefficients run away.
CoxModel cox_fit(const std::vector<SurvivalRecord>& records, const CoxOptions& options = {});

inline constexpr std::array<double, 4> kWindowMonths = {6.0, 12.0, 18.0, 24.0};

/// P_w = 1 - exp(-H0(t_w) exp(z' beta)). With `normalize` the four values are
/// rescaled to sum to one (left at zero when they are all zero).
std::array<double, 4> conversion_probabilities(const CoxModel& model, const Eigen::VectorXd& z,
                                               bool normalize = false);

enum class CovariateMode { Levels, FirstDifferences };

std::string_view to_string(CovariateMode mode);
CovariateMode parse_covariate_mode(std::string_view name);

struct PatientScores {
  std::string patient_id;
  std::array<double, 4> scores{};  // forecasts at months 6, 12, 18, 24
  double baseline = 0.0;           // observed score at month 0
};

/// Converters get time = 6 * first_window with an event; everyone else is
/// censored at 24. Levels mode uses the four scores; first-differences mode
/// uses (s6 - baseline, s12 - s6, s18 - s12, s24 - s18).
std::vector<SurvivalRecord> build_survival_records(const std::vector<PatientScores>& forecasts,
                                                   const std::map<std::string, ConversionLabel>& labels,
                                                   CovariateMode mode = CovariateMode::Levels);

}  // namespace adprog::survival
