#include "adprog/survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "adprog/error.hpp"

namespace adprog::survival {
namespace {

void check_records(const std::vector<SurvivalRecord>& records) {
  if (records.empty()) throw DataError("survival: no records");
  const Eigen::Index p = records.front().z.size();
  for (const auto& r : records) {
    if (r.z.size() != p) throw DataError("survival: covariate vectors differ in length");
    if (!r.z.allFinite()) throw DataError("survival: non-finite covariate");
    if (!(r.time > 0.0) || !std::isfinite(r.time)) throw DataError("survival: times must be positive");
  }
  if (std::none_of(records.begin(), records.end(), [](const SurvivalRecord& r) { return r.event; })) {
    throw DataError("survival: no events");
  }
}

// Record indices by decreasing time, so that a running sum over the prefix
// ending at a time block is the risk set of that time.
std::vector<std::size_t> by_decreasing_time(const std::vector<SurvivalRecord>& records) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].time > records[b].time; });
  return order;
}

// Calls fn(t, d, S0, S1, S2, event z sum, event eta sum, shift) once per
// distinct event time. The risk sums use exp(eta - shift) to avoid overflow.
template <typename Fn>
void for_each_event_time(const Eigen::VectorXd& beta, const std::vector<SurvivalRecord>& records, bool second_order,
                         Fn&& fn) {
  const Eigen::Index p = beta.size();
  const auto order = by_decreasing_time(records);
  double shift = -std::numeric_limits<double>::infinity();
  for (const auto& r : records) shift = std::max(shift, r.z.dot(beta));

  double S0 = 0.0;
  Eigen::VectorXd S1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd S2 = Eigen::MatrixXd::Zero(second_order ? p : 0, second_order ? p : 0);
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = records[order[i]].time;
    int d = 0;
    Eigen::VectorXd zsum = Eigen::VectorXd::Zero(p);
    double eta_sum = 0.0;
    for (; i < order.size() && records[order[i]].time == t; ++i) {
      const auto& r = records[order[i]];
      const double eta = r.z.dot(beta);
      const double w = std::exp(eta - shift);
      S0 += w;
      S1.noalias() += w * r.z;
      if (second_order) S2.noalias() += w * r.z * r.z.transpose();
      if (r.event) {
        ++d;
        zsum += r.z;
        eta_sum += eta;
      }
    }
    if (d > 0) fn(t, d, S0, S1, S2, zsum, eta_sum, shift);
  }
}

}  // namespace

PartialLikelihood log_partial_likelihood(const Eigen::VectorXd& beta, const std::vector<SurvivalRecord>& records) {
  check_records(records);
  if (beta.size() != records.front().z.size()) throw DataError("log_partial_likelihood: beta has wrong length");
  const Eigen::Index p = beta.size();
  PartialLikelihood out;
  out.gradient = Eigen::VectorXd::Zero(p);
  out.hessian = Eigen::MatrixXd::Zero(p, p);
  for_each_event_time(beta, records, true,
                      [&](double, int d, double S0, const Eigen::VectorXd& S1, const Eigen::MatrixXd& S2,
                          const Eigen::VectorXd& zsum, double eta_sum, double shift) {
                        const Eigen::VectorXd mean = S1 / S0;
                        out.value += eta_sum - d * (std::log(S0) + shift);
                        out.gradient += zsum - d * mean;
                        out.hessian -= d * (S2 / S0 - mean * mean.transpose());
                      });
  return out;
}

double BaselineHazard::operator()(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0.0;
  return cumulative[static_cast<std::size_t>(it - times.begin()) - 1];
}

BaselineHazard breslow_baseline(const Eigen::VectorXd& beta, const std::vector<SurvivalRecord>& records) {
  check_records(records);
  std::vector<std::pair<double, double>> increments;  // (time, d / risk sum), decreasing time
  for_each_event_time(beta, records, false,
                      [&](double t, int d, double S0, const Eigen::VectorXd&, const Eigen::MatrixXd&,
                          const Eigen::VectorXd&, double, double shift) {
                        increments.emplace_back(t, d / (S0 * std::exp(shift)));
                      });
  std::reverse(increments.begin(), increments.end());
  BaselineHazard h;
  double acc = 0.0;
  for (const auto& [t, inc] : increments) {
    acc += inc;
    h.times.push_back(t);
    h.cumulative.push_back(acc);
  }
  return h;
}

CoxModel cox_fit(const std::vector<SurvivalRecord>& records, const CoxOptions& options) {
  check_records(records);
  const Eigen::Index p = records.front().z.size();
  for (Eigen::Index j = 0; j < p; ++j) {
    const double first = records.front().z[j];
    if (std::all_of(records.begin(), records.end(), [&](const SurvivalRecord& r) { return r.z[j] == first; })) {
      throw DataError("cox_fit: covariate z" + std::to_string(j + 1) + " is constant across all records");
    }
  }

  CoxModel model;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  PartialLikelihood cur = log_partial_likelihood(beta, records);
  model.report.initial_log_likelihood = cur.value;
  const Eigen::MatrixXd initial_hessian = cur.hessian;

  // Directions along which the covariates are (numerically) collinear carry
  // no information at any beta; the fit stays in the identifiable subspace.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> info(-initial_hessian);
  const double top = info.eigenvalues().cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> kept;
  for (Eigen::Index k = 0; k < p; ++k) {
    if (info.eigenvalues()[k] > options.collinearity_tolerance * top) kept.push_back(k);
  }
  model.report.rank = static_cast<int>(kept.size());
  Eigen::MatrixXd B(p, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) B.col(static_cast<Eigen::Index>(k)) = info.eigenvectors().col(kept[k]);

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Eigen::VectorXd g = B.transpose() * cur.gradient;
    if (B.cols() == 0 || g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) break;
    // Newton direction on the concave objective; the ridge fallback keeps it
    // an ascent direction when the reduced Hessian is nearly singular.
    Eigen::MatrixXd negH = -(B.transpose() * cur.hessian * B);
    Eigen::VectorXd step = negH.ldlt().solve(g);
    if (!step.allFinite() || step.dot(g) <= 0.0) {
      negH.diagonal().array() += 1e-8 + 1e-6 * negH.diagonal().cwiseAbs().maxCoeff();
      step = negH.ldlt().solve(g);
    }
    step = B * step;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving) {
      const Eigen::VectorXd trial = beta + step;
      PartialLikelihood next = log_partial_likelihood(trial, records);
      if (std::isfinite(next.value) && next.value >= cur.value) {
        beta = trial;
        cur = std::move(next);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (beta.norm() > options.divergence_norm) {
      throw NumericalError("cox_fit: monotone likelihood (coefficients diverge, ||beta|| > " +
                           std::to_string(options.divergence_norm) + ")");
    }
    if (!accepted) break;
  }
  // Separated data can also stall with a vanishing gradient: the likelihood
  // flattens toward its supremum, so curvature along beta collapses.
  if (beta.norm() > 0.0) {
    const Eigen::VectorXd d = beta.normalized();
    const double c0 = -d.dot(initial_hessian * d);
    const double c = -d.dot(cur.hessian * d);
    if (c0 > 0.0 && c < 1e-6 * c0) {
      throw NumericalError("cox_fit: monotone likelihood (curvature vanishes along beta, ||beta|| = " +
                           std::to_string(beta.norm()) + ")");
    }
  }
  model.beta = beta;
  model.report.iterations = it;
  model.report.gradient_norm = cur.gradient.lpNorm<Eigen::Infinity>();
  model.report.log_likelihood = cur.value;
  model.baseline = breslow_baseline(beta, records);
  return model;
}

std::array<double, 4> conversion_probabilities(const CoxModel& model, const Eigen::VectorXd& z, bool normalize) {
  if (z.size() != model.beta.size()) throw DataError("conversion_probabilities: covariate length mismatch");
  const double risk = std::exp(z.dot(model.beta));
  std::array<double, 4> p{};
  for (std::size_t w = 0; w < 4; ++w) p[w] = -std::expm1(-model.baseline(kWindowMonths[w]) * risk);
  if (normalize) {
    const double total = p[0] + p[1] + p[2] + p[3];
    if (total > 0.0) {
      for (double& v : p) v /= total;
    }
  }
  return p;
}

std::string_view to_string(CovariateMode mode) {
  return mode == CovariateMode::Levels ? "levels" : "first_differences";
}

CovariateMode parse_covariate_mode(std::string_view name) {
  if (name == "levels") return CovariateMode::Levels;
  if (name == "first_differences") return CovariateMode::FirstDifferences;
  throw ConfigError("unknown covariate mode '" + std::string(name) + "' (expected levels or first_differences)");
}

std::vector<SurvivalRecord> build_survival_records(const std::vector<PatientScores>& forecasts,
                                                   const std::map<std::string, ConversionLabel>& labels,
                                                   CovariateMode mode) {
  if (forecasts.size() != labels.size()) {
    throw DataError("build_survival_records: " + std::to_string(forecasts.size()) + " forecasts but " +
                    std::to_string(labels.size()) + " labels");
  }
  std::vector<SurvivalRecord> out;
  out.reserve(forecasts.size());
  for (const auto& f : forecasts) {
    const auto it = labels.find(f.patient_id);
    if (it == labels.end()) throw DataError("build_survival_records: no label for patient " + f.patient_id);
    const ConversionLabel& label = it->second;
    if (label.baseline_excluded) {
      throw DataError("build_survival_records: patient " + f.patient_id + " is AD at baseline");
    }
    SurvivalRecord r;
    r.z.resize(4);
    if (mode == CovariateMode::Levels) {
      for (Eigen::Index w = 0; w < 4; ++w) r.z[w] = f.scores[static_cast<std::size_t>(w)];
    } else {
      double prev = f.baseline;
      for (Eigen::Index w = 0; w < 4; ++w) {
        r.z[w] = f.scores[static_cast<std::size_t>(w)] - prev;
        prev = f.scores[static_cast<std::size_t>(w)];
      }
    }
    if (label.converted && label.first_window) {
      r.time = 6.0 * *label.first_window;
      r.event = true;
    } else {
      r.time = 24.0;
      r.event = false;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace adprog::survival
