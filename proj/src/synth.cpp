#include "adprog/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "adprog/csv.hpp"
#include "adprog/error.hpp"

namespace adprog::synth {
namespace {

constexpr std::array<FeatureGroup, 6> kGroupCycle = {FeatureGroup::Cognitive, FeatureGroup::MRI,
                                                     FeatureGroup::DTI,       FeatureGroup::CSF,
                                                     FeatureGroup::Genetics,  FeatureGroup::Demographics};

double truncated_normal(std::mt19937_64& rng, double mean, double sd, double lo, double hi) {
  if (sd == 0.0) return std::clamp(mean, lo, hi);
  std::normal_distribution<double> dist(mean, sd);
  for (int i = 0; i < 10000; ++i) {
    const double v = dist(rng);
    if (v >= lo && v <= hi) return v;
  }
  return std::clamp(mean, lo, hi);
}

std::string patient_name(int i) {
  std::ostringstream os;
  os << 'P';
  os.width(4);
  os.fill('0');
  os << i + 1;
  return os.str();
}

}  // namespace

void CohortSpec::validate() const {
  if (n_patients < 0) throw ConfigError("synth: n_patients must be non-negative");
  if (n_patients + under_visit + missing_month + sparse < 1) throw ConfigError("synth: no patients requested");
  if (months.empty()) throw ConfigError("synth: empty visit schedule");
  for (std::size_t i = 0; i < months.size(); ++i) {
    if (months[i] < 0 || (i > 0 && months[i] <= months[i - 1])) {
      throw ConfigError("synth: visit months must be non-negative and strictly increasing");
    }
  }
  double total = 0.0;
  for (double p : proportions) {
    if (p < 0.0) throw ConfigError("synth: group proportions must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("synth: group proportions must sum to 1");
  for (std::size_t g = 0; g < 3; ++g) {
    if (score_sd[g] < 0.0 || slope_sd[g] < 0.0) throw ConfigError("synth: standard deviations must be >= 0");
  }
  if (offset_sd < 0.0 || score_noise_sd < 0.0 || feature_noise_sd < 0.0 || signature_sd < 0.0) {
    throw ConfigError("synth: standard deviations must be >= 0");
  }
  if (feature_dim < 1) throw ConfigError("synth: feature_dim must be >= 1");
  if (missing_rate < 0.0 || missing_rate > 1.0) throw ConfigError("synth: missing_rate must lie in [0, 1]");
  if (conversion_rate < 0.0) throw ConfigError("synth: conversion_rate must be >= 0");
  if (under_visit < 0 || missing_month < 0 || sparse < 0) throw ConfigError("synth: defect counts must be >= 0");
  if (under_visit > 0 && months.size() < 4) throw ConfigError("synth: under_visit needs a schedule of >= 4 visits");
  if (missing_month > 0 && std::find(months.begin(), months.end(), 12) == months.end()) {
    throw ConfigError("synth: missing_month needs month 12 in the schedule");
  }
}

GeneratedCohort generate_cohort(const CohortSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::mt19937_64 mask_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> stdn(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  GeneratedCohort g;
  const int D = spec.feature_dim;
  g.feature_map.resize(D, 2);
  for (int i = 0; i < D; ++i) {
    for (int j = 0; j < 2; ++j) g.feature_map(i, j) = stdn(rng);
  }
  for (int i = 0; i < D; ++i) {
    const FeatureGroup group = kGroupCycle[static_cast<std::size_t>(i) % kGroupCycle.size()];
    std::string name(to_string(group));
    name += "_" + std::to_string(i + 1);
    g.cohort.feature_names.push_back(name);
    g.cohort.feature_groups.push_back(group);
    g.schema.features.emplace_back(name, group);
  }
  g.cohort.adas_column = g.schema.adas_column;

  const int last_month = spec.months.back();
  const int total = spec.n_patients + spec.under_visit + spec.missing_month + spec.sparse;
  for (int i = 0; i < total; ++i) {
    PatientTruth truth;
    truth.patient_id = patient_name(i);
    if (i >= spec.n_patients) {
      const int k = i - spec.n_patients;
      truth.defect = k < spec.under_visit ? "under_visit"
                     : k < spec.under_visit + spec.missing_month ? "missing_month"
                                                                 : "sparse";
    }

    const double u = unif(rng);
    const std::size_t grp = u < spec.proportions[0] ? 0 : u < spec.proportions[0] + spec.proportions[1] ? 1 : 2;
    truth.group = static_cast<ClinicalStatus>(grp + 1);
    truth.baseline = truncated_normal(rng, spec.score_mean[grp], spec.score_sd[grp], 0.0, 85.0);
    double slope = std::max(0.0, spec.slope_mean[grp] + spec.slope_sd[grp] * stdn(rng));
    if (last_month > 0) slope = std::min(slope, (85.0 - truth.baseline) / last_month);
    truth.slope = slope;
    truth.offset = spec.offset_sd * stdn(rng);
    Eigen::VectorXd signature(D);
    for (int j = 0; j < D; ++j) signature[j] = spec.signature_sd * stdn(rng);

    Patient patient;
    patient.id = truth.patient_id;
    ClinicalStatus status = truth.group;
    int prev_month = spec.months.front();
    for (std::size_t v = 0; v < spec.months.size(); ++v) {
      const int month = spec.months[v];
      const double latent = truth.baseline + slope * month;
      const double score_noise = stdn(rng);
      const double draw = unif(rng);
      if (v > 0) {
        if (status == ClinicalStatus::CN && latent >= spec.mci_threshold) {
          status = ClinicalStatus::MCI;
        } else if (status == ClinicalStatus::MCI) {
          const double rate =
              spec.conversion_rate * std::exp(spec.conversion_gamma * (latent - spec.conversion_threshold));
          if (draw < -std::expm1(-(month - prev_month) * rate)) {
            status = ClinicalStatus::AD;
            truth.conversion_month = month;
          }
        }
      }
      prev_month = month;

      VisitRecord rec;
      rec.month = month;
      rec.cs = status;
      rec.adas13 = std::clamp(latent + truth.offset + spec.score_noise_sd * score_noise, 0.0, 85.0);
      const Eigen::Vector2d state((latent - 20.0) / 10.0, (slope - 0.1) / 0.1);
      rec.features = g.feature_map * state + signature;
      rec.missing.assign(static_cast<std::size_t>(D), false);
      for (int j = 0; j < D; ++j) {
        rec.features[j] += spec.feature_noise_sd * stdn(rng);
        const bool masked = truth.defect == "sparse" || unif(mask_rng) < spec.missing_rate;
        if (masked) {
          rec.missing[static_cast<std::size_t>(j)] = true;
          rec.features[j] = std::numeric_limits<double>::quiet_NaN();
        }
      }

      if (truth.defect == "under_visit" && v >= 3) continue;
      if (truth.defect == "missing_month" && month == 12) continue;
      patient.visits.push_back(std::move(rec));
    }
    g.cohort.patients.push_back(std::move(patient));
    g.truth.push_back(std::move(truth));
  }
  return g;
}

std::string truth_csv(const std::vector<PatientTruth>& truth) {
  std::string out = "patient_id,group,baseline,slope,offset,conversion_month,defect\n";
  for (const auto& t : truth) {
    out += csv::join_line({t.patient_id, std::string(to_string(t.group)), csv::format_number(t.baseline),
                           csv::format_number(t.slope), csv::format_number(t.offset),
                           std::to_string(t.conversion_month), t.defect});
    out += '\n';
  }
  return out;
}

void write_generated(const GeneratedCohort& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_cohort(g.cohort, g.schema, dir / "cohort.csv");
  save_schema(g.schema, dir / "schema.json");
  std::ofstream out(dir / "truth.csv", std::ios::binary);
  if (!out) throw Error("cannot write " + (dir / "truth.csv").string());
  out << truth_csv(g.truth);
}

std::vector<survival::SurvivalRecord> generate_survival_data(const Eigen::VectorXd& beta_true, int n,
                                                             double censor_rate, std::uint64_t seed,
                                                             double baseline_rate) {
  if (n < 10) throw ConfigError("generate_survival_data: n must be at least 10");
  if (!(censor_rate >= 0.0 && censor_rate < 1.0)) {
    throw ConfigError("generate_survival_data: censor_rate must lie in [0, 1); 1 leaves no events");
  }
  if (!(baseline_rate > 0.0)) throw ConfigError("generate_survival_data: baseline_rate must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> stdn(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<survival::SurvivalRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    survival::SurvivalRecord r;
    r.z.resize(beta_true.size());
    for (Eigen::Index j = 0; j < r.z.size(); ++j) r.z[j] = stdn(rng);
    const double rate = baseline_rate * std::exp(r.z.dot(beta_true));
    const double t_event = -std::log1p(-unif(rng)) / rate;
    const bool censored = unif(rng) < censor_rate;
    const double t_censor = censored ? 24.0 * (1.0 - unif(rng)) : 24.0;
    const double observed = std::min(t_event, t_censor);
    r.event = t_event <= t_censor;
    r.time = std::clamp(6.0 * std::ceil(observed / 6.0), 6.0, 24.0);
    out.push_back(std::move(r));
  }
  if (std::none_of(out.begin(), out.end(), [](const survival::SurvivalRecord& r) { return r.event; })) {
    throw DataError("generate_survival_data: sample contains no events");
  }
  return out;
}

}  // namespace adprog::synth
