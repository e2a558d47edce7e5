#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adprog/classify.hpp"
#include "adprog/forecast.hpp"
#include "adprog/preprocess.hpp"
#include "adprog/survival.hpp"
#include "adprog/synth.hpp"

namespace adprog::config {

struct Paths {
  std::filesystem::path input;   // cohort file; empty means "generate one"
  std::filesystem::path schema;  // column mapping; empty means defaults
  std::filesystem::path report_dir = "reports";
};

enum class NormalizeScope { Fold, Global };

struct PreprocessConfig {
  int min_visits = 4;
  std::vector<int> required_months = {0, 6, 12, 18, 24};
  double max_missing = 0.90;
  int month_tolerance = 0;
  NormalizeScope normalize_scope = NormalizeScope::Fold;
  /// Absent: keep every feature column.
  std::optional<FeatureSelectionConfig> features;
};

struct GpConfig {
  gp::KernelKind kernel = gp::KernelKind::RbfIso;
  int budget = 100;
  long max_rows = 300;
  std::optional<double> signal_variance;
  std::optional<double> lengthscale;
  std::optional<double> noise_variance;

  forecast::SourceOptions source_options() const;
};

struct CoxConfig {
  survival::CovariateMode mode = survival::CovariateMode::Levels;
  bool normalize = false;
};

struct ClassifierConfig {
  double C = 1.0;
  int epochs = 200;
  bool balance_classes = false;
};

struct ClusterConfig {
  int k = 3;
  int max_iter = 300;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  Paths paths;
  synth::CohortSpec synth;
  PreprocessConfig preprocess;
  GpConfig gp;
  int folds = 10;
  CoxConfig cox;
  ClassifierConfig classifier;
  ClusterConfig cluster;

  /// Throws ConfigError("seed is required ...") when no seed was given.
  std::uint64_t require_seed() const;
};

/// Parses JSON text. Unknown keys are rejected. Relative paths are resolved
/// against `base_dir`.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of every setting except `paths`.
std::string canonical_json(const RunConfig& config);
/// 16 hex digits (64-bit FNV-1a of the canonical JSON).
std::string config_hash(const RunConfig& config);

}  // namespace adprog::config
