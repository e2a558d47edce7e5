#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace adprog {

enum class ClinicalStatus : int { CN = 1, MCI = 2, AD = 3 };

enum class FeatureGroup { Cognitive, MRI, DTI, Genetics, Demographics, CSF, Other };

std::string_view to_string(ClinicalStatus cs);
std::string_view to_string(FeatureGroup g);
/// Accepts the enum spelling case-insensitively ("mri", "MRI", ...).
FeatureGroup parse_feature_group(std::string_view name);

/// One timestamped visit. Masked feature cells hold NaN and must never be
/// read as numbers; `missing[j]` is the authoritative flag.
struct VisitRecord {
  int month = 0;
  Eigen::VectorXd features;
  std::vector<bool> missing;
  std::optional<double> adas13;
  std::optional<ClinicalStatus> cs;

  bool operator==(const VisitRecord& other) const;
};

struct Patient {
  std::string id;
  std::vector<VisitRecord> visits;  // strictly increasing months

  bool operator==(const Patient&) const = default;
};

struct Cohort {
  std::vector<Patient> patients;
  std::vector<std::string> feature_names;
  std::vector<FeatureGroup> feature_groups;
  /// Name of the ADAS-Cog13 column in the source file. Carried so that
  /// feature selection can count the label column without using it as input.
  std::string adas_column = "ADAS13";

  std::size_t num_features() const { return feature_names.size(); }
  std::size_t num_visits() const;
  const Patient* find(std::string_view patient_id) const;

  bool operator==(const Cohort&) const = default;
};

/// Column mapping for delimited cohort files.
struct CohortSchema {
  std::string patient_id_column = "RID";
  std::string month_column = "Month";
  std::string adas_column = "ADAS13";
  std::string cs_column = "DX";
  /// Feature column -> group, in file order of preference. When empty every
  /// non-metadata column is ingested as a feature in group Other.
  std::vector<std::pair<std::string, FeatureGroup>> features;
  std::vector<double> missing_sentinels = {-999999.0, -9999999.0};
  /// Allowed |month - target| when matching visit-grid months. 0 = exact.
  int month_tolerance = 0;

  bool is_sentinel(double v) const;
};

CohortSchema load_schema(const std::filesystem::path& path);
void save_schema(const CohortSchema& schema, const std::filesystem::path& path);
/// Schema whose column names match `cohort` (used when writing cohorts back out).
CohortSchema schema_for(const Cohort& cohort);

/// Reads a comma-separated file with a header row. Lines starting with '#'
/// are comments. Rows are grouped by patient (first-appearance order) and
/// sorted by month.
Cohort ingest_cohort(const std::filesystem::path& path, const CohortSchema& schema);
Cohort ingest_cohort_text(std::string_view text, const CohortSchema& schema);

/// Writes `cohort` in the format `ingest_cohort` reads, encoding masked cells
/// with the schema's first sentinel. Numbers use shortest round-trip form.
std::string write_cohort_text(const Cohort& cohort, const CohortSchema& schema);
void write_cohort(const Cohort& cohort, const CohortSchema& schema, const std::filesystem::path& path);

inline constexpr std::array<int, 5> kGridMonths = {0, 6, 12, 18, 24};

/// Index of the visit matching `month` within `tolerance`, preferring the
/// closest one. Visits must be sorted.
std::optional<std::size_t> find_visit(const std::vector<VisitRecord>& visits, int month, int tolerance = 0);

using VisitGrid = std::array<const VisitRecord*, 5>;

/// Picks the visits at months 0,6,12,18,24. Other months are ignored.
/// Throws DataError("missing month M") naming the first absent grid month.
VisitGrid align_windows(const std::vector<VisitRecord>& visits, int tolerance = 0);

struct ConversionLabel {
  std::array<bool, 4> per_window{};  // (0-6], (6-12], (12-18], (18-24]
  bool converted = false;
  std::optional<int> first_window;  // 1..4
  bool baseline_excluded = false;

  bool operator==(const ConversionLabel&) const = default;
};

/// First AD occurrence on the grid fixes the conversion window; later
/// reversions are ignored. Baseline AD patients are excluded.
ConversionLabel label_conversion(const VisitGrid& grid);

}  // namespace adprog
