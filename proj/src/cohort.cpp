#include "adprog/cohort.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "adprog/csv.hpp"
#include "adprog/error.hpp"

namespace adprog {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string location(std::size_t line, std::string_view column) {
  return "line " + std::to_string(line) + ", column '" + std::string(column) + "'";
}

std::optional<ClinicalStatus> parse_cs(std::string_view raw, const CohortSchema& schema, std::size_t line) {
  const std::string s = lower(raw);
  if (s.empty() || s == "na" || s == "nan") return std::nullopt;
  if (s == "cn" || s == "nl") return ClinicalStatus::CN;
  if (s == "mci") return ClinicalStatus::MCI;
  if (s == "ad" || s == "dementia") return ClinicalStatus::AD;
  auto v = csv::parse_number(s);
  if (!v) throw DataError(location(line, schema.cs_column) + ": unrecognised clinical status '" + std::string(raw) + "'");
  if (schema.is_sentinel(*v)) return std::nullopt;
  if (*v == 1.0) return ClinicalStatus::CN;
  if (*v == 2.0) return ClinicalStatus::MCI;
  if (*v == 3.0) return ClinicalStatus::AD;
  throw DataError(location(line, schema.cs_column) + ": clinical status must be 1, 2 or 3, got '" + std::string(raw) + "'");
}

// Returns nullopt for an empty cell or a sentinel.
std::optional<double> parse_cell(std::string_view raw, const CohortSchema& schema, std::size_t line,
                                 std::string_view column) {
  std::string_view s = raw;
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  auto v = csv::parse_number(s);
  if (!v || !std::isfinite(*v)) {
    throw DataError(location(line, column) + ": non-numeric value '" + std::string(raw) + "'");
  }
  if (schema.is_sentinel(*v)) return std::nullopt;
  return v;
}

}  // namespace

std::string_view to_string(ClinicalStatus cs) {
  switch (cs) {
    case ClinicalStatus::CN: return "CN";
    case ClinicalStatus::MCI: return "MCI";
    case ClinicalStatus::AD: return "AD";
  }
  return "?";
}

std::string_view to_string(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::Cognitive: return "Cognitive";
    case FeatureGroup::MRI: return "MRI";
    case FeatureGroup::DTI: return "DTI";
    case FeatureGroup::Genetics: return "Genetics";
    case FeatureGroup::Demographics: return "Demographics";
    case FeatureGroup::CSF: return "CSF";
    case FeatureGroup::Other: return "Other";
  }
  return "?";
}

FeatureGroup parse_feature_group(std::string_view name) {
  const std::string s = lower(name);
  if (s == "cognitive") return FeatureGroup::Cognitive;
  if (s == "mri") return FeatureGroup::MRI;
  if (s == "dti") return FeatureGroup::DTI;
  if (s == "genetics") return FeatureGroup::Genetics;
  if (s == "demographics") return FeatureGroup::Demographics;
  if (s == "csf") return FeatureGroup::CSF;
  if (s == "other") return FeatureGroup::Other;
  throw ConfigError("unknown feature group '" + std::string(name) + "'");
}

bool VisitRecord::operator==(const VisitRecord& other) const {
  if (month != other.month || missing != other.missing || adas13 != other.adas13 || cs != other.cs) return false;
  if (features.size() != other.features.size()) return false;
  for (Eigen::Index j = 0; j < features.size(); ++j) {
    if (missing[static_cast<std::size_t>(j)]) continue;
    if (features[j] != other.features[j]) return false;
  }
  return true;
}

std::size_t Cohort::num_visits() const {
  std::size_t n = 0;
  for (const auto& p : patients) n += p.visits.size();
  return n;
}

const Patient* Cohort::find(std::string_view patient_id) const {
  for (const auto& p : patients) {
    if (p.id == patient_id) return &p;
  }
  return nullptr;
}

bool CohortSchema::is_sentinel(double v) const {
  return std::find(missing_sentinels.begin(), missing_sentinels.end(), v) != missing_sentinels.end();
}

CohortSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read schema file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema " + path.string() + ": " + e.what());
  }
  CohortSchema s;
  try {
    s.patient_id_column = j.value("patient_id", s.patient_id_column);
    s.month_column = j.value("month", s.month_column);
    s.adas_column = j.value("adas13", s.adas_column);
    s.cs_column = j.value("cs", s.cs_column);
    if (j.contains("missing_sentinels")) s.missing_sentinels = j.at("missing_sentinels").get<std::vector<double>>();
    s.month_tolerance = j.value("month_tolerance", 0);
    if (j.contains("features")) {
      for (const auto& f : j.at("features")) {
        s.features.emplace_back(f.at("column").get<std::string>(),
                                parse_feature_group(f.value("group", std::string("Other"))));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema " + path.string() + ": " + e.what());
  }
  if (s.month_tolerance < 0) throw ConfigError("schema: month_tolerance must be >= 0");
  return s;
}

void save_schema(const CohortSchema& schema, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["patient_id"] = schema.patient_id_column;
  j["month"] = schema.month_column;
  j["adas13"] = schema.adas_column;
  j["cs"] = schema.cs_column;
  j["missing_sentinels"] = schema.missing_sentinels;
  j["month_tolerance"] = schema.month_tolerance;
  auto features = nlohmann::ordered_json::array();
  for (const auto& [col, group] : schema.features) {
    features.push_back({{"column", col}, {"group", std::string(to_string(group))}});
  }
  j["features"] = features;
  std::ofstream out(path);
  if (!out) throw Error("cannot write schema file: " + path.string());
  out << j.dump(2) << '\n';
}

CohortSchema schema_for(const Cohort& cohort) {
  CohortSchema s;
  s.adas_column = cohort.adas_column;
  for (std::size_t j = 0; j < cohort.feature_names.size(); ++j) {
    s.features.emplace_back(cohort.feature_names[j], cohort.feature_groups[j]);
  }
  return s;
}

Cohort ingest_cohort_text(std::string_view text, const CohortSchema& schema) {
  const csv::Table table = csv::parse(text);
  if (table.header.empty() || table.rows.empty()) throw DataError("no records");

  auto require = [&](const std::string& name) {
    auto c = table.column(name);
    if (!c) throw DataError("required column '" + name + "' not found in header");
    return *c;
  };
  const std::size_t pid_col = require(schema.patient_id_column);
  const std::size_t month_col = require(schema.month_column);
  const std::size_t adas_col = require(schema.adas_column);
  const std::size_t cs_col = require(schema.cs_column);

  Cohort cohort;
  cohort.adas_column = schema.adas_column;
  std::vector<std::size_t> feature_cols;
  if (schema.features.empty()) {
    const std::unordered_set<std::size_t> meta = {pid_col, month_col, adas_col, cs_col};
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (meta.count(c)) continue;
      feature_cols.push_back(c);
      cohort.feature_names.push_back(table.header[c]);
      cohort.feature_groups.push_back(FeatureGroup::Other);
    }
  } else {
    for (const auto& [name, group] : schema.features) {
      feature_cols.push_back(require(name));
      cohort.feature_names.push_back(name);
      cohort.feature_groups.push_back(group);
    }
  }
  const auto D = static_cast<Eigen::Index>(feature_cols.size());

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    const std::string& pid = row[pid_col];
    if (pid.empty()) throw DataError(location(line, schema.patient_id_column) + ": empty patient id");

    VisitRecord v;
    auto month = csv::parse_number(row[month_col]);
    if (!month || !std::isfinite(*month) || *month != std::floor(*month)) {
      throw DataError(location(line, schema.month_column) + ": non-numeric value '" + row[month_col] + "'");
    }
    if (*month < 0) throw DataError(location(line, schema.month_column) + ": negative month");
    v.month = static_cast<int>(*month);
    v.adas13 = parse_cell(row[adas_col], schema, line, schema.adas_column);
    if (v.adas13 && (*v.adas13 < 0.0 || *v.adas13 > 85.0)) {
      throw DataError(location(line, schema.adas_column) + ": ADAS-Cog13 outside [0,85]");
    }
    v.cs = parse_cs(row[cs_col], schema, line);
    v.features.resize(D);
    v.missing.assign(static_cast<std::size_t>(D), false);
    for (Eigen::Index j = 0; j < D; ++j) {
      const std::size_t c = feature_cols[static_cast<std::size_t>(j)];
      auto cell = parse_cell(row[c], schema, line, table.header[c]);
      if (cell) {
        v.features[j] = *cell;
      } else {
        v.features[j] = kNaN;
        v.missing[static_cast<std::size_t>(j)] = true;
      }
    }

    auto [it, inserted] = index.try_emplace(pid, cohort.patients.size());
    if (inserted) cohort.patients.push_back(Patient{pid, {}});
    auto& visits = cohort.patients[it->second].visits;
    for (const auto& existing : visits) {
      if (existing.month == v.month) {
        throw DataError(location(line, schema.month_column) + ": duplicate record for patient " + pid + " month " +
                        std::to_string(v.month));
      }
    }
    visits.push_back(std::move(v));
  }
  for (auto& p : cohort.patients) {
    std::sort(p.visits.begin(), p.visits.end(),
              [](const VisitRecord& a, const VisitRecord& b) { return a.month < b.month; });
  }
  return cohort;
}

Cohort ingest_cohort(const std::filesystem::path& path, const CohortSchema& schema) {
  return ingest_cohort_text(csv::read_text(path), schema);
}

std::string write_cohort_text(const Cohort& cohort, const CohortSchema& schema) {
  const double sentinel = schema.missing_sentinels.empty() ? -999999.0 : schema.missing_sentinels.front();
  std::string out;
  std::vector<std::string> header = {schema.patient_id_column, schema.month_column, schema.adas_column,
                                     schema.cs_column};
  header.insert(header.end(), cohort.feature_names.begin(), cohort.feature_names.end());
  out += csv::join_line(header) + '\n';
  std::vector<std::string> fields;
  for (const auto& p : cohort.patients) {
    for (const auto& v : p.visits) {
      fields.clear();
      fields.push_back(p.id);
      fields.push_back(std::to_string(v.month));
      fields.push_back(v.adas13 ? csv::format_number(*v.adas13) : csv::format_number(sentinel));
      fields.push_back(v.cs ? std::to_string(static_cast<int>(*v.cs)) : csv::format_number(sentinel));
      for (Eigen::Index j = 0; j < v.features.size(); ++j) {
        fields.push_back(v.missing[static_cast<std::size_t>(j)] ? csv::format_number(sentinel)
                                                                : csv::format_number(v.features[j]));
      }
      out += csv::join_line(fields) + '\n';
    }
  }
  return out;
}

void write_cohort(const Cohort& cohort, const CohortSchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write cohort file: " + path.string());
  out << write_cohort_text(cohort, schema);
}

std::optional<std::size_t> find_visit(const std::vector<VisitRecord>& visits, int month, int tolerance) {
  std::optional<std::size_t> best;
  int best_gap = tolerance + 1;
  for (std::size_t i = 0; i < visits.size(); ++i) {
    const int gap = std::abs(visits[i].month - month);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

VisitGrid align_windows(const std::vector<VisitRecord>& visits, int tolerance) {
  VisitGrid grid{};
  for (std::size_t s = 0; s < kGridMonths.size(); ++s) {
    auto idx = find_visit(visits, kGridMonths[s], tolerance);
    if (!idx) throw DataError("missing month " + std::to_string(kGridMonths[s]));
    grid[s] = &visits[*idx];
  }
  return grid;
}

ConversionLabel label_conversion(const VisitGrid& grid) {
  for (std::size_t s = 0; s < grid.size(); ++s) {
    if (!grid[s] || !grid[s]->cs) {
      throw DataError("missing clinical status at month " + std::to_string(kGridMonths[s]));
    }
  }
  ConversionLabel label;
  if (*grid[0]->cs == ClinicalStatus::AD) {
    label.baseline_excluded = true;
    return label;
  }
  for (std::size_t s = 1; s < grid.size(); ++s) {
    if (*grid[s]->cs == ClinicalStatus::AD) {
      label.per_window[s - 1] = true;
      label.first_window = static_cast<int>(s);
      label.converted = true;
      break;
    }
  }
  return label;
}

}  // namespace adprog
