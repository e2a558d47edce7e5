#include "adprog/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "adprog/error.hpp"

namespace adprog::config {
namespace {

using json = nlohmann::ordered_json;

// Reads one JSON object, rejecting keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: '" + name_ + "." + key + "' has the wrong type");
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  std::optional<json> child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("config: unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

template <typename T, std::size_t N>
void get_array(Section& s, const char* key, std::array<T, N>& out) {
  std::vector<T> v(out.begin(), out.end());
  s.get(key, v);
  if (v.size() != N) throw ConfigError(std::string("config: '") + key + "' needs " + std::to_string(N) + " values");
  std::copy(v.begin(), v.end(), out.begin());
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

std::string kernel_name(gp::KernelKind k) {
  switch (k) {
    case gp::KernelKind::RbfIso: return "rbf_iso";
    case gp::KernelKind::RbfArd: return "rbf_ard";
    case gp::KernelKind::Linear: return "linear";
  }
  return "?";
}

gp::KernelKind parse_kernel(const std::string& name) {
  if (name == "rbf_iso") return gp::KernelKind::RbfIso;
  if (name == "rbf_ard") return gp::KernelKind::RbfArd;
  throw ConfigError("config: gp.kernel must be rbf_iso or rbf_ard, got '" + name + "'");
}

void parse_synth(const json& j, synth::CohortSpec& s) {
  Section sec(j, "synth");
  sec.get("n_patients", s.n_patients);
  sec.get("months", s.months);
  get_array(sec, "proportions", s.proportions);
  get_array(sec, "score_mean", s.score_mean);
  get_array(sec, "score_sd", s.score_sd);
  get_array(sec, "slope_mean", s.slope_mean);
  get_array(sec, "slope_sd", s.slope_sd);
  sec.get("offset_sd", s.offset_sd);
  sec.get("score_noise_sd", s.score_noise_sd);
  sec.get("feature_dim", s.feature_dim);
  sec.get("feature_noise_sd", s.feature_noise_sd);
  sec.get("signature_sd", s.signature_sd);
  sec.get("missing_rate", s.missing_rate);
  sec.get("mci_threshold", s.mci_threshold);
  sec.get("conversion_threshold", s.conversion_threshold);
  sec.get("conversion_rate", s.conversion_rate);
  sec.get("conversion_gamma", s.conversion_gamma);
  sec.get("under_visit", s.under_visit);
  sec.get("missing_month", s.missing_month);
  sec.get("sparse", s.sparse);
  sec.finish();
}

void parse_preprocess(const json& j, PreprocessConfig& p) {
  Section sec(j, "preprocess");
  sec.get("min_visits", p.min_visits);
  sec.get("required_months", p.required_months);
  sec.get("max_missing", p.max_missing);
  sec.get("month_tolerance", p.month_tolerance);
  std::string scope = "per_fold";
  sec.get("normalize_scope", scope);
  if (scope == "per_fold") p.normalize_scope = NormalizeScope::Fold;
  else if (scope == "global") p.normalize_scope = NormalizeScope::Global;
  else throw ConfigError("config: preprocess.normalize_scope must be per_fold or global, got '" + scope + "'");
  if (auto features = sec.child("features")) {
    Section fs(*features, "preprocess.features");
    FeatureSelectionConfig fc;
    if (auto groups = fs.child("groups")) {
      if (!groups->is_object()) throw ConfigError("config: preprocess.features.groups must be an object");
      for (const auto& [name, patterns] : groups->items()) {
        FeatureGroup g;
        try {
          g = parse_feature_group(name);
        } catch (const Error&) {
          throw ConfigError("config: unknown feature group '" + name + "'");
        }
        if (!patterns.is_array()) throw ConfigError("config: feature group '" + name + "' needs a list of patterns");
        for (const auto& pat : patterns) {
          if (!pat.is_string()) throw ConfigError("config: feature patterns must be strings");
          fc.groups[g].push_back(pat.get<std::string>());
        }
      }
    }
    fs.finish();
    p.features = fc;
  }
  sec.finish();
}

json to_json(const synth::CohortSpec& s) {
  json j;
  j["n_patients"] = s.n_patients;
  j["months"] = s.months;
  j["proportions"] = s.proportions;
  j["score_mean"] = s.score_mean;
  j["score_sd"] = s.score_sd;
  j["slope_mean"] = s.slope_mean;
  j["slope_sd"] = s.slope_sd;
  j["offset_sd"] = s.offset_sd;
  j["score_noise_sd"] = s.score_noise_sd;
  j["feature_dim"] = s.feature_dim;
  j["feature_noise_sd"] = s.feature_noise_sd;
  j["signature_sd"] = s.signature_sd;
  j["missing_rate"] = s.missing_rate;
  j["mci_threshold"] = s.mci_threshold;
  j["conversion_threshold"] = s.conversion_threshold;
  j["conversion_rate"] = s.conversion_rate;
  j["conversion_gamma"] = s.conversion_gamma;
  j["under_visit"] = s.under_visit;
  j["missing_month"] = s.missing_month;
  j["sparse"] = s.sparse;
  return j;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

forecast::SourceOptions GpConfig::source_options() const {
  forecast::SourceOptions o;
  o.kernel = kernel;
  o.signal_variance = signal_variance;
  o.lengthscale = lengthscale;
  o.noise_variance = noise_variance;
  o.budget = budget;
  o.optimize.max_rows = max_rows;
  return o;
}

std::uint64_t RunConfig::require_seed() const {
  if (!seed) throw ConfigError("seed is required: set \"seed\" in the config or pass --seed");
  return *seed;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig c;
  Section root(j, "config");
  root.get("seed", c.seed);
  if (auto paths = root.child("paths")) {
    Section ps(*paths, "paths");
    std::string input, schema, report_dir;
    ps.get("input", input);
    ps.get("schema", schema);
    ps.get("report_dir", report_dir);
    ps.finish();
    c.paths.input = resolve(input, base_dir);
    c.paths.schema = resolve(schema, base_dir);
    if (!report_dir.empty()) c.paths.report_dir = resolve(report_dir, base_dir);
  }
  if (auto s = root.child("synth")) parse_synth(*s, c.synth);
  if (auto p = root.child("preprocess")) parse_preprocess(*p, c.preprocess);
  if (auto g = root.child("gp")) {
    Section gs(*g, "gp");
    std::string kernel = kernel_name(c.gp.kernel);
    gs.get("kernel", kernel);
    c.gp.kernel = parse_kernel(kernel);
    gs.get("budget", c.gp.budget);
    gs.get("max_rows", c.gp.max_rows);
    gs.get("signal_variance", c.gp.signal_variance);
    gs.get("lengthscale", c.gp.lengthscale);
    gs.get("noise_variance", c.gp.noise_variance);
    gs.finish();
  }
  if (auto cv = root.child("cv")) {
    Section cs(*cv, "cv");
    cs.get("folds", c.folds);
    cs.finish();
  }
  if (auto cox = root.child("cox")) {
    Section cs(*cox, "cox");
    std::string mode(survival::to_string(c.cox.mode));
    cs.get("mode", mode);
    c.cox.mode = survival::parse_covariate_mode(mode);
    cs.get("normalize", c.cox.normalize);
    cs.finish();
  }
  if (auto cl = root.child("classifier")) {
    Section cs(*cl, "classifier");
    cs.get("C", c.classifier.C);
    cs.get("epochs", c.classifier.epochs);
    cs.get("balance_classes", c.classifier.balance_classes);
    cs.finish();
  }
  if (auto cl = root.child("cluster")) {
    Section cs(*cl, "cluster");
    cs.get("k", c.cluster.k);
    cs.get("max_iter", c.cluster.max_iter);
    cs.finish();
  }
  root.finish();

  if (c.folds < 2) throw ConfigError("config: cv.folds must be at least 2");
  if (c.gp.budget < 0) throw ConfigError("config: gp.budget must be >= 0");
  if (!(c.classifier.C > 0.0)) throw ConfigError("config: classifier.C must be positive");
  if (c.classifier.epochs < 1) throw ConfigError("config: classifier.epochs must be >= 1");
  if (c.cluster.k < 1) throw ConfigError("config: cluster.k must be >= 1");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config file not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string canonical_json(const RunConfig& c) {
  json j;
  j["seed"] = optional_json(c.seed);
  j["synth"] = to_json(c.synth);
  json p;
  p["min_visits"] = c.preprocess.min_visits;
  p["required_months"] = c.preprocess.required_months;
  p["max_missing"] = c.preprocess.max_missing;
  p["month_tolerance"] = c.preprocess.month_tolerance;
  p["normalize_scope"] = c.preprocess.normalize_scope == NormalizeScope::Fold ? "per_fold" : "global";
  if (c.preprocess.features) {
    json groups = json::object();
    for (const auto& [g, patterns] : c.preprocess.features->groups) groups[std::string(to_string(g))] = patterns;
    p["features"]["groups"] = groups;
  } else {
    p["features"] = nullptr;
  }
  j["preprocess"] = p;
  j["gp"] = {{"kernel", kernel_name(c.gp.kernel)},
             {"budget", c.gp.budget},
             {"max_rows", c.gp.max_rows},
             {"signal_variance", optional_json(c.gp.signal_variance)},
             {"lengthscale", optional_json(c.gp.lengthscale)},
             {"noise_variance", optional_json(c.gp.noise_variance)}};
  j["cv"] = {{"folds", c.folds}};
  j["cox"] = {{"mode", std::string(survival::to_string(c.cox.mode))}, {"normalize", c.cox.normalize}};
  j["classifier"] = {
      {"C", c.classifier.C}, {"epochs", c.classifier.epochs}, {"balance_classes", c.classifier.balance_classes}};
  j["cluster"] = {{"k", c.cluster.k}, {"max_iter", c.cluster.max_iter}};
  return j.dump();
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : canonical_json(config)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace adprog::config
