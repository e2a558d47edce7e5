#include "adprog/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "adprog/analysis.hpp"
#include "adprog/csv.hpp"
#include "adprog/error.hpp"
#include "adprog/report.hpp"
#include "adprog/synth.hpp"

namespace adprog::cli {
namespace {

using report::num;
using report::TableBuilder;

report::Writer writer_for(const config::RunConfig& config) {
  return report::Writer(config.paths.report_dir, config::config_hash(config));
}

void write_preprocess(const PreprocessOutcome& o, const report::Writer& w) {
  w.write("waterfall.csv", waterfall_csv(o.waterfall));

  TableBuilder removed({"stage", "patient_id", "reason"});
  for (const auto& [stage, r] : o.removed) removed.row({stage, r.patient_id, r.reason});
  w.write("filter_report.csv", removed.str());

  TableBuilder missing({"patient_id", "column"});
  for (const auto& [pid, col] : o.fully_missing) missing.row({pid, col});
  w.write("fully_missing.csv", missing.str());

  TableBuilder sel({"item", "count"});
  if (o.selection) {
    for (const auto& [g, n] : o.selection->per_group) sel.row({"group:" + std::string(to_string(g)), std::to_string(n)});
    sel.row({"selected_columns", std::to_string(o.selection->selected_columns)});
    sel.row({"input_columns", std::to_string(o.selection->input_columns)});
  } else {
    sel.row({"input_columns", std::to_string(o.cohort.num_features())});
  }
  w.write("feature_selection.csv", sel.str());

  const CohortSchema schema = schema_for(o.cohort);
  w.write("preprocessed.csv", write_cohort_text(o.cohort, schema));
  std::filesystem::create_directories(w.dir());
  save_schema(schema, w.dir() / "preprocessed_schema.json");

  std::vector<std::string> header = {"patient_id", "anchor_month"};
  for (const auto& f : o.supervised.feature_names) header.push_back(f);
  for (int h : kHorizons) header.push_back("y_" + std::to_string(h));
  TableBuilder sup(header);
  const SupervisedSet& s = o.supervised;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    std::vector<std::string> row = {s.patient_of_row[static_cast<std::size_t>(i)],
                                    std::to_string(s.anchor_month[static_cast<std::size_t>(i)])};
    for (Eigen::Index j = 0; j < s.X.cols(); ++j) row.push_back(num(s.X(i, j)));
    for (Eigen::Index h = 0; h < 4; ++h) row.push_back(num(s.y(i, h)));
    sup.row(row);
  }
  w.write("supervised.csv", sup.str());
}

void print_waterfall(const std::vector<WaterfallStage>& stages, std::ostream& out) {
  out << waterfall_csv(stages);
}

}  // namespace

eval::CvOptions cv_options(const config::RunConfig& config) {
  eval::CvOptions o;
  o.folds = config.folds;
  o.seed = config.require_seed();
  o.gp = config.gp.source_options();
  o.normalize_per_fold = config.preprocess.normalize_scope == config::NormalizeScope::Fold;
  return o;
}

namespace {

eval::CvReport cv_stage(const PreprocessOutcome& pre, const config::RunConfig& config) {
  return eval::run_cv(pre.supervised, cv_options(config));
}

void write_cv(const eval::CvReport& r, const report::Writer& w, std::ostream& out) {
  TableBuilder table({"model", "mae_mean", "mae_sd", "folds"});
  for (std::size_t k = 0; k < 3; ++k) {
    const auto name = std::string(forecast::to_string(eval::kModelKinds[k]));
    table.row({name, num(r.summary[k].mean), num(r.summary[k].sd), std::to_string(r.summary[k].count)});
  }
  w.write("cv_table.csv", table.str());

  TableBuilder folds({"fold", "sGP", "pGP", "tGP"});
  for (int f = 0; f < r.k; ++f) {
    const auto uf = static_cast<std::size_t>(f);
    folds.row({std::to_string(f), num(r.fold_mae[0][uf]), num(r.fold_mae[1][uf]), num(r.fold_mae[2][uf])});
  }
  w.write("fold_mae.csv", folds.str());

  TableBuilder horizon({"model", "mae_6", "mae_12", "mae_18", "mae_24"});
  TableBuilder fold_horizon({"fold", "model", "mae_6", "mae_12", "mae_18", "mae_24"});
  for (std::size_t k = 0; k < 3; ++k) {
    const auto name = std::string(forecast::to_string(eval::kModelKinds[k]));
    const auto& hm = r.horizon_mae[k];
    horizon.row({name, num(hm[0]), num(hm[1]), num(hm[2]), num(hm[3])});
    for (int f = 0; f < r.k; ++f) {
      const auto& fh = r.fold_horizon_mae[k][static_cast<std::size_t>(f)];
      fold_horizon.row({std::to_string(f), name, num(fh[0]), num(fh[1]), num(fh[2]), num(fh[3])});
    }
  }
  w.write("horizon_mae.csv", horizon.str());
  w.write("fold_horizon_mae.csv", fold_horizon.str());

  TableBuilder fc({"patient_id", "anchor_month", "model_kind", "mean_6", "var_6", "mean_12", "var_12", "mean_18",
                   "var_18", "mean_24", "var_24", "truth_6", "truth_12", "truth_18", "truth_24", "fold",
                   "fallback_horizons"});
  for (const auto& row : r.forecasts) {
    const auto& f = row.forecast;
    std::string fallback;
    for (std::size_t h = 0; h < 4; ++h) {
      if (!f.fallback[h]) continue;
      if (!fallback.empty()) fallback += ' ';
      fallback += std::to_string(kHorizons[h]);
    }
    fc.row({f.patient_id, std::to_string(f.anchor_month), std::string(forecast::to_string(f.kind)), num(f.mean[0]),
            num(f.variance[0]), num(f.mean[1]), num(f.variance[1]), num(f.mean[2]), num(f.variance[2]),
            num(f.mean[3]), num(f.variance[3]), num(row.truth[0]), num(row.truth[1]), num(row.truth[2]),
            num(row.truth[3]), std::to_string(row.fold), fallback});
  }
  w.write("forecasts.csv", fc.str());

  const report::Writer plots = w.sub("plots");
  for (std::size_t k = 0; k < 3; ++k) {
    TableBuilder series({"x", "y"});
    for (int f = 0; f < r.k; ++f) series.row({std::to_string(f), num(r.fold_mae[k][static_cast<std::size_t>(f)])});
    plots.write("fold_mae_" + std::string(forecast::to_string(eval::kModelKinds[k])) + ".csv", series.str());
  }

  out << "model,mae_mean,mae_sd\n";
  for (std::size_t k = 0; k < 3; ++k) {
    out << forecast::to_string(eval::kModelKinds[k]) << ',' << std::fixed << std::setprecision(4)
        << r.summary[k].mean << ',' << r.summary[k].sd << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

eval::ConversionReport convert_stage(const PreprocessOutcome& pre, const eval::CvReport& cv,
                                     const config::RunConfig& config, ConversionInputs& inputs) {
  inputs = conversion_inputs(pre.cohort, cv, config.preprocess.month_tolerance);
  eval::ConversionOptions o;
  o.mode = config.cox.mode;
  o.normalize_probabilities = config.cox.normalize;
  o.svm.C = config.classifier.C;
  o.svm.epochs = config.classifier.epochs;
  o.svm.balance_classes = config.classifier.balance_classes;
  o.svm.seed = config.require_seed();
  o.folds = config.folds;
  o.seed = config.require_seed();
  return eval::run_conversion(inputs.scores, inputs.labels, o);
}

void write_convert(const eval::ConversionReport& r, const ConversionInputs& inputs, const report::Writer& w,
                   std::ostream& out) {
  TableBuilder probs({"patient_id", "P_6", "P_12", "P_18", "P_24", "change_in_cs"});
  TableBuilder preds({"patient_id", "ground_truth_conversion", "predicted_conversion", "margin_score"});
  for (const auto& row : r.rows) {
    const auto& p = row.probabilities;
    probs.row({row.patient_id, num(p[0]), num(p[1]), num(p[2]), num(p[3]), row.truth ? "1" : "0"});
    preds.row({row.patient_id, row.truth ? "1" : "0", row.decision.label == 1 ? "1" : "0", num(row.decision.score)});
  }
  w.write("conversion_probabilities.csv", probs.str());
  w.write("classifier_predictions.csv", preds.str());

  const auto& m = r.metrics;
  const auto flag = [](bool b) { return std::string(b ? "1" : "0"); };
  TableBuilder metrics({"precision", "recall", "f1", "accuracy", "tp", "fp", "fn", "tn", "precision_undefined",
                        "recall_undefined", "f1_undefined", "accuracy_undefined"});
  metrics.row({num(m.precision), num(m.recall), num(m.f1), num(m.accuracy), std::to_string(m.confusion.tp),
               std::to_string(m.confusion.fp), std::to_string(m.confusion.fn), std::to_string(m.confusion.tn),
               flag(m.precision_undefined), flag(m.recall_undefined), flag(m.f1_undefined),
               flag(m.accuracy_undefined)});
  w.write("classifier_metrics.csv", metrics.str());

  TableBuilder beta({"fold", "beta_1", "beta_2", "beta_3", "beta_4"});
  for (std::size_t f = 0; f < r.fold_beta.size(); ++f) {
    const auto& b = r.fold_beta[f];
    beta.row({std::to_string(f), num(b[0]), num(b[1]), num(b[2]), num(b[3])});
  }
  w.write("cox_coefficients.csv", beta.str());

  TableBuilder skipped({"patient_id", "reason"});
  for (const auto& [pid, reason] : inputs.skipped) skipped.row({pid, reason});
  w.write("conversion_skipped.csv", skipped.str());

  out << "precision,recall,f1,accuracy\n"
      << std::fixed << std::setprecision(4) << m.precision << ',' << m.recall << ',' << m.f1 << ',' << m.accuracy
      << '\n';
  out.unsetf(std::ios::floatfield);
}

synth::GeneratedCohort synth_stage(const config::RunConfig& config, const report::Writer& w, std::ostream& out) {
  synth::CohortSpec spec = config.synth;
  spec.seed = config.require_seed();
  synth::GeneratedCohort g = synth::generate_cohort(spec);
  w.write("cohort.csv", write_cohort_text(g.cohort, g.schema));
  std::filesystem::create_directories(w.dir());
  save_schema(g.schema, w.dir() / "schema.json");
  w.write("truth.csv", synth::truth_csv(g.truth));
  out << "synth: " << g.cohort.patients.size() << " patients, " << g.cohort.num_visits() << " visits -> "
      << w.dir().string() << '\n';
  return g;
}

void ingest_summary(const Cohort& c, const report::Writer& w, std::ostream& out) {
  std::size_t with_adas = 0, with_cs = 0;
  for (const auto& p : c.patients) {
    for (const auto& v : p.visits) {
      with_adas += v.adas13.has_value();
      with_cs += v.cs.has_value();
    }
  }
  TableBuilder t({"item", "count"});
  t.row({"patients", std::to_string(c.patients.size())});
  t.row({"visits", std::to_string(c.num_visits())});
  t.row({"features", std::to_string(c.num_features())});
  t.row({"visits_with_adas13", std::to_string(with_adas)});
  t.row({"visits_with_cs", std::to_string(with_cs)});
  w.write("ingest_summary.csv", t.str());
  out << "ingest: " << c.patients.size() << " patients, " << c.num_visits() << " visits, " << c.num_features()
      << " features\n";
}

}  // namespace

PreprocessOutcome run_preprocess(const Cohort& cohort, const config::PreprocessConfig& config) {
  PreprocessOutcome o;
  const auto stage = [&](const std::string& name, FilterResult r, const Cohort& before) {
    o.waterfall.push_back({name, before.patients.size(), r.cohort.patients.size()});
    for (auto& rem : r.removed) o.removed.emplace_back(name, std::move(rem));
    return std::move(r.cohort);
  };
  Cohort c = cohort;
  c = stage("min_visits", filter_min_visits(c, config.min_visits), c);
  c = stage("required_months", filter_required_months(c, config.required_months, config.month_tolerance), c);
  c = stage("missingness", filter_missingness(c, config.max_missing), c);
  FillResult filled = forward_fill(c);
  o.fully_missing = std::move(filled.fully_missing);
  c = std::move(filled.cohort);
  if (config.features) {
    o.selection = select_features(c, *config.features);
    c = o.selection->cohort;
  }
  o.supervised = build_supervised(c, config.month_tolerance);
  o.cohort = std::move(c);
  return o;
}

std::string waterfall_csv(const std::vector<WaterfallStage>& stages) {
  std::string s = "stage,before,after,dropped\n";
  for (const auto& st : stages) {
    s += st.stage + "," + std::to_string(st.before) + "," + std::to_string(st.after) + "," +
         std::to_string(st.dropped()) + "\n";
  }
  return s;
}

ConversionInputs conversion_inputs(const Cohort& cohort, const eval::CvReport& cv, int month_tolerance) {
  ConversionInputs in;
  std::map<std::string, std::array<const forecast::HorizonForecast*, 3>> at_baseline;  // by model kind
  for (const auto& row : cv.forecasts) {
    if (row.forecast.anchor_month != 0) continue;
    at_baseline[row.forecast.patient_id][static_cast<std::size_t>(row.forecast.kind)] = &row.forecast;
  }
  for (const auto& p : cohort.patients) {
    const auto it = at_baseline.find(p.id);
    if (it == at_baseline.end()) {
      in.skipped.emplace_back(p.id, "no month-0 forecast");
      continue;
    }
    VisitGrid grid;
    try {
      grid = align_windows(p.visits, month_tolerance);
    } catch (const DataError& e) {
      in.skipped.emplace_back(p.id, e.what());
      continue;
    }
    ConversionLabel label;
    try {
      label = label_conversion(grid);
    } catch (const DataError& e) {
      in.skipped.emplace_back(p.id, e.what());
      continue;
    }
    if (label.baseline_excluded) {
      in.skipped.emplace_back(p.id, "AD at baseline");
      continue;
    }
    if (!grid[0]->adas13) {
      in.skipped.emplace_back(p.id, "no month-0 score");
      continue;
    }
    const auto& f = it->second;
    if (!f[0] || !f[1] || !f[2]) {
      in.skipped.emplace_back(p.id, "incomplete month-0 forecasts");
      continue;
    }
    survival::PatientScores s;
    s.patient_id = p.id;
    s.scores = forecast::ensemble_average(*f[0], *f[1], *f[2]);
    s.baseline = *grid[0]->adas13;
    in.scores.push_back(s);
    in.labels.emplace(p.id, label);
  }
  return in;
}

Cohort load_input(const config::RunConfig& config) {
  if (config.paths.input.empty()) throw ConfigError("no input cohort: set paths.input or pass --input");
  if (!std::filesystem::exists(config.paths.input)) {
    throw ConfigError("input file not found: " + config.paths.input.string());
  }
  CohortSchema schema;
  if (!config.paths.schema.empty()) {
    if (!std::filesystem::exists(config.paths.schema)) {
      throw ConfigError("schema file not found: " + config.paths.schema.string());
    }
    schema = load_schema(config.paths.schema);
  }
  return ingest_cohort(config.paths.input, schema);
}

int cmd_synth(const config::RunConfig& config, std::ostream& out) {
  synth_stage(config, writer_for(config), out);
  return 0;
}

int cmd_ingest(const config::RunConfig& config, std::ostream& out) {
  ingest_summary(load_input(config), writer_for(config), out);
  return 0;
}

int cmd_preprocess(const config::RunConfig& config, std::ostream& out) {
  const PreprocessOutcome o = run_preprocess(load_input(config), config.preprocess);
  write_preprocess(o, writer_for(config));
  print_waterfall(o.waterfall, out);
  out << "preprocess: " << o.cohort.patients.size() << " patients, " << o.supervised.rows() << " supervised rows\n";
  return 0;
}

int cmd_stats(const config::RunConfig& config, std::ostream& out) {
  const Cohort c = load_input(config);
  const report::Writer w = writer_for(config);
  const analysis::GroupStats gs = analysis::group_stats(c);

  TableBuilder groups({"group", "mean", "sd", "count", "sd_undefined"});
  for (const auto& [cs, s] : gs.score) {
    groups.row({std::string(to_string(cs)), num(s.mean), num(s.sd), std::to_string(s.count), s.sd_undefined ? "1" : "0"});
  }
  w.write("group_stats.csv", groups.str());

  TableBuilder membership({"patient_id", "groups"});
  for (const auto& p : c.patients) {
    const auto it = gs.membership.find(p.id);
    std::string names;
    if (it != gs.membership.end()) {
      for (ClinicalStatus cs : it->second) {
        if (!names.empty()) names += ' ';
        names += to_string(cs);
      }
    }
    membership.row({p.id, names});
  }
  w.write("group_membership.csv", membership.str());

  TableBuilder traj({"group", "month", "mean", "sd", "count"});
  const report::Writer plots = w.sub("plots");
  for (const auto& [cs, months] : gs.trajectory) {
    TableBuilder series({"x", "y", "sd"});
    for (const auto& [month, s] : months) {
      traj.row({std::string(to_string(cs)), std::to_string(month), num(s.mean), num(s.sd), std::to_string(s.count)});
      series.row({std::to_string(month), num(s.mean), num(s.sd)});
    }
    plots.write("trajectory_" + std::string(to_string(cs)) + ".csv", series.str());
  }
  w.write("trajectories.csv", traj.str());

  const auto diffs = analysis::window_diff_stats(c, config.preprocess.month_tolerance);
  TableBuilder wd({"window", "mean", "max", "min", "median", "sd", "count"});
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& d = diffs[i];
    wd.row({std::to_string(i + 1), num(d.mean), num(d.max), num(d.min), num(d.median), num(d.sd),
            std::to_string(d.count)});
  }
  w.write("window_diffs.csv", wd.str());

  std::array<std::size_t, 17> hist{};
  for (const auto& p : c.patients) {
    for (const auto& v : p.visits) {
      if (v.adas13) hist[std::min<std::size_t>(16, static_cast<std::size_t>(*v.adas13 / 5.0))]++;
    }
  }
  TableBuilder h({"bin_lo", "bin_hi", "count"});
  for (std::size_t b = 0; b < hist.size(); ++b) {
    h.row({std::to_string(5 * b), std::to_string(5 * (b + 1)), std::to_string(hist[b])});
  }
  plots.write("adas_histogram.csv", h.str());

  out << "stats: " << gs.score.size() << " status groups, " << c.patients.size() << " patients\n";
  return 0;
}

int cmd_cluster(const config::RunConfig& config, std::ostream& out) {
  const Cohort c = load_input(config);
  std::vector<std::pair<const Patient*, const VisitRecord*>> points;
  for (const auto& p : c.patients) {
    for (const auto& v : p.visits) {
      if (v.adas13) points.emplace_back(&p, &v);
    }
  }
  Eigen::MatrixXd values(static_cast<Eigen::Index>(points.size()), 1);
  for (std::size_t i = 0; i < points.size(); ++i) values(static_cast<Eigen::Index>(i), 0) = *points[i].second->adas13;
  const auto r = analysis::kmeans(values, config.cluster.k, config.require_seed(), config.cluster.max_iter);

  const report::Writer w = writer_for(config);
  TableBuilder assign({"patient_id", "month", "adas13", "cluster"});
  for (std::size_t i = 0; i < points.size(); ++i) {
    assign.row({points[i].first->id, std::to_string(points[i].second->month), num(*points[i].second->adas13),
                std::to_string(r.assignments[i])});
  }
  w.write("cluster_assignments.csv", assign.str());
  TableBuilder centroids({"cluster", "centroid", "size"});
  for (Eigen::Index k = 0; k < r.centroids.rows(); ++k) {
    const auto size = std::count(r.assignments.begin(), r.assignments.end(), static_cast<int>(k));
    centroids.row({std::to_string(k), num(r.centroids(k, 0)), std::to_string(size)});
  }
  w.write("cluster_centroids.csv", centroids.str());
  TableBuilder sse({"iteration", "sse"});
  for (std::size_t i = 0; i < r.sse_history.size(); ++i) sse.row({std::to_string(i), num(r.sse_history[i])});
  w.write("cluster_sse.csv", sse.str());
  out << "cluster: " << points.size() << " scores into " << config.cluster.k << " clusters, SSE " << r.sse << '\n';
  return 0;
}

int cmd_cv(const config::RunConfig& config, std::ostream& out) {
  const PreprocessOutcome pre = run_preprocess(load_input(config), config.preprocess);
  write_cv(cv_stage(pre, config), writer_for(config), out);
  return 0;
}

int cmd_convert(const config::RunConfig& config, std::ostream& out) {
  const PreprocessOutcome pre = run_preprocess(load_input(config), config.preprocess);
  const eval::CvReport cv = cv_stage(pre, config);
  ConversionInputs inputs;
  const eval::ConversionReport r = convert_stage(pre, cv, config, inputs);
  write_convert(r, inputs, writer_for(config), out);
  return 0;
}

int cmd_pipeline(const config::RunConfig& config, std::ostream& out) {
  config.require_seed();
  const report::Writer root = writer_for(config);
  Cohort cohort;
  if (config.paths.input.empty()) {
    cohort = synth_stage(config, root.sub("synth"), out).cohort;
  } else {
    cohort = load_input(config);
    ingest_summary(cohort, root.sub("ingest"), out);
  }
  const PreprocessOutcome pre = run_preprocess(cohort, config.preprocess);
  write_preprocess(pre, root.sub("preprocess"));
  print_waterfall(pre.waterfall, out);

  const eval::CvReport cv = cv_stage(pre, config);
  write_cv(cv, root.sub("cv"), out);

  ConversionInputs inputs;
  const eval::ConversionReport conv = convert_stage(pre, cv, config, inputs);
  write_convert(conv, inputs, root.sub("convert"), out);
  return 0;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Alzheimer's progression forecasting pipeline", "adprog"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string report_dir, input, schema, normalize_scope;
  std::optional<int> patients, folds, min_visits;
  std::optional<double> max_missing;
  std::vector<int> required_months;

  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "Seed for every stochastic step");
  app.add_option("--report-dir", report_dir, "Directory for report files");
  app.add_option("--input", input, "Cohort file");
  app.add_option("--schema", schema, "Column mapping for the cohort file");
  app.add_option("--patients", patients, "Synthetic cohort size");
  app.add_option("--folds", folds, "Cross-validation folds");
  app.add_option("--min-visits", min_visits, "Minimum visits per patient");
  app.add_option("--required-months", required_months, "Months every patient must have")->delimiter(',');
  app.add_option("--max-missing", max_missing, "Largest tolerated fraction of masked feature cells");
  app.add_option("--normalize-scope", normalize_scope, "per_fold or global");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "Generate a synthetic cohort"},
      {"ingest", "Read a cohort file and summarize it"},
      {"preprocess", "Filter, fill, select features and build supervised rows"},
      {"stats", "Per-status score statistics and window differences"},
      {"cluster", "k-means on ADAS-Cog13 scores"},
      {"cv", "Cross-validated sGP / pGP / tGP forecasting"},
      {"convert", "Conversion probabilities and classifier"},
      {"pipeline", "synth or ingest, then preprocess, cv and convert"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    config::RunConfig cfg = config_path.empty() ? config::RunConfig{} : config::load_config(config_path);
    if (seed) cfg.seed = seed;
    if (!report_dir.empty()) cfg.paths.report_dir = report_dir;
    if (!input.empty()) cfg.paths.input = input;
    if (!schema.empty()) cfg.paths.schema = schema;
    if (patients) cfg.synth.n_patients = *patients;
    if (folds) {
      if (*folds < 2) throw ConfigError("--folds must be at least 2");
      cfg.folds = *folds;
    }
    if (min_visits) cfg.preprocess.min_visits = *min_visits;
    if (!required_months.empty()) cfg.preprocess.required_months = required_months;
    if (max_missing) cfg.preprocess.max_missing = *max_missing;
    if (!normalize_scope.empty()) {
      if (normalize_scope == "per_fold") cfg.preprocess.normalize_scope = config::NormalizeScope::Fold;
      else if (normalize_scope == "global") cfg.preprocess.normalize_scope = config::NormalizeScope::Global;
      else throw ConfigError("--normalize-scope must be per_fold or global");
    }

    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "synth") return cmd_synth(cfg, out);
    if (name == "ingest") return cmd_ingest(cfg, out);
    if (name == "preprocess") return cmd_preprocess(cfg, out);
    if (name == "stats") return cmd_stats(cfg, out);
    if (name == "cluster") return cmd_cluster(cfg, out);
    if (name == "cv") return cmd_cv(cfg, out);
    if (name == "convert") return cmd_convert(cfg, out);
    return cmd_pipeline(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace adprog::cli
