#include "adprog/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adprog/error.hpp"

namespace adprog {

namespace {

template <class Pred>
FilterResult filter_patients(const Cohort& cohort, Pred keep) {
  FilterResult out;
  out.cohort.feature_names = cohort.feature_names;
  out.cohort.feature_groups = cohort.feature_groups;
  out.cohort.adas_column = cohort.adas_column;
  for (const auto& p : cohort.patients) {
    std::string reason;
    if (keep(p, reason)) {
      out.cohort.patients.push_back(p);
    } else {
      out.removed.push_back({p.id, std::move(reason)});
    }
  }
  return out;
}

template <class T>
void fill_optional(std::vector<VisitRecord>& visits, std::optional<T> VisitRecord::*field) {
  std::optional<T> last;
  for (auto& v : visits) {
    if (v.*field) {
      last = v.*field;
    } else if (last) {
      v.*field = last;
    }
  }
  std::optional<T> first;
  for (auto& v : visits) {
    if (v.*field) {
      first = v.*field;
      break;
    }
  }
  for (auto& v : visits) {
    if (v.*field) break;
    v.*field = first;
  }
}

}  // namespace

FilterResult filter_min_visits(const Cohort& cohort, int min_visits) {
  if (min_visits < 1) throw ConfigError("min_visits must be >= 1");
  return filter_patients(cohort, [&](const Patient& p, std::string& reason) {
    if (static_cast<int>(p.visits.size()) >= min_visits) return true;
    reason = "fewer than " + std::to_string(min_visits) + " visits (" + std::to_string(p.visits.size()) + ")";
    return false;
  });
}

FilterResult filter_required_months(const Cohort& cohort, const std::vector<int>& required, int tolerance) {
  return filter_patients(cohort, [&](const Patient& p, std::string& reason) {
    for (int m : required) {
      if (!find_visit(p.visits, m, tolerance)) {
        reason = "missing month " + std::to_string(m);
        return false;
      }
    }
    return true;
  });
}

FilterResult filter_missingness(const Cohort& cohort, double max_missing_fraction) {
  if (!(max_missing_fraction > 0.0 && max_missing_fraction <= 1.0)) {
    throw ConfigError("max_missing_fraction must be in (0, 1]");
  }
  return filter_patients(cohort, [&](const Patient& p, std::string& reason) {
    std::size_t cells = 0;
    std::size_t masked = 0;
    for (const auto& v : p.visits) {
      cells += v.missing.size();
      masked += static_cast<std::size_t>(std::count(v.missing.begin(), v.missing.end(), true));
    }
    if (cells == 0) return true;
    const double fraction = static_cast<double>(masked) / static_cast<double>(cells);
    if (fraction <= max_missing_fraction) return true;
    reason = "missing fraction " + std::to_string(fraction) + " exceeds " + std::to_string(max_missing_fraction);
    return false;
  });
}

FillResult forward_fill(const Cohort& cohort) {
  FillResult out;
  out.cohort = cohort;
  const std::size_t D = cohort.num_features();
  for (auto& p : out.cohort.patients) {
    auto& visits = p.visits;
    if (visits.empty()) continue;
    for (std::size_t j = 0; j < D; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      std::optional<std::size_t> first;
      for (std::size_t i = 0; i < visits.size(); ++i) {
        if (!visits[i].missing[j]) {
          first = i;
          break;
        }
      }
      if (!first) {
        out.fully_missing.emplace_back(p.id, cohort.feature_names[j]);
        continue;
      }
      for (std::size_t i = 0; i < *first; ++i) {
        visits[i].features[col] = visits[*first].features[col];
        visits[i].missing[j] = false;
      }
      for (std::size_t i = *first + 1; i < visits.size(); ++i) {
        if (visits[i].missing[j]) {
          visits[i].features[col] = visits[i - 1].features[col];
          visits[i].missing[j] = false;
        }
      }
    }
    fill_optional(visits, &VisitRecord::adas13);
    fill_optional(visits, &VisitRecord::cs);
  }
  return out;
}

bool glob_match(std::string_view pattern, std::string_view text) {
  std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

FeatureSelection select_features(const Cohort& cohort, const FeatureSelectionConfig& config) {
  std::size_t pattern_count = 0;
  for (const auto& [g, pats] : config.groups) pattern_count += pats.size();
  if (pattern_count == 0) throw ConfigError("no features selected");

  std::vector<std::string> unmatched;
  std::vector<bool> keep(cohort.num_features(), false);
  bool label_selected = false;
  FeatureSelection out;
  for (const auto& [group, patterns] : config.groups) {
    for (const auto& pat : patterns) {
      bool matched = false;
      for (std::size_t j = 0; j < cohort.num_features(); ++j) {
        if (glob_match(pat, cohort.feature_names[j])) {
          matched = true;
          if (!keep[j]) {
            keep[j] = true;
            ++out.per_group[group];
          }
        }
      }
      if (glob_match(pat, cohort.adas_column)) {
        matched = true;
        if (!label_selected) {
          label_selected = true;
          ++out.per_group[group];
        }
      }
      if (!matched) unmatched.push_back(pat);
    }
  }
  if (!unmatched.empty()) {
    std::string msg = "configured columns absent from cohort:";
    for (const auto& u : unmatched) msg += " " + u;
    throw DataError(msg);
  }

  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (keep[j]) cols.push_back(j);
  }
  out.input_columns = cols.size();
  out.selected_columns = cols.size() + (label_selected ? 1 : 0);
  if (cols.empty()) throw ConfigError("no features selected");

  Cohort& c = out.cohort;
  c.adas_column = cohort.adas_column;
  for (auto j : cols) {
    c.feature_names.push_back(cohort.feature_names[j]);
    c.feature_groups.push_back(cohort.feature_groups[j]);
  }
  c.patients.reserve(cohort.patients.size());
  for (const auto& p : cohort.patients) {
    Patient q{p.id, {}};
    q.visits.reserve(p.visits.size());
    for (const auto& v : p.visits) {
      VisitRecord w;
      w.month = v.month;
      w.adas13 = v.adas13;
      w.cs = v.cs;
      w.features.resize(static_cast<Eigen::Index>(cols.size()));
      w.missing.resize(cols.size());
      for (std::size_t k = 0; k < cols.size(); ++k) {
        w.features[static_cast<Eigen::Index>(k)] = v.features[static_cast<Eigen::Index>(cols[k])];
        w.missing[k] = v.missing[cols[k]];
      }
      q.visits.push_back(std::move(w));
    }
    c.patients.push_back(std::move(q));
  }
  return out;
}

Eigen::MatrixXd NormParams::apply(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd out(X.rows(), X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const bool flat = constant[static_cast<std::size_t>(c)];
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const double v = X(r, c);
      out(r, c) = (flat || !std::isfinite(v)) ? 0.0 : (v - mean[c]) / sd[c];
    }
  }
  return out;
}

NormParams fit_normalization(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& fit_rows) {
  if (fit_rows.empty()) throw DataError("z_normalize: fit_rows is empty");
  NormParams p;
  p.mean = Eigen::VectorXd::Zero(X.cols());
  p.sd = Eigen::VectorXd::Ones(X.cols());
  p.constant.assign(static_cast<std::size_t>(X.cols()), false);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (auto r : fit_rows) {
      const double v = X(r, c);
      if (std::isfinite(v)) {
        sum += v;
        ++n;
      }
    }
    if (n == 0) {
      p.constant[static_cast<std::size_t>(c)] = true;
      continue;
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (auto r : fit_rows) {
      const double v = X(r, c);
      if (std::isfinite(v)) ss += (v - mean) * (v - mean);
    }
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    p.mean[c] = mean;
    if (sd > 0.0) {
      p.sd[c] = sd;
    } else {
      p.constant[static_cast<std::size_t>(c)] = true;
    }
  }
  return p;
}

Normalized z_normalize(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& fit_rows) {
  Normalized out;
  out.params = fit_normalization(X, fit_rows);
  out.X = out.params.apply(X);
  return out;
}

SupervisedSet SupervisedSet::subset(const std::vector<Eigen::Index>& rows) const {
  SupervisedSet s;
  s.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  s.y.resize(static_cast<Eigen::Index>(rows.size()), y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    s.X.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
    s.y.row(static_cast<Eigen::Index>(i)) = y.row(rows[i]);
    s.patient_of_row.push_back(patient_of_row[static_cast<std::size_t>(rows[i])]);
    s.anchor_month.push_back(anchor_month[static_cast<std::size_t>(rows[i])]);
  }
  s.feature_names = feature_names;
  s.norm_params = norm_params;
  return s;
}

SupervisedSet build_supervised(const Cohort& cohort, int tolerance) {
  SupervisedSet set;
  set.feature_names = cohort.feature_names;
  const auto D = static_cast<Eigen::Index>(cohort.num_features());
  std::vector<Eigen::VectorXd> xs;
  std::vector<std::array<double, 4>> ys;
  for (const auto& p : cohort.patients) {
    std::size_t contributed = 0;
    for (const auto& v : p.visits) {
      std::array<double, 4> targets{};
      bool complete = true;
      for (std::size_t h = 0; h < kHorizons.size() && complete; ++h) {
        auto idx = find_visit(p.visits, v.month + kHorizons[h], tolerance);
        if (!idx || !p.visits[*idx].adas13) {
          complete = false;
        } else {
          targets[h] = *p.visits[*idx].adas13;
        }
      }
      if (!complete) continue;
      Eigen::VectorXd x(D);
      for (Eigen::Index j = 0; j < D; ++j) {
        x[j] = v.missing[static_cast<std::size_t>(j)] ? std::numeric_limits<double>::quiet_NaN() : v.features[j];
      }
      xs.push_back(std::move(x));
      ys.push_back(targets);
      set.patient_of_row.push_back(p.id);
      set.anchor_month.push_back(v.month);
      ++contributed;
    }
    if (contributed == 0) set.no_rows.push_back(p.id);
  }
  set.X.resize(static_cast<Eigen::Index>(xs.size()), D);
  set.y.resize(static_cast<Eigen::Index>(xs.size()), 4);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    set.X.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
    for (Eigen::Index h = 0; h < 4; ++h) set.y(static_cast<Eigen::Index>(i), h) = ys[i][static_cast<std::size_t>(h)];
  }
  return set;
}

SupervisedSet normalize_supervised(const SupervisedSet& set, const std::vector<Eigen::Index>& fit_rows) {
  SupervisedSet out = set;
  auto params = fit_normalization(set.X, fit_rows);
  out.X = params.apply(set.X);
  out.norm_params = std::move(params);
  return out;
}

}  // namespace adprog
