#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "adprog/error.hpp"
#include "adprog/preprocess.hpp"
#include "test_util.hpp"

using namespace adprog;
using testutil::visit;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Patient patient_with_months(const std::string& id, std::vector<int> months, std::size_t D = 1) {
  Patient p{id, {}};
  for (int m : months) p.visits.push_back(visit(m, std::vector<double>(D, 1.0), 10.0 + m, ClinicalStatus::MCI));
  return p;
}

Cohort one_column_cohort(std::vector<std::vector<double>> series) {
  Cohort c = testutil::cohort_with_features({"f"});
  for (std::size_t i = 0; i < series.size(); ++i) {
    Patient p{"p" + std::to_string(i), {}};
    for (std::size_t k = 0; k < series[i].size(); ++k) {
      p.visits.push_back(visit(static_cast<int>(6 * k), {series[i][k]}));
    }
    c.patients.push_back(p);
  }
  return c;
}

std::vector<double> column_of(const Patient& p) {
  std::vector<double> out;
  for (const auto& v : p.visits) out.push_back(v.missing[0] ? kNaN : v.features[0]);
  return out;
}

std::set<std::string> ids(const Cohort& c) {
  std::set<std::string> s;
  for (const auto& p : c.patients) s.insert(p.id);
  return s;
}

// Random cohort with ragged months and a random share of masked cells.
Cohort random_cohort(std::mt19937_64& rng, int n, std::size_t D) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < D; ++j) names.push_back("f" + std::to_string(j));
  Cohort c = testutil::cohort_with_features(names);
  const double mask_rate = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (int i = 0; i < n; ++i) {
    Patient p{"p" + std::to_string(i), {}};
    const int visits = testutil::uniform_int(rng, 1, 8);
    int month = 0;
    for (int k = 0; k < visits; ++k) {
      std::vector<double> f;
      for (std::size_t j = 0; j < D; ++j) {
        f.push_back(std::uniform_real_distribution<double>(0, 1)(rng) < mask_rate ? kNaN : static_cast<double>(rng() % 100));
      }
      p.visits.push_back(visit(month, f, 5.0));
      month += (rng() % 4 == 0) ? 3 : 6;
    }
    c.patients.push_back(p);
  }
  return c;
}

}  // namespace

TEST(Filters, MinVisitsBoundary) {
  Cohort c = testutil::cohort_with_features({"f"});
  c.patients.push_back(patient_with_months("three", {0, 6, 12}));
  c.patients.push_back(patient_with_months("four", {0, 6, 12, 18}));
  const auto r = filter_min_visits(c, 4);
  EXPECT_EQ(ids(r.cohort), std::set<std::string>{"four"});
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0].patient_id, "three");
  EXPECT_THROW(filter_min_visits(c, 0), ConfigError);
}

TEST(Filters, RequiredMonths) {
  Cohort c = testutil::cohort_with_features({"f"});
  c.patients.push_back(patient_with_months("extra", {0, 3, 6, 12, 18, 24}));
  c.patients.push_back(patient_with_months("short", {0, 6, 12, 18}));
  const auto r = filter_required_months(c);
  EXPECT_EQ(ids(r.cohort), std::set<std::string>{"extra"});
  EXPECT_EQ(r.removed[0].reason, "missing month 24");
}

TEST(Filters, Missingness) {
  Cohort c = testutil::cohort_with_features({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});
  Patient heavy{"heavy", {}};
  Patient clean{"clean", {}};
  for (int k = 0; k < 2; ++k) {
    std::vector<double> f(10, kNaN);
    if (k == 0) f[0] = 1.0;  // 1 of 20 cells observed: 95% masked
    heavy.visits.push_back(visit(6 * k, f));
    clean.visits.push_back(visit(6 * k, std::vector<double>(10, 2.0)));
  }
  c.patients = {heavy, clean};
  EXPECT_EQ(ids(filter_missingness(c, 0.9).cohort), std::set<std::string>{"clean"});
  EXPECT_THROW(filter_missingness(c, 0.0), ConfigError);
  EXPECT_THROW(filter_missingness(c, 1.5), ConfigError);
}

// Each filter is a per-patient predicate, so any order yields the same set.
TEST(Filters, MonotoneAndCommuting) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Cohort c = random_cohort(rng, 20, 3);
    using Step = std::function<Cohort(const Cohort&)>;
    const std::vector<Step> steps = {
        [](const Cohort& x) { return filter_min_visits(x, 4).cohort; },
        [](const Cohort& x) { return filter_required_months(x, {0, 6, 12}).cohort; },
        [](const Cohort& x) { return filter_missingness(x, 0.5).cohort; },
    };
    std::vector<int> order = {0, 1, 2};
    std::optional<std::set<std::string>> reference;
    do {
      Cohort cur = c;
      for (int s : order) {
        Cohort next = steps[static_cast<std::size_t>(s)](cur);
        const auto before = ids(cur);
        for (const auto& id : ids(next)) EXPECT_TRUE(before.count(id));
        cur = std::move(next);
      }
      if (!reference) reference = ids(cur);
      EXPECT_EQ(ids(cur), *reference);
    } while (std::next_permutation(order.begin(), order.end()));
  }
}

TEST(ForwardFill, Examples) {
  const auto r = forward_fill(one_column_cohort({{5, kNaN, kNaN, 7}, {kNaN, 4}, {kNaN, kNaN}}));
  EXPECT_EQ(column_of(r.cohort.patients[0]), (std::vector<double>{5, 5, 5, 7}));
  EXPECT_EQ(column_of(r.cohort.patients[1]), (std::vector<double>{4, 4}));
  const auto still = column_of(r.cohort.patients[2]);
  EXPECT_TRUE(std::isnan(still[0]) && std::isnan(still[1]));
  ASSERT_EQ(r.fully_missing.size(), 1u);
  EXPECT_EQ(r.fully_missing[0], (std::pair<std::string, std::string>{"p2", "f"}));
}

TEST(ForwardFill, FillsLabelsAndStatus) {
  Cohort c = testutil::cohort_with_features({});
  Patient p{"p", {visit(0, {}, std::nullopt, std::nullopt), visit(6, {}, 12.0, ClinicalStatus::MCI),
                  visit(12, {}, std::nullopt, std::nullopt)}};
  c.patients.push_back(p);
  const auto r = forward_fill(c).cohort.patients[0].visits;
  EXPECT_EQ(r[0].adas13, 12.0);
  EXPECT_EQ(r[2].adas13, 12.0);
  EXPECT_EQ(r[0].cs, ClinicalStatus::MCI);
  EXPECT_EQ(r[2].cs, ClinicalStatus::MCI);
}

// 1000 random masked series: a second pass is a no-op and observed cells never move.
TEST(ForwardFill, IdempotentAndPreservesObservedCells) {
  std::mt19937_64 rng(17);
  std::vector<std::vector<double>> series;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> s(static_cast<std::size_t>(testutil::uniform_int(rng, 1, 10)));
    const double rate = std::uniform_real_distribution<double>(0, 1)(rng);
    for (auto& v : s) v = std::uniform_real_distribution<double>(0, 1)(rng) < rate ? kNaN : static_cast<double>(rng() % 1000);
    series.push_back(s);
  }
  const Cohort c = one_column_cohort(series);
  const auto once = forward_fill(c);
  const auto twice = forward_fill(once.cohort);
  EXPECT_EQ(twice.cohort, once.cohort);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto filled = column_of(once.cohort.patients[i]);
    const bool all_masked = std::all_of(series[i].begin(), series[i].end(), [](double v) { return std::isnan(v); });
    for (std::size_t k = 0; k < series[i].size(); ++k) {
      if (!std::isnan(series[i][k])) {
        EXPECT_EQ(filled[k], series[i][k]);
      }
      EXPECT_EQ(std::isnan(filled[k]), all_masked);
    }
  }
}

TEST(SelectFeatures, GeneticsOnly) {
  Cohort c = testutil::cohort_with_features({"APOE4", "APOE2", "TOMM40", "Hippocampus", "Age"});
  c.feature_groups = {FeatureGroup::Genetics, FeatureGroup::Genetics, FeatureGroup::Genetics, FeatureGroup::MRI,
                      FeatureGroup::Demographics};
  c.patients.push_back({"p", {visit(0, {1, 0, 2, 7000, 70}, 10.0)}});
  FeatureSelectionConfig cfg;
  cfg.groups[FeatureGroup::Genetics] = {"APOE?", "TOMM40"};
  const auto s = select_features(c, cfg);
  EXPECT_EQ(s.selected_columns, 3u);
  EXPECT_EQ(s.input_columns, 3u);
  EXPECT_EQ(s.cohort.feature_names, (std::vector<std::string>{"APOE4", "APOE2", "TOMM40"}));
  EXPECT_EQ(s.cohort.patients[0].visits[0].features[2], 2.0);
}

// Group sizes 9/366/229/3/6/3 with the label inside the cognitive group:
// 616 matched columns, 615 of them model inputs.
TEST(SelectFeatures, LabelColumnCountsButIsNotAnInput) {
  const std::vector<std::pair<FeatureGroup, int>> sizes = {
      {FeatureGroup::Cognitive, 8}, {FeatureGroup::MRI, 366}, {FeatureGroup::DTI, 229},
      {FeatureGroup::Genetics, 3},  {FeatureGroup::Demographics, 6}, {FeatureGroup::CSF, 3}};
  Cohort c;
  FeatureSelectionConfig cfg;
  for (const auto& [g, n] : sizes) {
    const std::string prefix(to_string(g));
    for (int k = 0; k < n; ++k) {
      c.feature_names.push_back(prefix + "_" + std::to_string(k));
      c.feature_groups.push_back(g);
    }
    cfg.groups[g] = {prefix + "_*"};
  }
  for (int k = 0; k < 40; ++k) {
    c.feature_names.push_back("Unused_" + std::to_string(k));
    c.feature_groups.push_back(FeatureGroup::Other);
  }
  cfg.groups[FeatureGroup::Cognitive].push_back("ADAS13");
  c.patients.push_back({"p", {visit(0, std::vector<double>(c.feature_names.size(), 1.0), 10.0)}});
  const auto s = select_features(c, cfg);
  EXPECT_EQ(s.selected_columns, 616u);
  EXPECT_EQ(s.input_columns, 615u);
  EXPECT_EQ(s.per_group.at(FeatureGroup::Cognitive), 9u);
  EXPECT_EQ(s.per_group.at(FeatureGroup::MRI), 366u);
  EXPECT_EQ(s.cohort.num_features(), 615u);
}

TEST(SelectFeatures, Errors) {
  Cohort c = testutil::cohort_with_features({"a"});
  try {
    select_features(c, {});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "no features selected");
  }
  FeatureSelectionConfig cfg;
  cfg.groups[FeatureGroup::MRI] = {"a", "absent_col"};
  try {
    select_features(c, cfg);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("absent_col"), std::string::npos);
  }
}

TEST(Glob, Patterns) {
  EXPECT_TRUE(glob_match("ST*_UCSFFSX", "ST101SV_UCSFFSX"));
  EXPECT_TRUE(glob_match("a?c", "abc"));
  EXPECT_FALSE(glob_match("a?c", "ac"));
  EXPECT_TRUE(glob_match("*", ""));
  EXPECT_FALSE(glob_match("abc", "abcd"));
}

TEST(ZNormalize, Examples) {
  Eigen::MatrixXd X(3, 2);
  X << 1, 4, 2, 4, 3, 4;
  const auto n = z_normalize(X, {0, 1, 2});
  EXPECT_NEAR(n.X(0, 0), -1.0, 1e-15);
  EXPECT_NEAR(n.X(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(n.X(2, 0), 1.0, 1e-15);
  EXPECT_TRUE(n.X.col(1).isZero());
  EXPECT_TRUE(n.params.constant[1]);
  EXPECT_FALSE(n.params.constant[0]);
  EXPECT_THROW(z_normalize(X, {}), DataError);
}

TEST(ZNormalize, UsesOnlyFitRows) {
  Eigen::MatrixXd X(4, 1);
  X << 0, 2, 100, -50;
  const auto n = z_normalize(X, {0, 1});
  EXPECT_DOUBLE_EQ(n.params.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(n.params.sd[0], std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(n.X(2, 0), 99.0 / std::sqrt(2.0));
}

// Fitted columns come out with mean 0 and sample sd 1; refitting is a no-op.
TEST(ZNormalize, StandardizesAndIsIdempotent) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int rows = testutil::uniform_int(rng, 2, 40);
    const int cols = testutil::uniform_int(rng, 1, 6);
    Eigen::MatrixXd X = testutil::random_matrix(rng, rows, cols, 50.0);
    X.array() += 1000.0;
    if (rng() % 3 == 0) X.col(0).setConstant(3.0);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(rows));
    std::iota(all.begin(), all.end(), 0);
    const auto n = z_normalize(X, all);
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (n.params.constant[static_cast<std::size_t>(c)]) {
        EXPECT_TRUE(n.X.col(c).isZero());
        continue;
      }
      const double mean = n.X.col(c).mean();
      const double sd = std::sqrt((n.X.col(c).array() - mean).square().sum() / (rows - 1));
      EXPECT_LT(std::abs(mean), 1e-10);
      EXPECT_LT(std::abs(sd - 1.0), 1e-10);
    }
    const auto again = z_normalize(n.X, all);
    EXPECT_LT((again.X - n.X).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ZNormalize, NonFiniteCellsBecomeZero) {
  Eigen::MatrixXd X(3, 1);
  X << 1, kNaN, 3;
  const auto n = z_normalize(X, {0, 1, 2});
  EXPECT_DOUBLE_EQ(n.params.mean[0], 2.0);
  EXPECT_EQ(n.X(1, 0), 0.0);
}

TEST(BuildSupervised, RowCounts) {
  Cohort c = testutil::cohort_with_features({"f"});
  c.patients.push_back(patient_with_months("grid", {0, 6, 12, 18, 24}));
  c.patients.push_back(patient_with_months("long", {0, 6, 12, 18, 24, 30, 36}));
  c.patients.push_back(patient_with_months("short", {0, 6, 12, 18}));
  const auto s = build_supervised(c);
  EXPECT_EQ(s.rows(), 4);
  EXPECT_EQ(s.patient_of_row, (std::vector<std::string>{"grid", "long", "long", "long"}));
  EXPECT_EQ(s.anchor_month, (std::vector<int>{0, 0, 6, 12}));
  EXPECT_EQ(s.no_rows, std::vector<std::string>{"short"});
  EXPECT_EQ(s.y.row(2), Eigen::RowVector4d(22, 28, 34, 40));
}

// Every row's targets are the scores found at anchor + horizon, and every
// qualifying anchor yields exactly one row.
TEST(BuildSupervised, RowsMatchLookupOracle) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const Cohort c = random_cohort(rng, 10, 2);
    const auto s = build_supervised(c);
    std::size_t expected = 0;
    for (const auto& p : c.patients) {
      for (const auto& v : p.visits) {
        bool ok = true;
        for (int h : kHorizons) ok = ok && find_visit(p.visits, v.month + h).has_value();
        expected += ok;
      }
    }
    ASSERT_EQ(static_cast<std::size_t>(s.rows()), expected);
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const Patient* p = c.find(s.patient_of_row[static_cast<std::size_t>(r)]);
      ASSERT_NE(p, nullptr);
      const int t = s.anchor_month[static_cast<std::size_t>(r)];
      for (std::size_t h = 0; h < 4; ++h) {
        const auto idx = find_visit(p->visits, t + kHorizons[h]);
        ASSERT_TRUE(idx);
        EXPECT_EQ(s.y(r, static_cast<Eigen::Index>(h)), *p->visits[*idx].adas13);
      }
      const auto& anchor = p->visits[*find_visit(p->visits, t)];
      for (Eigen::Index j = 0; j < s.X.cols(); ++j) {
        if (anchor.missing[static_cast<std::size_t>(j)]) {
          EXPECT_TRUE(std::isnan(s.X(r, j)));
        } else {
          EXPECT_EQ(s.X(r, j), anchor.features[j]);
        }
      }
    }
  }
}

TEST(BuildSupervised, NormalizeImputesMissingWithZero) {
  Cohort c = testutil::cohort_with_features({"f", "g"});
  Patient p{"p", {}};
  for (int m = 0; m <= 48; m += 6) p.visits.push_back(visit(m, {static_cast<double>(m), m == 6 ? kNaN : 1.0}, 1.0));
  c.patients.push_back(p);
  const auto s = build_supervised(c);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(s.rows()));
  std::iota(all.begin(), all.end(), 0);
  const auto n = normalize_supervised(s, all);
  ASSERT_TRUE(n.norm_params);
  EXPECT_TRUE(n.X.allFinite());
  EXPECT_EQ(n.X(1, 1), 0.0);
}
