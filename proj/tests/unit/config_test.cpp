#include <string>

#include <gtest/gtest.h>

#include "adprog/config.hpp"
#include "adprog/error.hpp"
#include "adprog/report.hpp"
#include "test_util.hpp"

using namespace adprog;
using namespace adprog::config;

namespace {

std::string message_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, DefaultsFromEmptyObject) {
  const auto c = parse_config("{}");
  EXPECT_FALSE(c.seed);
  EXPECT_EQ(c.folds, 10);
  EXPECT_EQ(c.gp.kernel, gp::KernelKind::RbfIso);
  EXPECT_EQ(c.preprocess.normalize_scope, NormalizeScope::Fold);
  EXPECT_EQ(c.cox.mode, survival::CovariateMode::Levels);
  EXPECT_EQ(c.classifier.C, 1.0);
  EXPECT_FALSE(c.preprocess.features);
  try {
    c.require_seed();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("seed is required"), std::string::npos);
  }
}

TEST(Config, ParsesEverySection) {
  const auto c = parse_config(R"({
    "seed": 42,
    "paths": {"input": "data/c.csv", "schema": "s.json", "report_dir": "out"},
    "synth": {"n_patients": 50, "months": [0, 6, 12, 18, 24, 30], "offset_sd": 2.5},
    "preprocess": {"min_visits": 5, "max_missing": 0.5, "normalize_scope": "global",
                   "features": {"groups": {"MRI": ["MRI_*"], "Genetics": ["APOE4"]}}},
    "gp": {"kernel": "rbf_ard", "budget": 20, "max_rows": 100, "noise_variance": 0.1},
    "cv": {"folds": 5},
    "cox": {"mode": "first_differences", "normalize": true},
    "classifier": {"C": 0.5, "epochs": 30, "balance_classes": true},
    "cluster": {"k": 4}
  })",
                              "/base");
  EXPECT_EQ(c.require_seed(), 42u);
  EXPECT_EQ(c.paths.input, std::filesystem::path("/base/data/c.csv"));
  EXPECT_EQ(c.paths.report_dir, std::filesystem::path("/base/out"));
  EXPECT_EQ(c.synth.n_patients, 50);
  EXPECT_EQ(c.synth.months.back(), 30);
  EXPECT_EQ(c.synth.offset_sd, 2.5);
  EXPECT_EQ(c.preprocess.min_visits, 5);
  EXPECT_EQ(c.preprocess.normalize_scope, NormalizeScope::Global);
  ASSERT_TRUE(c.preprocess.features);
  EXPECT_EQ(c.preprocess.features->groups.size(), 2u);
  EXPECT_EQ(c.gp.kernel, gp::KernelKind::RbfArd);
  EXPECT_EQ(c.gp.noise_variance, 0.1);
  const auto so = c.gp.source_options();
  EXPECT_EQ(so.budget, 20);
  EXPECT_EQ(so.optimize.max_rows, 100);
  EXPECT_EQ(c.folds, 5);
  EXPECT_EQ(c.cox.mode, survival::CovariateMode::FirstDifferences);
  EXPECT_TRUE(c.cox.normalize);
  EXPECT_EQ(c.classifier.C, 0.5);
  EXPECT_TRUE(c.classifier.balance_classes);
  EXPECT_EQ(c.cluster.k, 4);
}

TEST(Config, RejectsBadInput) {
  EXPECT_NE(message_of(R"({"sed": 1})").find("unknown key 'config.sed'"), std::string::npos);
  EXPECT_NE(message_of(R"({"gp": {"budjet": 1}})").find("gp.budjet"), std::string::npos);
  EXPECT_NE(message_of(R"({"seed": "x"})").find("wrong type"), std::string::npos);
  EXPECT_NE(message_of("{not json").find("invalid JSON"), std::string::npos);
  EXPECT_NE(message_of(R"({"preprocess": {"normalize_scope": "fold"}})").find("per_fold or global"), std::string::npos);
  EXPECT_NE(message_of(R"({"gp": {"kernel": "matern"}})").find("rbf_iso or rbf_ard"), std::string::npos);
  EXPECT_FALSE(message_of(R"({"cv": {"folds": 1}})").empty());
  EXPECT_FALSE(message_of(R"({"classifier": {"C": 0}})").empty());
  EXPECT_FALSE(message_of(R"({"synth": {"proportions": [0.5, 0.5]}})").empty());
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(ConfigHash, IgnoresPathsButNotSettings) {
  const auto a = parse_config(R"({"seed": 1, "paths": {"report_dir": "a"}})");
  const auto b = parse_config(R"({"seed": 1, "paths": {"report_dir": "b", "input": "x.csv"}})");
  const auto c = parse_config(R"({"seed": 2})");
  const auto d = parse_config(R"({"seed": 1, "gp": {"budget": 99}})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
  EXPECT_NE(config_hash(a), config_hash(d));
  EXPECT_EQ(config_hash(a).size(), 16u);
  EXPECT_EQ(config_hash(a).find_first_not_of("0123456789abcdef"), std::string::npos);
  // Key order in the source text does not matter.
  EXPECT_EQ(config_hash(parse_config(R"({"cv": {"folds": 4}, "seed": 3})")),
            config_hash(parse_config(R"({"seed": 3, "cv": {"folds": 4}})")));
}

TEST(ConfigHash, CanonicalJsonParsesBack) {
  const auto a = parse_config(R"({"seed": 5, "synth": {"n_patients": 12}, "cox": {"mode": "first_differences"}})");
  const std::string canon = canonical_json(a);
  EXPECT_EQ(canon.find("paths"), std::string::npos);
  const auto b = parse_config(canon);
  EXPECT_EQ(canonical_json(b), canon);
}

TEST(Report, FooterAndTables) {
  EXPECT_EQ(report::footer("0123456789abcdef"), "# config-hash: 0123456789abcdef\n");
  report::TableBuilder t({"a", "b"});
  t.row({"1", "x"});
  EXPECT_EQ(t.str(), "a,b\n1,x\n");
  EXPECT_THROW(t.row({"only"}), Error);
  const auto dir = testutil::scratch_dir("report_writer");
  report::Writer w(dir, "00000000000000ff");
  const auto p = w.sub("cv").write("x.csv", t.str());
  EXPECT_EQ(testutil::slurp(p), "a,b\n1,x\n# config-hash: 00000000000000ff\n");
}
