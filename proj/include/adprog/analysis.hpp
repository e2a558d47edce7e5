#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adprog/cohort.hpp"
#include "adprog/eval.hpp"

namespace adprog::analysis {

struct KMeansResult {
  std::vector<int> assignments;
  Eigen::MatrixXd centroids;  // k x d
  double sse = 0.0;
  /// Within-cluster SSE after initialization and after every Lloyd iteration.
  std::vector<double> sse_history;
  int iterations = 0;
};

/// Squared-Euclidean k-means. The first centre is a seeded random row, the
/// rest are chosen farthest-first; an emptied cluster is moved to the point
/// farthest from its centre.
KMeansResult kmeans(const Eigen::MatrixXd& values, int k, std::uint64_t seed = 0, int max_iter = 300);

struct GroupStats {
  /// ADAS-Cog13 over all visits carrying the status, keyed by status.
  std::map<ClinicalStatus, eval::Summary> score;
  /// Statuses each patient was seen with; a patient may belong to several.
  std::map<std::string, std::set<ClinicalStatus>> membership;
  /// Average trajectory per status: month -> summary of scores at that month.
  std::map<ClinicalStatus, std::map<int, eval::Summary>> trajectory;
};

GroupStats group_stats(const Cohort& cohort);

struct WindowDiff {
  double mean = 0.0, max = 0.0, min = 0.0, median = 0.0, sd = 0.0;
  std::size_t count = 0;
  bool sd_undefined = false;
};

/// Statistics of (score at month 6w) - (score at month 6(w-1)) over patients
/// with both scores, for w = 1..4.
std::array<WindowDiff, 4> window_diff_stats(const Cohort& cohort, int tolerance = 0);

}  // namespace adprog::analysis
