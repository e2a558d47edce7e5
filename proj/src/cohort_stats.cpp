#include <algorithm>
#include <cmath>

#include "adprog/analysis.hpp"

namespace adprog::analysis {

GroupStats group_stats(const Cohort& cohort) {
  GroupStats out;
  std::map<ClinicalStatus, std::vector<double>> scores;
  std::map<ClinicalStatus, std::map<int, std::vector<double>>> by_month;
  for (const auto& p : cohort.patients) {
    for (const auto& v : p.visits) {
      if (!v.cs) continue;
      out.membership[p.id].insert(*v.cs);
      if (!v.adas13) continue;
      scores[*v.cs].push_back(*v.adas13);
      by_month[*v.cs][v.month].push_back(*v.adas13);
    }
  }
  for (const auto& [cs, values] : scores) out.score[cs] = eval::summarize(values);
  for (const auto& [cs, months] : by_month) {
    for (const auto& [month, values] : months) out.trajectory[cs][month] = eval::summarize(values);
  }
  return out;
}

std::array<WindowDiff, 4> window_diff_stats(const Cohort& cohort, int tolerance) {
  std::array<std::vector<double>, 4> diffs;
  for (const auto& p : cohort.patients) {
    std::array<std::optional<double>, 5> slot;
    for (std::size_t s = 0; s < 5; ++s) {
      if (const auto idx = find_visit(p.visits, kGridMonths[s], tolerance)) slot[s] = p.visits[*idx].adas13;
    }
    for (std::size_t w = 0; w < 4; ++w) {
      if (slot[w] && slot[w + 1]) diffs[w].push_back(*slot[w + 1] - *slot[w]);
    }
  }
  std::array<WindowDiff, 4> out;
  for (std::size_t w = 0; w < 4; ++w) {
    auto& d = diffs[w];
    if (d.empty()) {
      out[w].sd_undefined = true;
      continue;
    }
    const eval::Summary s = eval::summarize(d);
    out[w].mean = s.mean;
    out[w].sd = s.sd;
    out[w].sd_undefined = s.sd_undefined;
    out[w].count = d.size();
    std::sort(d.begin(), d.end());
    out[w].min = d.front();
    out[w].max = d.back();
    const std::size_t mid = d.size() / 2;
    out[w].median = d.size() % 2 ? d[mid] : 0.5 * (d[mid - 1] + d[mid]);
  }
  return out;
}

}  // namespace adprog::analysis
