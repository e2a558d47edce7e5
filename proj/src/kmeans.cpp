#include <limits>
#include <random>

#include "adprog/analysis.hpp"
#include "adprog/error.hpp"

namespace adprog::analysis {
namespace {

// Index of the centre nearest to row i; ties go to the lower index.
int nearest(const Eigen::MatrixXd& X, Eigen::Index i, const Eigen::MatrixXd& centroids, double& dist) {
  int best = 0;
  dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (X.row(i) - centroids.row(c)).squaredNorm();
    if (d < dist) {
      dist = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

double assign(const Eigen::MatrixXd& X, const Eigen::MatrixXd& centroids, std::vector<int>& labels) {
  double sse = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double d = 0.0;
    labels[static_cast<std::size_t>(i)] = nearest(X, i, centroids, d);
    sse += d;
  }
  return sse;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& values, int k, std::uint64_t seed, int max_iter) {
  const Eigen::Index n = values.rows();
  if (k < 1) throw ConfigError("kmeans: k must be at least 1");
  if (n < k) throw DataError("kmeans: " + std::to_string(n) + " points for k = " + std::to_string(k));
  if (!values.allFinite()) throw DataError("kmeans: non-finite input");

  KMeansResult r;
  r.centroids.resize(k, values.cols());
  std::mt19937_64 rng(seed);
  const auto first = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
  r.centroids.row(0) = values.row(first);
  Eigen::VectorXd dmin = (values.rowwise() - values.row(first)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    Eigen::Index far = 0;
    dmin.maxCoeff(&far);
    r.centroids.row(c) = values.row(far);
    dmin = dmin.cwiseMin((values.rowwise() - values.row(far)).rowwise().squaredNorm());
  }

  r.assignments.assign(static_cast<std::size_t>(n), 0);
  r.sse = assign(values, r.centroids, r.assignments);
  r.sse_history.push_back(r.sse);
  for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, values.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = r.assignments[static_cast<std::size_t>(i)];
      sums.row(c) += values.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    Eigen::MatrixXd next = r.centroids;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        next.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        Eigen::Index far = 0;
        double worst = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d =
              (values.row(i) - r.centroids.row(r.assignments[static_cast<std::size_t>(i)])).squaredNorm();
          if (d > worst) {
            worst = d;
            far = i;
          }
        }
        next.row(c) = values.row(far);
      }
    }
    std::vector<int> labels(static_cast<std::size_t>(n));
    const double sse = assign(values, next, labels);
    const bool moved = labels != r.assignments || next != r.centroids;
    r.centroids = std::move(next);
    r.assignments = std::move(labels);
    r.sse = sse;
    r.sse_history.push_back(sse);
    if (!moved) break;
  }
  return r;
}

}  // namespace adprog::analysis
