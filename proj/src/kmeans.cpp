#include "protofg3d/kmeans.hpp"

#include <algorithm>
#include <random>

#include "protofg3d/error.hpp"

namespace protofg3d {

namespace {

// 1 - max_j <x, c_j>, clamped to [0, 2].
double nearest_distance(const Eigen::MatrixXd& centroids, int count, const Eigen::RowVectorXd& x,
                        int* which = nullptr) {
  double best = -2;
  int best_j = 0;
  for (int j = 0; j < count; ++j) {
    const double s = centroids.row(j).dot(x);
    if (s > best) {
      best = s;
      best_j = j;
    }
  }
  if (which) *which = best_j;
  return std::clamp(1.0 - best, 0.0, 2.0);
}

}  // namespace

SphericalKMeansResult spherical_kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                                       int max_iters) {
  const auto n = static_cast<int>(points.rows());
  require(k >= 1, "spherical_kmeans: k must be positive");
  require(n >= k, "spherical_kmeans: need at least k points");

  std::mt19937_64 rng(seed);
  SphericalKMeansResult out;
  out.centroids.resize(k, points.cols());

  // k-means++ seeding on cosine distance.
  std::vector<double> weight(n);
  std::vector<bool> chosen(n, false);
  const int first = std::uniform_int_distribution<int>(0, n - 1)(rng);
  out.centroids.row(0) = points.row(first);
  chosen[first] = true;
  for (int j = 1; j < k; ++j) {
    double total = 0;
    for (int i = 0; i < n; ++i) {
      const double d = chosen[i] ? 0.0 : nearest_distance(out.centroids, j, points.row(i));
      weight[i] = d * d;
      total += weight[i];
    }
    int pick = -1;
    if (total > 0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (int i = 0; i < n; ++i) {
        if (weight[i] <= 0) continue;
        pick = i;
        r -= weight[i];
        if (r < 0) break;
      }
    }
    if (pick < 0) {
      // All remaining points coincide with a centroid: take the next unchosen one.
      std::vector<int> rest;
      for (int i = 0; i < n; ++i)
        if (!chosen[i]) rest.push_back(i);
      pick = rest[std::uniform_int_distribution<std::size_t>(0, rest.size() - 1)(rng)];
    }
    out.centroids.row(j) = points.row(pick);
    chosen[pick] = true;
  }

  out.labels.assign(n, -1);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    double objective = 0;
    for (int i = 0; i < n; ++i) {
      int j = 0;
      objective += nearest_distance(out.centroids, k, points.row(i), &j);
      if (j != out.labels[i]) {
        out.labels[i] = j;
        changed = true;
      }
    }
    out.objective.push_back(objective);
    out.iterations = it + 1;
    if (!changed) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    for (int i = 0; i < n; ++i) sums.row(out.labels[i]) += points.row(i);
    for (int j = 0; j < k; ++j) {
      const double norm = sums.row(j).norm();
      if (norm > 1e-12) out.centroids.row(j) = sums.row(j) / norm;
    }
  }
  return out;
}

}  // namespace protofg3d
