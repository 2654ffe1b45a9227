#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace protofg3d {

struct SphericalKMeansResult {
  Eigen::MatrixXd centroids;         // k x D, unit rows
  std::vector<int> labels;           // per input row
  std::vector<double> objective;     // sum of cosine distances, one entry per iteration
  int iterations = 0;
};

/// Spherical k-means (cosine distance) with k-means++ seeding. Rows of `points`
/// must be unit-norm and there must be at least k of them. Iterates until the
/// assignment stops changing or `max_iters` is reached; empty clusters keep
/// their previous centroid.
SphericalKMeansResult spherical_kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                                       int max_iters = 100);

}  // namespace protofg3d
