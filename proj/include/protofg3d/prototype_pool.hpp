#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace protofg3d {

/// C classes x K prototypes x D dims, stored as a (C*K) x D matrix with the
/// prototypes of class c in rows [c*K, c*K + K). Every public mutation keeps
/// rows unit-norm (EMA with renormalization off is the one exception).
class PrototypePool {
 public:
  PrototypePool() = default;
  PrototypePool(int classes, int per_class, int dim);

  int class_count() const { return classes_; }
  int per_class() const { return per_class_; }
  int dim() const { return dim_; }

  const Eigen::MatrixXd& prototypes() const { return prototypes_; }
  Eigen::MatrixXd& prototypes() { return prototypes_; }

  auto class_prototypes(int c) const { return prototypes_.middleRows(Eigen::Index(c) * per_class_, per_class_); }
  auto class_prototypes(int c) { return prototypes_.middleRows(Eigen::Index(c) * per_class_, per_class_); }
  auto prototype(int c, int k) const { return prototypes_.row(Eigen::Index(c) * per_class_ + k); }

  /// Number of EMA updates applied to class c so far.
  long step(int c) const { return steps_.at(c); }
  void set_step(int c, long t) { steps_.at(c) = t; }

  /// Training-sample id a prototype was snapped to, or -1.
  std::int64_t exemplar(int c, int k) const { return exemplars_.at(std::size_t(c) * per_class_ + k); }
  void set_exemplar(int c, int k, std::int64_t id) { exemplars_.at(std::size_t(c) * per_class_ + k) = id; }
  const std::vector<std::int64_t>& exemplars() const { return exemplars_; }

  /// max_r | ||row_r|| - 1 |
  double max_norm_deviation() const;
  bool all_finite() const { return prototypes_.allFinite(); }

  bool operator==(const PrototypePool& other) const;

 private:
  int classes_ = 0;
  int per_class_ = 0;
  int dim_ = 0;
  Eigen::MatrixXd prototypes_;
  std::vector<long> steps_;
  std::vector<std::int64_t> exemplars_;
};

// ---------------------------------------------------------------------------
// Initialization

/// Per class, K spherical k-means centroids of that class's unit embeddings.
/// `per_class_embeddings[c]` is V^c x D. Classes with fewer than K embeddings
/// are replicated cyclically and jittered (norm 1e-3, seeded) before clustering.
/// Throws EmptyClass for a class without embeddings.
PrototypePool init_prototypes(const std::vector<Eigen::MatrixXd>& per_class_embeddings, int K,
                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// Online update

enum class AssignMode { Hard, Soft };

struct ClusterMeans {
  Eigen::MatrixXd means;                 // K x D; rows of absent prototypes are zero
  std::vector<bool> present;             // prototype received mass >= 1e-8
  Eigen::VectorXd mass;                  // total (soft) mass per prototype
  std::vector<std::vector<int>> members; // hard sets S_k (empty in soft mode)
};

/// Argmax prototype per column of a K x V assignment, ties to the lowest k.
std::vector<int> harden(const Eigen::MatrixXd& assignment);

/// Per-prototype mean of the view embeddings (V x D) assigned to it by the
/// K x V assignment matrix: argmax sets in Hard mode, mass-weighted in Soft mode.
ClusterMeans class_mean_features(const Eigen::MatrixXd& embeddings, const Eigen::MatrixXd& assignment,
                                 AssignMode mode = AssignMode::Hard);

struct EmaConfig {
  double eta0 = 0.999;
  long switch_step = 0;
  bool renormalize = true;

  void validate() const;
  /// Momentum for update number t (1-based).
  double momentum_at(long t) const;
};

/// q <- eta_t q + (1 - eta_t) mean for every present prototype of `cls`, where
/// t is the class's step counter after increment.
void ema_update(PrototypePool& pool, int cls, const ClusterMeans& means, const EmaConfig& cfg);

/// Replaces each prototype of `cls` with the most cosine-similar row of
/// `class_embeddings` (ties to the lowest row) and records `sample_ids[row]`
/// (or the row index if `sample_ids` is empty) as its exemplar. Returns the
/// chosen row per prototype.
std::vector<int> snap_to_nearest_sample(PrototypePool& pool, int cls, const Eigen::MatrixXd& class_embeddings,
                                        const std::vector<std::int64_t>& sample_ids = {});

// ---------------------------------------------------------------------------
// PPOOL v1 persistence

void write_pool(std::ostream& os, const PrototypePool& pool);
PrototypePool read_pool(std::istream& is, const std::string& source);
void save_pool(const PrototypePool& pool, const std::string& path);
PrototypePool load_pool(const std::string& path);

}  // namespace protofg3d
