#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "protofg3d/prototype_pool.hpp"

namespace protofg3d {

enum class NegativePolicy { AllOtherClasses, Sampled };

struct LossConfig {
  double tau = 0.1;
  double alpha = 0.2;
  NegativePolicy negatives = NegativePolicy::AllOtherClasses;
  int sampled_negatives = 0;        // used by NegativePolicy::Sampled
  std::uint64_t sample_seed = 0;

  void validate() const;
};

struct PrototypeMatch {
  double distance = 0;  // 1 - h.q, in [0, 2]
  int index = 0;
};

/// min_k (1 - h.q_k) over the K x D prototypes of one class, ties to the
/// lowest k. `h` and every prototype must be unit-norm.
PrototypeMatch prototype_distance(const Eigen::Ref<const Eigen::RowVectorXd>& h,
                                  const Eigen::Ref<const Eigen::MatrixXd>& class_prototypes);

/// Softmax cross-entropy over negated class distances.
double cross_entropy_loss(const Eigen::Ref<const Eigen::RowVectorXd>& h, const PrototypePool& pool,
                          int true_class);

struct ContrastiveLoss {
  double value = 0;
  bool vacuous = false;  // no negatives: the loss is defined as 0
};

/// -log( e^{h.q+/tau} / (e^{h.q+/tau} + sum_neg e^{h.q-/tau}) ). `negatives` holds one prototype per row.
ContrastiveLoss contrastive_loss(const Eigen::Ref<const Eigen::RowVectorXd>& h,
                                 const Eigen::Ref<const Eigen::RowVectorXd>& positive,
                                 const Eigen::Ref<const Eigen::MatrixXd>& negatives, double tau);

/// Unit view embeddings (N x D) with per-row class labels. `positives[v]`
/// optionally fixes the positive prototype index of row v within its class
/// (e.g. from the transport assignment); empty or -1 means the distance argmin.
struct EmbeddedBatch {
  Eigen::MatrixXd embeddings;
  std::vector<int> labels;
  std::vector<int> positives;
};

struct LossReport {
  double l_ce = 0;
  double l_pc = 0;
  double l_total = 0;
  Eigen::MatrixXd grad_embeddings;  // dL_total / dh, N x D
  Eigen::MatrixXi argmin;           // N x C, minimizing prototype per class
  Eigen::VectorXd min_gap;          // per view, smallest best-vs-second-best distance gap over classes
  int vacuous_views = 0;
};

/// Batch means of the per-view L_ce and L_pc, L_total = L_ce + alpha L_pc, and
/// the analytic gradient w.r.t. every embedding (subgradient through the
/// argmin branch of the min-distance). Prototypes are treated as constants.
LossReport total_loss_batch(const EmbeddedBatch& batch, const PrototypePool& pool, const LossConfig& cfg);

/// Indices (into the pool's flat rows) of the contrastive negatives for a view
/// of class `true_class`, i.e. prototypes of the other classes, optionally subsampled.
std::vector<int> negative_rows(const PrototypePool& pool, int true_class, std::size_t view_index,
                               const LossConfig& cfg);

struct GradCheckResult {
  double max_error = 0;   // relative to the gradient's max magnitude, or absolute when it is ~0
  bool absolute = false;
  int excluded_views = 0; // too close to an argmin switch for finite differences
  int checked_coordinates = 0;
};

/// Central finite differences of L_total w.r.t. the raw (pre-normalization)
/// rows of `raw_batch.embeddings`, each mapped through u -> u / ||u||, compared
/// with the chain rule applied to the analytic embedding gradient.
GradCheckResult grad_check(const EmbeddedBatch& raw_batch, const PrototypePool& pool, const LossConfig& cfg,
                           double step = 1e-5);

}  // namespace protofg3d
