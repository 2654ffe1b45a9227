#include "protofg3d/criterion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "protofg3d/error.hpp"

namespace protofg3d {

namespace {

constexpr double kUnitTolerance = 1e-6;

bool is_unit(const Eigen::Ref<const Eigen::RowVectorXd>& v) { return std::abs(v.norm() - 1.0) <= kUnitTolerance; }

PrototypeMatch nearest_in_class(const Eigen::Ref<const Eigen::RowVectorXd>& h,
                                const Eigen::Ref<const Eigen::MatrixXd>& protos, double* gap = nullptr) {
  PrototypeMatch best{std::numeric_limits<double>::infinity(), 0};
  double second = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < protos.rows(); ++k) {
    const double d = 1.0 - h.dot(protos.row(k));
    if (d < best.distance) {
      second = best.distance;
      best = {d, static_cast<int>(k)};
    } else if (d < second) {
      second = d;
    }
  }
  if (gap) *gap = second - best.distance;
  return best;
}

// log(sum exp(x)), fixed order.
double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double hi = x.maxCoeff();
  double sum = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) sum += std::exp(x(i) - hi);
  return hi + std::log(sum);
}

}  // namespace

void LossConfig::validate() const {
  require(tau > 0 && std::isfinite(tau), "tau must be positive");
  require(alpha >= 0 && std::isfinite(alpha), "alpha must be nonnegative");
  require(negatives != NegativePolicy::Sampled || sampled_negatives >= 1,
          "sampled negative policy needs a positive sample count");
}

PrototypeMatch prototype_distance(const Eigen::Ref<const Eigen::RowVectorXd>& h,
                                  const Eigen::Ref<const Eigen::MatrixXd>& class_prototypes) {
  require(h.size() == class_prototypes.cols(), "prototype_distance: dimension mismatch");
  require(class_prototypes.rows() >= 1, "prototype_distance: no prototypes");
  require(is_unit(h), "prototype_distance: embedding is not unit-norm");
  for (Eigen::Index k = 0; k < class_prototypes.rows(); ++k)
    require(is_unit(class_prototypes.row(k)), "prototype_distance: prototype is not unit-norm");
  return nearest_in_class(h, class_prototypes);
}

double cross_entropy_loss(const Eigen::Ref<const Eigen::RowVectorXd>& h, const PrototypePool& pool,
                          int true_class) {
  require(true_class >= 0 && true_class < pool.class_count(), "cross_entropy_loss: invalid class index");
  Eigen::VectorXd neg_distance(pool.class_count());
  for (int c = 0; c < pool.class_count(); ++c)
    neg_distance(c) = -prototype_distance(h, pool.class_prototypes(c)).distance;
  return std::max(0.0, log_sum_exp(neg_distance) - neg_distance(true_class));
}

ContrastiveLoss contrastive_loss(const Eigen::Ref<const Eigen::RowVectorXd>& h,
                                 const Eigen::Ref<const Eigen::RowVectorXd>& positive,
                                 const Eigen::Ref<const Eigen::MatrixXd>& negatives, double tau) {
  require(tau > 0, "contrastive_loss: tau must be positive");
  require(h.size() == positive.size(), "contrastive_loss: dimension mismatch");
  if (negatives.rows() == 0) return {0.0, true};
  require(negatives.cols() == h.size(), "contrastive_loss: dimension mismatch");
  Eigen::VectorXd logits(negatives.rows() + 1);
  logits(0) = h.dot(positive) / tau;
  for (Eigen::Index j = 0; j < negatives.rows(); ++j) logits(j + 1) = h.dot(negatives.row(j)) / tau;
  return {std::max(0.0, log_sum_exp(logits) - logits(0)), false};
}

std::vector<int> negative_rows(const PrototypePool& pool, int true_class, std::size_t view_index,
                               const LossConfig& cfg) {
  const int K = pool.per_class();
  std::vector<int> rows;
  rows.reserve(std::size_t(pool.class_count() - 1) * K);
  for (int c = 0; c < pool.class_count(); ++c)
    if (c != true_class)
      for (int k = 0; k < K; ++k) rows.push_back(c * K + k);
  if (cfg.negatives == NegativePolicy::Sampled && std::size_t(cfg.sampled_negatives) < rows.size()) {
    std::mt19937_64 rng(cfg.sample_seed ^ (0xD1B54A32D192ED03ULL * (view_index + 1)));
    const std::size_t n = cfg.sampled_negatives;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(i, rows.size() - 1)(rng);
      std::swap(rows[i], rows[j]);
    }
    rows.resize(n);
    std::sort(rows.begin(), rows.end());
  }
  return rows;
}

LossReport total_loss_batch(const EmbeddedBatch& batch, const PrototypePool& pool, const LossConfig& cfg) {
  cfg.validate();
  const Eigen::MatrixXd& H = batch.embeddings;
  const auto N = static_cast<int>(H.rows());
  const int C = pool.class_count();
  require(N >= 1, "total_loss_batch: empty batch");
  require(H.cols() == pool.dim(), "total_loss_batch: embedding dimension does not match the pool");
  require(batch.labels.size() == std::size_t(N), "total_loss_batch: one label per view expected");
  require(batch.positives.empty() || batch.positives.size() == std::size_t(N),
          "total_loss_batch: positives must be empty or one per view");

  const Eigen::MatrixXd& Q = pool.prototypes();
  LossReport report;
  report.grad_embeddings = Eigen::MatrixXd::Zero(N, H.cols());
  report.argmin.resize(N, C);
  report.min_gap.resize(N);

  double sum_ce = 0, sum_pc = 0;
  Eigen::VectorXd neg_distance(C);
  for (int v = 0; v < N; ++v) {
    const auto h = H.row(v);
    const int y = batch.labels[v];
    require(y >= 0 && y < C, "total_loss_batch: label out of range at view " + std::to_string(v));
    require(is_unit(h), "total_loss_batch: embedding " + std::to_string(v) + " is not unit-norm");

    double min_gap = std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
      double gap = 0;
      const PrototypeMatch m = nearest_in_class(h, pool.class_prototypes(c), &gap);
      neg_distance(c) = -m.distance;
      report.argmin(v, c) = m.index;
      min_gap = std::min(min_gap, gap);
    }
    report.min_gap(v) = min_gap;

    // Cross-entropy over -d_c; d/dh of d_c is -q_{c, argmin}.
    const double lse = log_sum_exp(neg_distance);
    sum_ce += lse - neg_distance(y);
    Eigen::RowVectorXd g_ce = -Q.row(y * pool.per_class() + report.argmin(v, y));
    for (int c = 0; c < C; ++c)
      g_ce += std::exp(neg_distance(c) - lse) * Q.row(c * pool.per_class() + report.argmin(v, c));

    // Contrastive term against the other classes' prototypes.
    const int k_pos = (!batch.positives.empty() && batch.positives[v] >= 0) ? batch.positives[v] : report.argmin(v, y);
    require(k_pos < pool.per_class(), "total_loss_batch: positive index out of range");
    const auto q_pos = Q.row(y * pool.per_class() + k_pos);
    const std::vector<int> negatives = negative_rows(pool, y, std::size_t(v), cfg);
    Eigen::RowVectorXd g_pc = Eigen::RowVectorXd::Zero(H.cols());
    if (negatives.empty()) {
      ++report.vacuous_views;
    } else {
      Eigen::VectorXd logits(negatives.size() + 1);
      logits(0) = h.dot(q_pos) / cfg.tau;
      for (std::size_t j = 0; j < negatives.size(); ++j) logits(j + 1) = h.dot(Q.row(negatives[j])) / cfg.tau;
      const double lse_pc = log_sum_exp(logits);
      sum_pc += lse_pc - logits(0);
      g_pc = (std::exp(logits(0) - lse_pc) - 1.0) * q_pos;
      for (std::size_t j = 0; j < negatives.size(); ++j) g_pc += std::exp(logits(j + 1) - lse_pc) * Q.row(negatives[j]);
      g_pc /= cfg.tau;
    }
    report.grad_embeddings.row(v) = (g_ce + cfg.alpha * g_pc) / N;
  }

  report.l_ce = sum_ce / N;
  report.l_pc = sum_pc / N;
  report.l_total = report.l_ce + cfg.alpha * report.l_pc;
  return report;
}

GradCheckResult grad_check(const EmbeddedBatch& raw_batch, const PrototypePool& pool, const LossConfig& cfg,
                           double step) {
  require(step > 0, "grad_check: step must be positive");
  const Eigen::MatrixXd& U = raw_batch.embeddings;
  const Eigen::VectorXd norms = U.rowwise().norm();
  require(norms.minCoeff() > 1e-12, "grad_check: zero-norm raw embedding");

  auto loss_at = [&](const Eigen::MatrixXd& raw) {
    EmbeddedBatch b{raw.rowwise().normalized(), raw_batch.labels, raw_batch.positives};
    return total_loss_batch(b, pool, cfg);
  };

  const LossReport base = loss_at(U);
  // dL/du = (I - h h^T) g / ||u||
  Eigen::MatrixXd analytic(U.rows(), U.cols());
  for (Eigen::Index v = 0; v < U.rows(); ++v) {
    const Eigen::RowVectorXd h = U.row(v) / norms(v);
    const Eigen::RowVectorXd g = base.grad_embeddings.row(v);
    analytic.row(v) = (g - g.dot(h) * h) / norms(v);
  }

  GradCheckResult out;
  std::vector<bool> excluded(U.rows(), false);
  for (Eigen::Index v = 0; v < U.rows(); ++v) {
    // A step moves every distance by at most step / ||u||; keep well clear of argmin switches.
    if (base.min_gap(v) < 10.0 * step / norms(v)) {
      excluded[v] = true;
      ++out.excluded_views;
    }
  }

  Eigen::MatrixXd numeric = Eigen::MatrixXd::Zero(U.rows(), U.cols());
  Eigen::MatrixXd probe = U;
  for (Eigen::Index v = 0; v < U.rows(); ++v) {
    if (excluded[v]) continue;
    for (Eigen::Index d = 0; d < U.cols(); ++d) {
      const double saved = probe(v, d);
      probe(v, d) = saved + step;
      const double up = loss_at(probe).l_total;
      probe(v, d) = saved - step;
      const double down = loss_at(probe).l_total;
      probe(v, d) = saved;
      numeric(v, d) = (up - down) / (2 * step);
      ++out.checked_coordinates;
    }
  }

  double scale = 0, worst = 0;
  for (Eigen::Index v = 0; v < U.rows(); ++v) {
    if (excluded[v]) continue;
    for (Eigen::Index d = 0; d < U.cols(); ++d) {
      scale = std::max({scale, std::abs(analytic(v, d)), std::abs(numeric(v, d))});
      worst = std::max(worst, std::abs(analytic(v, d) - numeric(v, d)));
    }
  }
  out.absolute = scale < 1e-8;
  out.max_error = out.absolute ? worst : worst / scale;
  return out;
}

}  // namespace protofg3d
