#include "protofg3d/prototype_pool.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "binary_io.hpp"
#include "protofg3d/error.hpp"
#include "protofg3d/kmeans.hpp"

namespace protofg3d {

namespace {

constexpr double kAbsentMass = 1e-8;
constexpr double kJitterNorm = 1e-3;
constexpr char kPoolMagic[] = "PPOOL";
constexpr char kPoolVersion = '1';

std::uint64_t class_seed(std::uint64_t seed, int cls) {
  return seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(cls + 1));
}

}  // namespace

PrototypePool::PrototypePool(int classes, int per_class, int dim)
    : classes_(classes),
      per_class_(per_class),
      dim_(dim),
      prototypes_(Eigen::MatrixXd::Zero(Eigen::Index(classes) * per_class, dim)),
      steps_(classes, 0),
      exemplars_(std::size_t(classes) * per_class, -1) {
  require(classes >= 1 && per_class >= 1 && dim >= 1, "prototype pool dimensions must be positive");
}

double PrototypePool::max_norm_deviation() const {
  double worst = 0;
  for (Eigen::Index r = 0; r < prototypes_.rows(); ++r)
    worst = std::max(worst, std::abs(prototypes_.row(r).norm() - 1.0));
  return worst;
}

bool PrototypePool::operator==(const PrototypePool& other) const {
  return classes_ == other.classes_ && per_class_ == other.per_class_ && dim_ == other.dim_ &&
         prototypes_ == other.prototypes_ && exemplars_ == other.exemplars_;
}

PrototypePool init_prototypes(const std::vector<Eigen::MatrixXd>& per_class_embeddings, int K,
                              std::uint64_t seed) {
  require(!per_class_embeddings.empty(), "init_prototypes: no classes");
  require(K >= 1, "init_prototypes: K must be positive");
  const auto C = static_cast<int>(per_class_embeddings.size());
  const auto D = static_cast<int>(per_class_embeddings.front().cols());
  PrototypePool pool(C, K, D);

  for (int c = 0; c < C; ++c) {
    const Eigen::MatrixXd& data = per_class_embeddings[c];
    if (data.rows() == 0) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(c) + " has no embeddings");
    require(data.cols() == D, "init_prototypes: embedding dimension differs between classes");

    const std::uint64_t s = class_seed(seed, c);
    if (data.rows() >= K) {
      pool.class_prototypes(c) = spherical_kmeans(data, K, s).centroids;
      continue;
    }
    // Too few samples: cycle them up to K and jitter so the clusters are distinct.
    std::mt19937_64 rng(s);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd points(K, D);
    for (int k = 0; k < K; ++k) {
      Eigen::RowVectorXd jitter(D);
      for (int d = 0; d < D; ++d) jitter(d) = gauss(rng);
      jitter *= kJitterNorm / std::max(jitter.norm(), 1e-300);
      points.row(k) = data.row(k % data.rows()) + jitter;
      points.row(k).normalize();
    }
    pool.class_prototypes(c) = spherical_kmeans(points, K, s).centroids;
  }
  return pool;
}

std::vector<int> harden(const Eigen::MatrixXd& assignment) {
  std::vector<int> out(assignment.cols(), 0);
  for (Eigen::Index v = 0; v < assignment.cols(); ++v) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < assignment.rows(); ++k)
      if (assignment(k, v) > assignment(best, v)) best = k;
    out[v] = static_cast<int>(best);
  }
  return out;
}

ClusterMeans class_mean_features(const Eigen::MatrixXd& embeddings, const Eigen::MatrixXd& assignment,
                                 AssignMode mode) {
  require(embeddings.rows() == assignment.cols(), "class_mean_features: view count mismatch");
  const Eigen::Index K = assignment.rows();
  const Eigen::Index V = embeddings.rows();
  ClusterMeans out;
  out.means = Eigen::MatrixXd::Zero(K, embeddings.cols());
  out.mass = Eigen::VectorXd::Zero(K);
  out.members.assign(K, {});

  if (mode == AssignMode::Hard) {
    const std::vector<int> owner = harden(assignment);
    for (Eigen::Index v = 0; v < V; ++v) {
      out.members[owner[v]].push_back(static_cast<int>(v));
      out.means.row(owner[v]) += embeddings.row(v);
      out.mass(owner[v]) += 1;
    }
  } else {
    for (Eigen::Index v = 0; v < V; ++v) {
      for (Eigen::Index k = 0; k < K; ++k) {
        out.means.row(k) += assignment(k, v) * embeddings.row(v);
        out.mass(k) += assignment(k, v);
      }
    }
  }

  out.present.assign(K, false);
  for (Eigen::Index k = 0; k < K; ++k) {
    if (out.mass(k) >= kAbsentMass) {
      out.means.row(k) /= out.mass(k);
      out.present[k] = true;
    } else {
      out.means.row(k).setZero();
    }
  }
  return out;
}

void EmaConfig::validate() const {
  // eta0 == 1 is accepted as the identity update.
  require(eta0 > 0 && eta0 <= 1, "eta0 must lie in (0, 1]");
  require(switch_step >= 0, "switch_step must be nonnegative");
}

double EmaConfig::momentum_at(long t) const {
  if (t <= switch_step) return eta0;
  return std::min(0.999, 1.0 - 1.0 / static_cast<double>(t + 1));
}

void ema_update(PrototypePool& pool, int cls, const ClusterMeans& means, const EmaConfig& cfg) {
  cfg.validate();
  require(cls >= 0 && cls < pool.class_count(), "ema_update: class index out of range");
  require(means.means.rows() == pool.per_class() && means.means.cols() == pool.dim(),
          "ema_update: means shape does not match the pool");

  const long t = pool.step(cls) + 1;
  const double eta = cfg.momentum_at(t);
  auto protos = pool.class_prototypes(cls);
  for (int k = 0; k < pool.per_class(); ++k) {
    if (!means.present[k] || eta == 1.0) continue;
    protos.row(k) = eta * protos.row(k) + (1.0 - eta) * means.means.row(k);
    if (cfg.renormalize) {
      const double norm = protos.row(k).norm();
      if (norm > 1e-12) protos.row(k) /= norm;
    }
  }
  pool.set_step(cls, t);
}

std::vector<int> snap_to_nearest_sample(PrototypePool& pool, int cls, const Eigen::MatrixXd& class_embeddings,
                                        const std::vector<std::int64_t>& sample_ids) {
  require(cls >= 0 && cls < pool.class_count(), "snap_to_nearest_sample: class index out of range");
  if (class_embeddings.rows() == 0)
    throw Error(ErrorCode::EmptyClass, "class " + std::to_string(cls) + " has no samples to snap to");
  require(class_embeddings.cols() == pool.dim(), "snap_to_nearest_sample: dimension mismatch");
  require(sample_ids.empty() || sample_ids.size() == std::size_t(class_embeddings.rows()),
          "snap_to_nearest_sample: one id per sample expected");

  const Eigen::VectorXd sample_norms = class_embeddings.rowwise().norm();
  std::vector<int> chosen(pool.per_class());
  for (int k = 0; k < pool.per_class(); ++k) {
    const Eigen::RowVectorXd q = pool.prototype(cls, k);
    const double qn = q.norm();
    Eigen::Index best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < class_embeddings.rows(); ++i) {
      const double sim = class_embeddings.row(i).dot(q) / (sample_norms(i) * qn);
      if (sim > best_sim) {
        best_sim = sim;
        best = i;
      }
    }
    chosen[k] = static_cast<int>(best);
  }
  // Apply after the scan so every prototype is matched against its pre-snap value.
  for (int k = 0; k < pool.per_class(); ++k) {
    pool.class_prototypes(cls).row(k) = class_embeddings.row(chosen[k]);
    pool.set_exemplar(cls, k, sample_ids.empty() ? chosen[k] : sample_ids[chosen[k]]);
  }
  return chosen;
}

// ---------------------------------------------------------------------------
// PPOOL v1: "PPOOL1", u32 C, u32 K, u32 D, C*K*D f32, C*K i64 exemplar ids.

void write_pool(std::ostream& os, const PrototypePool& pool) {
  io::BinaryWriter w(os);
  w.bytes(kPoolMagic);
  w.u8(static_cast<std::uint8_t>(kPoolVersion));
  w.u32(static_cast<std::uint32_t>(pool.class_count()));
  w.u32(static_cast<std::uint32_t>(pool.per_class()));
  w.u32(static_cast<std::uint32_t>(pool.dim()));
  const Eigen::MatrixXd& q = pool.prototypes();
  for (Eigen::Index r = 0; r < q.rows(); ++r)
    for (Eigen::Index d = 0; d < q.cols(); ++d) w.f32(static_cast<float>(q(r, d)));
  for (std::int64_t id : pool.exemplars()) w.i64(id);
}

PrototypePool read_pool(std::istream& is, const std::string& source) {
  io::BinaryReader r(is, source, ErrorCode::FormatMismatch);
  const std::string magic = r.bytes(5, "pool magic");
  if (magic != kPoolMagic) throw Error(ErrorCode::FormatMismatch, source + ": bad pool magic (expected PPOOL)");
  const char version = static_cast<char>(r.u8("pool version"));
  if (version != kPoolVersion)
    throw Error(ErrorCode::FormatMismatch, source + ": unsupported pool version: expected 1, found " +
                                               std::string(1, version));
  const std::uint32_t C = r.u32("class count");
  const std::uint32_t K = r.u32("prototypes per class");
  const std::uint32_t D = r.u32("dimension");
  constexpr std::uint32_t kLimit = 1u << 20;
  if (C == 0 || K == 0 || D == 0 || C > kLimit || K > kLimit || D > kLimit ||
      std::uint64_t(C) * K * D > (std::uint64_t(1) << 32))
    throw Error(ErrorCode::FormatMismatch, source + ": invalid pool dimensions " + std::to_string(C) + "x" +
                                               std::to_string(K) + "x" + std::to_string(D));

  PrototypePool pool(static_cast<int>(C), static_cast<int>(K), static_cast<int>(D));
  Eigen::MatrixXd& q = pool.prototypes();
  for (Eigen::Index row = 0; row < q.rows(); ++row)
    for (Eigen::Index d = 0; d < q.cols(); ++d) q(row, d) = r.f32("prototype values");
  for (std::uint32_t c = 0; c < C; ++c)
    for (std::uint32_t k = 0; k < K; ++k) pool.set_exemplar(int(c), int(k), r.i64("exemplar ids"));
  if (!pool.all_finite()) throw Error(ErrorCode::FormatMismatch, source + ": non-finite prototype values");
  return pool;
}

void save_pool(const PrototypePool& pool, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for writing");
  write_pool(os, pool);
  if (!os) throw Error(ErrorCode::IoFailure, "failed writing '" + path + "'");
}

PrototypePool load_pool(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  PrototypePool pool = read_pool(is, path);
  if (is.peek() != std::char_traits<char>::eof())
    throw Error(ErrorCode::FormatMismatch, path + ": trailing bytes after pool payload");
  return pool;
}

}  // namespace protofg3d
