#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace protofg3d {

enum class PayloadKind : std::uint8_t { Raw = 0, Embedded = 1 };

/// One shape: V view vectors (raw encoder inputs or precomputed embeddings).
struct ViewBatch {
  std::uint32_t shape_id = 0;
  int label = 0;
  Eigen::MatrixXd views;  // V x D

  int view_count() const { return static_cast<int>(views.rows()); }
  bool operator==(const ViewBatch&) const = default;
};

struct Dataset {
  PayloadKind kind = PayloadKind::Raw;
  int views = 0;    // V
  int dim = 0;      // D
  int classes = 0;  // C
  std::vector<ViewBatch> shapes;

  bool operator==(const Dataset&) const = default;
  /// Shapes per class.
  std::vector<int> class_counts() const;
};

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

/// Within each class (in file order) every fifth shape goes to the test split.
TrainTestSplit split_train_test(const Dataset& dataset);

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthSpec {
  int classes = 4;
  int views = 12;
  int dim = 32;
  int subclusters = 3;
  std::vector<int> counts;  // shapes per class
  double noise = 0.02;      // per-coordinate Gaussian sigma
  std::uint64_t seed = 0;
  double min_separation = 0.3;  // cosine distance floor between any two anchors
  /// Optional fixed anchors, (classes * subclusters) x dim, class-major.
  Eigen::MatrixXd anchors;

  void validate() const;
};

struct SyntheticData {
  Dataset dataset;              // shapes grouped by class, sorted by subcluster inside a class
  TrainTestSplit split;
  Eigen::MatrixXd anchors;      // (classes * subclusters) x dim, unit rows
  std::vector<int> subcluster;  // per shape in `dataset`
};

/// Draws unit anchors with pairwise cosine distance >= min_separation
/// (rejection sampling, InfeasibleSeparation after 10,000 attempts), then per
/// shape one subcluster and V noisy copies of its anchor. Values are rounded
/// to f32 so the in-memory dataset equals its serialized form.
SyntheticData generate_synthetic(const SynthSpec& spec);

// ---------------------------------------------------------------------------
// PFGE v1 binary container and CSV interchange

void write_dataset(std::ostream& os, const Dataset& dataset);
Dataset read_dataset(std::istream& is, const std::string& source);
void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

/// `shape_id,view_id,label,f0..f{D-1}` with 9 significant digits.
void write_csv(const Dataset& dataset, const std::string& path);

struct ImportResult {
  Dataset dataset;
  std::vector<std::string> warnings;
};

/// Groups rows by shape_id (ascending), orders views by view_id, infers V, D
/// and C = max label + 1. Throws RaggedViews naming the first shape whose view
/// count deviates and ParseError with the offending line number.
ImportResult import_csv(const std::string& path);

/// PFGE or CSV, by file extension.
Dataset load_dataset(const std::string& path);

}  // namespace protofg3d
