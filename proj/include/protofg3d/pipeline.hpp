#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "protofg3d/config.hpp"
#include "protofg3d/data.hpp"
#include "protofg3d/encoder.hpp"
#include "protofg3d/prototype_pool.hpp"

namespace protofg3d {

struct Model {
  Encoder encoder;
  PrototypePool pool;
  TrainConfig config;
};

// ---------------------------------------------------------------------------
// Training

struct EpochMetrics {
  int epoch = 0;
  double l_ce = 0;
  double l_pc = 0;
  double l_total = 0;
  double aia = 0;
  double aca = 0;
};

/// `epoch=<n> l_ce=<f> l_pc=<f> l_total=<f> aia=<f> aca=<f>`, 6 decimals.
std::string format_metrics_line(const EpochMetrics& m);

struct TrainResult {
  Model model;
  std::vector<EpochMetrics> log;
};

/// encode -> per-class transport assignment -> EMA prototype update -> loss ->
/// backprop -> SGD, per minibatch of shapes. The pool is initialized by
/// spherical k-means on the untrained encoder's embeddings. Per-epoch
/// accuracies are measured on `data.test` (on `data.train` when the test split
/// is empty). Parameters are rounded to f32 after the last step so the
/// returned model equals its serialized form.
TrainResult train(const TrainTestSplit& data, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Inference

struct ViewPrediction {
  int cls = 0;
  int k = 0;
  double distance = 0;
};

struct ShapePrediction {
  int cls = 0;
  double distance = 0;
  std::vector<ViewPrediction> per_view;
};

/// Nearest prototype of one unit embedding over every class, ties to the lowest (c, k).
ViewPrediction nearest_prototype(const PrototypePool& pool, const Eigen::Ref<const Eigen::RowVectorXd>& h);

/// Shape-level decision from unit view embeddings (V x D).
ShapePrediction predict_embedded(const PrototypePool& pool, const Eigen::MatrixXd& embeddings, Aggregation aggregation);

/// Encodes raw views (V x D_in) and predicts with the model's aggregation rule.
ShapePrediction predict_shape(const Model& model, const Eigen::MatrixXd& raw_views);

struct EvalReport {
  double aia = 0;
  double aca = 0;
  double per_view_aia = 0;
  Eigen::VectorXd per_class_accuracy;  // NaN for classes without test shapes
  Eigen::MatrixXi confusion;           // rows: true class, cols: predicted
  std::vector<int> excluded_classes;   // no test shapes, left out of ACA
};

/// AIA = trace / total, ACA = mean of row accuracies over non-empty rows.
EvalReport report_from_confusion(const Eigen::MatrixXi& confusion);

EvalReport evaluate(const Model& model, const Dataset& test);

/// Same encoder, optimizer, schedule and seed with a linear C-way softmax head
/// in place of the prototypes; shapes are classified by their mean view logits.
EvalReport baseline_train_eval(const TrainTestSplit& data, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Interpretability

struct PrototypeHit {
  int cls = 0;
  int k = 0;
  double similarity = 0;
  std::int64_t exemplar = -1;
};

struct ViewHit {
  int view = 0;
  int k = 0;
  double similarity = 0;
};

struct ShapeInspection {
  std::uint32_t shape_id = 0;
  int label = 0;
  int predicted = 0;
  std::vector<PrototypeHit> top_prototypes;  // by similarity of the normalized mean embedding
  std::vector<ViewHit> top_views;            // best 5 views against the predicted class
};

struct InspectReport {
  std::vector<ShapeInspection> shapes;
};

InspectReport inspect(const Model& model, const Dataset& dataset, int m);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

struct SweepCell {
  std::vector<std::pair<std::string, std::string>> settings;
  EvalReport report;
  std::vector<EpochMetrics> log;
};

/// Trains and evaluates every combination of the axis values (first axis
/// varies slowest). Cells run on up to `threads` workers; each cell is
/// independent and deterministic.
std::vector<SweepCell> run_sweep(const TrainTestSplit& data, const TrainConfig& base, const std::vector<SweepAxis>& grid,
                                 int threads = 1);

// ---------------------------------------------------------------------------
// Persistence and reports

void write_model(std::ostream& os, const Model& model);
Model read_model(std::istream& is, const std::string& source);
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

std::string eval_report_text(const EvalReport& report);
std::string eval_report_json(const EvalReport& report);
std::string inspect_report_json(const InspectReport& report);

}  // namespace protofg3d
