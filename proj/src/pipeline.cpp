#include "protofg3d/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "binary_io.hpp"
#include "protofg3d/criterion.hpp"
#include "protofg3d/error.hpp"
#include "protofg3d/transport.hpp"

namespace protofg3d {

namespace {

constexpr char kModelMagic[] = "PFGM1";

struct StackedBatch {
  Eigen::MatrixXd raw;      // (shapes * V) x D_in
  std::vector<int> labels;  // per row
};

StackedBatch stack_shapes(const Dataset& data, const std::vector<int>& order, std::size_t begin, std::size_t end) {
  StackedBatch b;
  const Eigen::Index V = data.views;
  b.raw.resize(Eigen::Index(end - begin) * V, data.dim);
  b.labels.reserve((end - begin) * V);
  for (std::size_t i = begin; i < end; ++i) {
    const ViewBatch& s = data.shapes[order[i]];
    require(s.views.rows() == V && s.views.cols() == data.dim, "shape " + std::to_string(s.shape_id) +
                                                                   " does not match the dataset dimensions");
    b.raw.middleRows(Eigen::Index(i - begin) * V, V) = s.views;
    b.labels.insert(b.labels.end(), V, s.label);
  }
  return b;
}

std::vector<int> identity_order(std::size_t n) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  return order;
}

// Per class: stacked unit embeddings of every training view and their ids (shape_id * V + view).
struct ClassEmbeddings {
  std::vector<Eigen::MatrixXd> embeddings;
  std::vector<std::vector<std::int64_t>> ids;
};

ClassEmbeddings embed_by_class(const Encoder& encoder, const Dataset& data) {
  ClassEmbeddings out;
  out.embeddings.resize(data.classes);
  out.ids.resize(data.classes);
  std::vector<std::vector<int>> members(data.classes);
  for (std::size_t i = 0; i < data.shapes.size(); ++i) members.at(data.shapes[i].label).push_back(int(i));
  for (int c = 0; c < data.classes; ++c) {
    if (members[c].empty()) {
      out.embeddings[c].resize(0, encoder.output_dim());
      continue;
    }
    const StackedBatch b = stack_shapes(data, members[c], 0, members[c].size());
    out.embeddings[c] = encode(encoder, b.raw);
    for (int i : members[c])
      for (int v = 0; v < data.views; ++v)
        out.ids[c].push_back(std::int64_t(data.shapes[i].shape_id) * data.views + v);
  }
  return out;
}

void round_to_f32(Eigen::MatrixXd& m) { m = m.cast<float>().cast<double>(); }
void round_to_f32(Eigen::VectorXd& v) { v = v.cast<float>().cast<double>(); }

void round_to_storage(Model& model) {
  round_to_f32(model.pool.prototypes());
  for (DenseLayer& l : model.encoder.layers()) {
    round_to_f32(l.weight);
    round_to_f32(l.bias);
  }
}

const Dataset& eval_split(const TrainTestSplit& data) { return data.test.shapes.empty() ? data.train : data.test; }

void check_training_data(const TrainTestSplit& data) {
  if (data.train.shapes.empty()) throw Error(ErrorCode::EmptyClass, "training split is empty");
  const std::vector<int> counts = data.train.class_counts();
  for (int c = 0; c < data.train.classes; ++c)
    if (counts[c] == 0) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(c) + " has no training shapes");
}

}  // namespace

std::string format_metrics_line(const EpochMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "epoch=%d l_ce=%.6f l_pc=%.6f l_total=%.6f aia=%.6f aca=%.6f", m.epoch, m.l_ce,
                m.l_pc, m.l_total, m.aia, m.aca);
  return buf;
}

// ---------------------------------------------------------------------------

TrainResult train(const TrainTestSplit& data, const TrainConfig& cfg) {
  cfg.validate();
  check_training_data(data);
  const Dataset& train_set = data.train;
  const int C = train_set.classes;

  const long steps_per_epoch = static_cast<long>((train_set.shapes.size() + cfg.batch_size - 1) / cfg.batch_size);
  const long total_steps = steps_per_epoch * cfg.epochs;
  const long warmup_steps = steps_per_epoch * cfg.warmup_epochs;
  const transport::SolverConfig solver = cfg.solver_config();
  const LossConfig loss_cfg = cfg.loss_config();
  const EmaConfig ema_cfg = cfg.ema_config(steps_per_epoch);
  const AssignMode assign_mode = cfg.soft_assign ? AssignMode::Soft : AssignMode::Hard;

  TrainResult result;
  Model& model = result.model;
  model.config = cfg;
  model.encoder = Encoder::create(train_set.dim, cfg.embed_dim, cfg.hidden_dim, cfg.seed);
  model.pool = init_prototypes(embed_by_class(model.encoder, train_set).embeddings, cfg.K, cfg.seed);
  OptimizerState optimizer = make_optimizer(model.encoder.layers(), cfg.lr0, cfg.momentum, cfg.weight_decay);

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5DEECE66DULL);
  std::vector<int> order = identity_order(train_set.shapes.size());
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sum_ce = 0, sum_pc = 0, sum_total = 0;
    long views_seen = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), begin + std::size_t(cfg.batch_size));
      const StackedBatch batch = stack_shapes(train_set, order, begin, end);
      EmbeddedBatch embedded{encode(model.encoder, batch.raw), batch.labels, {}};
      const auto N = static_cast<Eigen::Index>(batch.labels.size());

      // Class-wise assignment of this batch's views, then the prototype update.
      std::vector<int> assigned(N, -1);
      for (int c = 0; c < C; ++c) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index r = 0; r < N; ++r)
          if (batch.labels[r] == c) rows.push_back(r);
        if (rows.empty()) continue;
        Eigen::MatrixXd H(Eigen::Index(rows.size()), embedded.embeddings.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) H.row(Eigen::Index(i)) = embedded.embeddings.row(rows[i]);
        const Eigen::MatrixXd S = model.pool.class_prototypes(c) * H.transpose();
        // Unconverged solves still return the best iterate, which is good enough to cluster with.
        const transport::Assignment<double> plan = transport::solve(S, solver);
        const ClusterMeans means = class_mean_features(H, plan.Z, assign_mode);
        ema_update(model.pool, c, means, ema_cfg);
        const std::vector<int> owner = harden(plan.Z);
        for (std::size_t i = 0; i < rows.size(); ++i) assigned[rows[i]] = owner[i];
      }
      if (cfg.positive == PositivePolicy::Assigned) embedded.positives = std::move(assigned);

      const LossReport loss = total_loss_batch(embedded, model.pool, loss_cfg);
      if (!std::isfinite(loss.l_total) || !loss.grad_embeddings.allFinite())
        throw Error(ErrorCode::NonFiniteLoss,
                    "epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ": loss is not finite");
      sum_ce += loss.l_ce * double(N);
      sum_pc += loss.l_pc * double(N);
      sum_total += loss.l_total * double(N);
      views_seen += N;

      const EncoderGradients grads = encode_backward(model.encoder, batch.raw, loss.grad_embeddings);
      optimizer.lr = scheduled_learning_rate(step, total_steps, warmup_steps, cfg.lr0);
      sgd_step(model.encoder.layers(), grads.layers, optimizer);
    }

    if (epoch == cfg.epochs) {
      if (cfg.snap_final_epoch) {
        const ClassEmbeddings all = embed_by_class(model.encoder, train_set);
        for (int c = 0; c < C; ++c) snap_to_nearest_sample(model.pool, c, all.embeddings[c], all.ids[c]);
      }
      round_to_storage(model);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.l_ce = sum_ce / double(views_seen);
    m.l_pc = sum_pc / double(views_seen);
    m.l_total = sum_total / double(views_seen);
    const EvalReport eval = evaluate(model, eval_split(data));
    m.aia = eval.aia;
    m.aca = eval.aca;
    result.log.push_back(m);
  }
  return result;
}

// ---------------------------------------------------------------------------

ViewPrediction nearest_prototype(const PrototypePool& pool, const Eigen::Ref<const Eigen::RowVectorXd>& h) {
  ViewPrediction best{0, 0, std::numeric_limits<double>::infinity()};
  for (int c = 0; c < pool.class_count(); ++c) {
    for (int k = 0; k < pool.per_class(); ++k) {
      const double d = 1.0 - h.dot(pool.prototype(c, k));
      if (d < best.distance) best = {c, k, d};
    }
  }
  return best;
}

ShapePrediction predict_embedded(const PrototypePool& pool, const Eigen::MatrixXd& embeddings,
                                 Aggregation aggregation) {
  require(embeddings.rows() >= 1, "predict: shape has no views");
  require(embeddings.cols() == pool.dim(), "predict: embedding dimension " + std::to_string(embeddings.cols()) +
                                               " does not match the pool dimension " + std::to_string(pool.dim()));
  ShapePrediction out;
  out.distance = std::numeric_limits<double>::infinity();
  for (Eigen::Index v = 0; v < embeddings.rows(); ++v) {
    const ViewPrediction p = nearest_prototype(pool, embeddings.row(v));
    out.per_view.push_back(p);
    if (p.distance < out.distance) {
      out.distance = p.distance;
      out.cls = p.cls;
    }
  }
  if (aggregation == Aggregation::MeanEmbedding) {
    const Eigen::RowVectorXd mean = embeddings.colwise().mean();
    const double norm = mean.norm();
    if (norm > 1e-12) {
      const ViewPrediction p = nearest_prototype(pool, mean / norm);
      out.cls = p.cls;
      out.distance = p.distance;
    }
  }
  return out;
}

ShapePrediction predict_shape(const Model& model, const Eigen::MatrixXd& raw_views) {
  if (raw_views.cols() != model.encoder.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "views have dimension " + std::to_string(raw_views.cols()) +
                                                  ", model expects " + std::to_string(model.encoder.input_dim()));
  return predict_embedded(model.pool, encode(model.encoder, raw_views), model.config.aggregation);
}

EvalReport report_from_confusion(const Eigen::MatrixXi& confusion) {
  require(confusion.rows() == confusion.cols(), "confusion matrix must be square");
  EvalReport r;
  r.confusion = confusion;
  const long long total = confusion.cast<long long>().sum();
  const long long correct = confusion.cast<long long>().trace();
  r.aia = total > 0 ? double(correct) / double(total) : 0.0;
  r.per_class_accuracy = Eigen::VectorXd::Constant(confusion.rows(), std::numeric_limits<double>::quiet_NaN());
  double acc_sum = 0;
  int counted = 0;
  for (Eigen::Index c = 0; c < confusion.rows(); ++c) {
    const long long row = confusion.row(c).cast<long long>().sum();
    if (row == 0) {
      r.excluded_classes.push_back(static_cast<int>(c));
      continue;
    }
    r.per_class_accuracy(c) = double(confusion(c, c)) / double(row);
    acc_sum += r.per_class_accuracy(c);
    ++counted;
  }
  r.aca = counted > 0 ? acc_sum / counted : 0.0;
  return r;
}

EvalReport evaluate(const Model& model, const Dataset& test) {
  const int C = model.pool.class_count();
  Eigen::MatrixXi confusion = Eigen::MatrixXi::Zero(C, C);
  long views_total = 0, views_correct = 0;
  for (const ViewBatch& s : test.shapes) {
    require(s.label >= 0 && s.label < C, "evaluate: label " + std::to_string(s.label) + " outside the model's classes");
    const ShapePrediction p = predict_shape(model, s.views);
    ++confusion(s.label, p.cls);
    for (const ViewPrediction& v : p.per_view) {
      ++views_total;
      views_correct += v.cls == s.label;
    }
  }
  EvalReport r = report_from_confusion(confusion);
  r.per_view_aia = views_total > 0 ? double(views_correct) / double(views_total) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

struct SoftmaxHead {
  DenseLayer layer;  // C x D

  Eigen::MatrixXd logits(const Eigen::MatrixXd& H) const {
    Eigen::MatrixXd z = H * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    return z;
  }
};

int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i)
    if (row(i) > row(best)) best = i;
  return static_cast<int>(best);
}

EvalReport evaluate_softmax(const Encoder& encoder, const SoftmaxHead& head, const Dataset& test, int C) {
  Eigen::MatrixXi confusion = Eigen::MatrixXi::Zero(C, C);
  long views_total = 0, views_correct = 0;
  for (const ViewBatch& s : test.shapes) {
    const Eigen::MatrixXd z = head.logits(encode(encoder, s.views));
    ++confusion(s.label, argmax(z.colwise().mean()));
    for (Eigen::Index v = 0; v < z.rows(); ++v) {
      ++views_total;
      views_correct += argmax(z.row(v)) == s.label;
    }
  }
  EvalReport r = report_from_confusion(confusion);
  r.per_view_aia = views_total > 0 ? double(views_correct) / double(views_total) : 0.0;
  return r;
}

}  // namespace

EvalReport baseline_train_eval(const TrainTestSplit& data, const TrainConfig& cfg) {
  cfg.validate();
  check_training_data(data);
  const Dataset& train_set = data.train;
  const int C = train_set.classes;
  const long steps_per_epoch = static_cast<long>((train_set.shapes.size() + cfg.batch_size - 1) / cfg.batch_size);
  const long total_steps = steps_per_epoch * cfg.epochs;
  const long warmup_steps = steps_per_epoch * cfg.warmup_epochs;

  std::vector<DenseLayer> params = Encoder::create(train_set.dim, cfg.embed_dim, cfg.hidden_dim, cfg.seed).layers();
  const std::size_t encoder_layers = params.size();
  params.push_back(Encoder::create(cfg.embed_dim, C, 0, cfg.seed ^ 0xA5A5A5A5ULL).layers().front());
  OptimizerState optimizer = make_optimizer(params, cfg.lr0, cfg.momentum, cfg.weight_decay);

  auto split_params = [&](const std::vector<DenseLayer>& p) {
    return std::pair{Encoder(std::vector<DenseLayer>(p.begin(), p.begin() + std::ptrdiff_t(encoder_layers))),
                     SoftmaxHead{p.back()}};
  };

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5DEECE66DULL);
  std::vector<int> order = identity_order(train_set.shapes.size());
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), begin + std::size_t(cfg.batch_size));
      const StackedBatch batch = stack_shapes(train_set, order, begin, end);
      const auto [encoder, head] = split_params(params);
      const Eigen::MatrixXd H = encode(encoder, batch.raw);
      const Eigen::MatrixXd z = head.logits(H);
      const auto N = static_cast<double>(H.rows());

      // d(mean CE)/dz = (softmax(z) - onehot) / N
      Eigen::MatrixXd g(z.rows(), z.cols());
      for (Eigen::Index v = 0; v < z.rows(); ++v) {
        const Eigen::RowVectorXd e = (z.row(v).array() - z.row(v).maxCoeff()).exp();
        g.row(v) = e / e.sum();
        g(v, batch.labels[v]) -= 1.0;
      }
      g /= N;
      if (!g.allFinite())
        throw Error(ErrorCode::NonFiniteLoss,
                    "baseline epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ": non-finite gradient");

      std::vector<DenseLayer> grads = encode_backward(encoder, batch.raw, g * head.layer.weight).layers;
      grads.push_back({g.transpose() * H, g.colwise().sum().transpose()});
      optimizer.lr = scheduled_learning_rate(step, total_steps, warmup_steps, cfg.lr0);
      sgd_step(params, grads, optimizer);
    }
  }
  const auto [encoder, head] = split_params(params);
  return evaluate_softmax(encoder, head, eval_split(data), C);
}

// ---------------------------------------------------------------------------

InspectReport inspect(const Model& model, const Dataset& dataset, int m) {
  require(m >= 1, "inspect: m must be >= 1");
  const PrototypePool& pool = model.pool;
  InspectReport report;
  for (const ViewBatch& s : dataset.shapes) {
    const Eigen::MatrixXd H = encode(model.encoder, s.views);
    const ShapePrediction pred = predict_embedded(pool, H, model.config.aggregation);
    ShapeInspection out;
    out.shape_id = s.shape_id;
    out.label = s.label;
    out.predicted = pred.cls;

    Eigen::RowVectorXd mean = H.colwise().mean();
    if (mean.norm() > 1e-12) mean.normalize();
    std::vector<PrototypeHit> hits;
    for (int c = 0; c < pool.class_count(); ++c)
      for (int k = 0; k < pool.per_class(); ++k)
        hits.push_back({c, k, mean.dot(pool.prototype(c, k)), pool.exemplar(c, k)});
    std::stable_sort(hits.begin(), hits.end(),
                     [](const PrototypeHit& a, const PrototypeHit& b) { return a.similarity > b.similarity; });
    hits.resize(std::min<std::size_t>(hits.size(), std::size_t(m)));
    out.top_prototypes = std::move(hits);

    std::vector<ViewHit> views;
    for (Eigen::Index v = 0; v < H.rows(); ++v) {
      ViewHit best{static_cast<int>(v), 0, -std::numeric_limits<double>::infinity()};
      for (int k = 0; k < pool.per_class(); ++k) {
        const double sim = H.row(v).dot(pool.prototype(pred.cls, k));
        if (sim > best.similarity) {
          best.similarity = sim;
          best.k = k;
        }
      }
      views.push_back(best);
    }
    std::stable_sort(views.begin(), views.end(),
                     [](const ViewHit& a, const ViewHit& b) { return a.similarity > b.similarity; });
    views.resize(std::min<std::size_t>(views.size(), 5));
    out.top_views = std::move(views);
    report.shapes.push_back(std::move(out));
  }
  return report;
}

// ---------------------------------------------------------------------------

std::vector<SweepCell> run_sweep(const TrainTestSplit& data, const TrainConfig& base, const std::vector<SweepAxis>& grid,
                                 int threads) {
  std::vector<SweepCell> cells(1);
  for (const SweepAxis& axis : grid) {
    require(!axis.values.empty(), "sweep axis '" + axis.key + "' has no values");
    std::vector<SweepCell> next;
    for (const SweepCell& cell : cells)
      for (const std::string& value : axis.values) {
        SweepCell c = cell;
        c.settings.emplace_back(axis.key, value);
        next.push_back(std::move(c));
      }
    cells = std::move(next);
  }

  std::vector<TrainConfig> configs;
  for (const SweepCell& cell : cells) {
    TrainConfig cfg = base;
    for (const auto& [key, value] : cell.settings) set_config_value(cfg, key, value, "sweep grid");
    cfg.validate();
    configs.push_back(cfg);
  }

  auto run_cell = [&](std::size_t i) {
    TrainResult r = train(data, configs[i]);
    cells[i].report = evaluate(r.model, eval_split(data));
    cells[i].log = std::move(r.log);
  };

  const std::size_t workers = std::clamp<std::size_t>(std::size_t(std::max(threads, 1)), 1, cells.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    return cells;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cells.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
        try {
          run_cell(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  return cells;
}

// ---------------------------------------------------------------------------
// PFGM v1: "PFGM1", PPOOL block, u32 layer count, per layer u32 out, u32 in,
// out*in f32 weights (row-major), out f32 bias; u32 length + config text.

void write_model(std::ostream& os, const Model& model) {
  io::BinaryWriter w(os);
  w.bytes(kModelMagic);
  write_pool(os, model.pool);
  const auto& layers = model.encoder.layers();
  w.u32(static_cast<std::uint32_t>(layers.size()));
  for (const DenseLayer& l : layers) {
    w.u32(static_cast<std::uint32_t>(l.weight.rows()));
    w.u32(static_cast<std::uint32_t>(l.weight.cols()));
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) w.f32(static_cast<float>(l.weight(i, j)));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) w.f32(static_cast<float>(l.bias(i)));
  }
  const std::string text = format_config(model.config);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
}

Model read_model(std::istream& is, const std::string& source) {
  io::BinaryReader r(is, source, ErrorCode::FormatMismatch);
  if (r.bytes(5, "model magic") != kModelMagic)
    throw Error(ErrorCode::FormatMismatch, source + ": bad model magic (expected PFGM1)");
  Model model;
  model.pool = read_pool(is, source);
  const std::uint32_t count = r.u32("layer count");
  if (count < 1 || count > 2) throw Error(ErrorCode::FormatMismatch, source + ": invalid encoder layer count");
  std::vector<DenseLayer> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint32_t out = r.u32("layer rows");
    const std::uint32_t in = r.u32("layer cols");
    if (out == 0 || in == 0 || out > (1u << 16) || in > (1u << 16))
      throw Error(ErrorCode::FormatMismatch, source + ": invalid encoder layer shape");
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (std::uint32_t i = 0; i < out; ++i)
      for (std::uint32_t j = 0; j < in; ++j) layer.weight(i, j) = r.f32("encoder weights");
    for (std::uint32_t i = 0; i < out; ++i) layer.bias(i) = r.f32("encoder bias");
    if (!layers.empty() && layers.back().weight.rows() != layer.weight.cols())
      throw Error(ErrorCode::FormatMismatch, source + ": encoder layer shapes do not chain");
    layers.push_back(std::move(layer));
  }
  if (layers.back().weight.rows() != model.pool.dim())
    throw Error(ErrorCode::FormatMismatch, source + ": encoder output dimension does not match the pool");
  model.encoder = Encoder(std::move(layers));
  const std::uint32_t length = r.u32("config length");
  if (length > (1u << 20)) throw Error(ErrorCode::FormatMismatch, source + ": config block too large");
  model.config = parse_config(r.bytes(length, "config text"), source + " (config)");
  if (!r.at_end()) throw Error(ErrorCode::FormatMismatch, source + ": trailing bytes after model payload");
  return model;
}

void save_model(const Model& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for writing");
  write_model(os, model);
  if (!os) throw Error(ErrorCode::IoFailure, "failed writing '" + path + "'");
}

Model load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  return read_model(is, path);
}

}  // namespace protofg3d
