#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "protofg3d/error.hpp"
#include "protofg3d/pipeline.hpp"

using namespace protofg3d;

namespace {

SyntheticData small_data(std::uint64_t seed = 3) {
  SynthSpec s;
  s.classes = 3;
  s.views = 4;
  s.dim = 8;
  s.subclusters = 2;
  s.counts = {20, 15, 10};
  s.seed = seed;
  return generate_synthetic(s);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.K = 3;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.embed_dim = 6;
  cfg.warmup_epochs = 1;
  cfg.seed = 5;
  return cfg;
}

Model random_model(int C, int K, int D_in, int D, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Model m;
  m.encoder = Encoder::create(D_in, D, 0, seed);
  m.pool = PrototypePool(C, K, D);
  m.pool.prototypes() = oracle::random_unit_rows(C * K, D, rng);
  return m;
}

std::string model_bytes(const Model& m) {
  std::stringstream buf;
  write_model(buf, m);
  return buf.str();
}

}  // namespace

TEST_CASE("accuracy from a confusion matrix") {
  Eigen::MatrixXi conf(2, 2);
  conf << 90, 10, 9, 1;
  const EvalReport r = report_from_confusion(conf);
  CHECK(r.aia == doctest::Approx(91.0 / 110.0));
  CHECK(r.aca == doctest::Approx(0.5));

  const EvalReport perfect = report_from_confusion(Eigen::MatrixXi::Identity(3, 3) * 7);
  CHECK(perfect.aia == 1.0);
  CHECK(perfect.aca == 1.0);

  Eigen::MatrixXi fixed(5, 5);
  fixed << 12, 3, 0, 1, 0,  //
      2, 40, 1, 0, 0,       //
      0, 0, 5, 0, 2,        //
      1, 1, 1, 1, 1,        //
      0, 0, 0, 0, 9;
  const EvalReport f = report_from_confusion(fixed);
  double trace = 0, total = 0, acc = 0;
  for (int i = 0; i < 5; ++i) {
    double row = 0;
    for (int j = 0; j < 5; ++j) row += fixed(i, j);
    trace += fixed(i, i);
    total += row;
    acc += fixed(i, i) / row;
  }
  CHECK(std::abs(f.aia - trace / total) < 1e-15);
  CHECK(std::abs(f.aca - acc / 5) < 1e-15);

  Eigen::MatrixXi gap = Eigen::MatrixXi::Zero(3, 3);
  gap(0, 0) = 4;
  gap(2, 0) = 2;
  const EvalReport g = report_from_confusion(gap);
  CHECK(g.excluded_classes == std::vector<int>{1});
  CHECK(std::isnan(g.per_class_accuracy(1)));
  CHECK(g.aca == doctest::Approx(0.5));
}

TEST_CASE("nearest-prototype prediction") {
  std::mt19937_64 rng(7);
  SUBCASE("view equal to a prototype") {
    PrototypePool pool(4, 2, 5);
    pool.prototypes() = oracle::random_unit_rows(8, 5, rng);
    const ShapePrediction p = predict_embedded(pool, pool.prototype(3, 1), Aggregation::MinDistance);
    CHECK(p.cls == 3);
    CHECK(std::abs(p.distance) < 1e-15);
    CHECK(p.per_view[0].k == 1);
  }
  SUBCASE("permuting prototypes inside each class keeps predictions") {
    PrototypePool pool(3, 4, 6);
    pool.prototypes() = oracle::random_unit_rows(12, 6, rng);
    PrototypePool permuted = pool;
    for (int c = 0; c < 3; ++c) permuted.class_prototypes(c) = pool.class_prototypes(c).colwise().reverse();
    for (int i = 0; i < 20; ++i) {
      const Eigen::MatrixXd H = oracle::random_unit_rows(5, 6, rng);
      for (Aggregation a : {Aggregation::MinDistance, Aggregation::MeanEmbedding})
        CHECK(predict_embedded(pool, H, a).cls == predict_embedded(permuted, H, a).cls);
    }
  }
  SUBCASE("random models against an exhaustive distance scan") {
    for (int i = 0; i < 20; ++i) {
      const Model m = random_model(4, 3, 7, 5, 100 + i);
      const Eigen::MatrixXd raw = Eigen::MatrixXd::Random(6, 7);
      const oracle::ScanResult scan = oracle::exhaustive_scan(encode(m.encoder, raw), m.pool.prototypes(), 3);
      const ShapePrediction p = predict_shape(m, raw);
      CHECK(p.cls == scan.cls);
      CHECK(std::abs(p.distance - scan.distance) < 1e-12);
    }
  }
  SUBCASE("mean-embedding aggregation") {
    PrototypePool pool(2, 1, 2);
    pool.prototypes() << 1, 0, 0, 1;
    Eigen::MatrixXd H(3, 2);
    const double s = std::sqrt(0.5);
    H << 1, 0, 0, 1, s, s;  // one view on class 0, the mean leans to class 1
    H.row(1) << 0.1, std::sqrt(0.99);
    const ShapePrediction p = predict_embedded(pool, H, Aggregation::MeanEmbedding);
    const Eigen::RowVectorXd mean = H.colwise().mean().normalized();
    CHECK(p.cls == (mean(1) > mean(0) ? 1 : 0));
    CHECK(predict_embedded(pool, H, Aggregation::MinDistance).cls == 0);
  }
  SUBCASE("wrong input width") {
    const Model m = random_model(2, 2, 7, 5, 1);
    try {
      predict_shape(m, Eigen::MatrixXd::Ones(2, 6));
      FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
  }
}

TEST_CASE("training is deterministic and logs every epoch") {
  const SyntheticData d = small_data();
  const TrainResult a = train(d.split, small_config());
  const TrainResult b = train(d.split, small_config());
  CHECK(model_bytes(a.model) == model_bytes(b.model));
  REQUIRE(a.log.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(format_metrics_line(a.log[i]) == format_metrics_line(b.log[i]));
  CHECK(a.log[0].epoch == 1);
  CHECK(a.model.pool.max_norm_deviation() < 1e-6);
  CHECK(a.model.pool.all_finite());

  TrainConfig other = small_config();
  other.seed = 6;
  CHECK(model_bytes(train(d.split, other).model) != model_bytes(a.model));
}

TEST_CASE("metrics line format") {
  EpochMetrics m{4, 1.5, 0.25, 1.55, 0.9, 0.875};
  CHECK(format_metrics_line(m) == "epoch=4 l_ce=1.500000 l_pc=0.250000 l_total=1.550000 aia=0.900000 aca=0.875000");
}

TEST_CASE("noise-free single class converges to the encoded anchor") {
  SynthSpec s;
  s.classes = 1;
  s.subclusters = 1;
  s.views = 3;
  s.dim = 6;
  s.counts = {10};
  s.noise = 0;
  s.seed = 2;
  const SyntheticData d = generate_synthetic(s);
  TrainConfig cfg = small_config();
  cfg.K = 1;
  const TrainResult r = train(d.split, cfg);
  const Eigen::RowVectorXd anchor = encode(r.model.encoder, d.dataset.shapes[0].views.topRows(1));
  CHECK(1 - anchor.dot(r.model.pool.prototype(0, 0)) < 1e-3);
}

TEST_CASE("the contrastive weight does not touch the cross-entropy without encoder updates") {
  const SyntheticData d = small_data();
  TrainConfig cfg = small_config();
  cfg.lr0 = 0;
  cfg.alpha = 0;
  const TrainResult a = train(d.split, cfg);
  cfg.alpha = 0.2;
  const TrainResult b = train(d.split, cfg);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].l_ce == b.log[i].l_ce);
    CHECK(a.log[i].l_pc == b.log[i].l_pc);
    CHECK(a.log[i].l_total != b.log[i].l_total);
  }
}

TEST_CASE("training options") {
  const SyntheticData d = small_data();
  TrainConfig cfg = small_config();
  SUBCASE("snapping records exemplars") {
    cfg.snap_final_epoch = true;
    const TrainResult r = train(d.split, cfg);
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < cfg.K; ++k) CHECK(r.model.pool.exemplar(c, k) >= 0);
  }
  SUBCASE("apdagd, soft assignment, hidden layer and sampled negatives") {
    cfg.solver = transport::SolverKind::Apdagd;
    cfg.soft_assign = true;
    cfg.hidden_dim = 5;
    cfg.sampled_negatives = 2;
    cfg.ot_max_iters = 3000;
    cfg.epochs = 1;
    const TrainResult r = train(d.split, cfg);
    CHECK(r.model.encoder.hidden_dim() == 5);
    CHECK(std::isfinite(r.log.back().l_total));
  }
  SUBCASE("class without training shapes") {
    TrainTestSplit split = d.split;
    split.train.shapes.erase(std::remove_if(split.train.shapes.begin(), split.train.shapes.end(),
                                            [](const ViewBatch& s) { return s.label == 2; }),
                             split.train.shapes.end());
    try {
      train(split, cfg);
      FAIL("expected EmptyClass");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyClass);
    }
  }
  SUBCASE("invalid configuration") {
    cfg.tau = 0;
    CHECK_THROWS_AS(train(d.split, cfg), Error);
  }
}

TEST_CASE("evaluation report") {
  const SyntheticData d = small_data();
  const TrainResult r = train(d.split, small_config());
  const EvalReport e = evaluate(r.model, d.split.test);
  CHECK(e.confusion.sum() == int(d.split.test.shapes.size()));
  CHECK(e.aia == doctest::Approx(r.log.back().aia));
  CHECK(e.per_view_aia >= 0);
  CHECK(eval_report_text(e).find("AIA") != std::string::npos);
  CHECK(eval_report_json(e).find("\"confusion\"") != std::string::npos);
}

TEST_CASE("softmax baseline") {
  const SyntheticData d = small_data();
  TrainConfig cfg = small_config();
  const EvalReport a = baseline_train_eval(d.split, cfg);
  const EvalReport b = baseline_train_eval(d.split, cfg);
  CHECK(a.aia == b.aia);
  CHECK(a.confusion == b.confusion);
  cfg.lr0 = 0;
  const EvalReport untrained = baseline_train_eval(d.split, cfg);
  CHECK(untrained.confusion.sum() == int(d.split.test.shapes.size()));
}

TEST_CASE("inspection") {
  const SyntheticData d = small_data();
  TrainConfig cfg = small_config();
  cfg.snap_final_epoch = true;
  const Model model = train(d.split, cfg).model;
  const int V = d.dataset.views;

  SUBCASE("a shape made of an exemplar view finds that exemplar first") {
    const std::int64_t id = model.pool.exemplar(1, 0);
    const std::uint32_t shape_id = std::uint32_t(id / V);
    const auto it = std::find_if(d.split.train.shapes.begin(), d.split.train.shapes.end(),
                                 [&](const ViewBatch& s) { return s.shape_id == shape_id; });
    REQUIRE(it != d.split.train.shapes.end());
    Dataset probe = d.split.train;
    probe.shapes = {*it};
    for (int v = 0; v < V; ++v) probe.shapes[0].views.row(v) = it->views.row(id % V);
    const InspectReport r = inspect(model, probe, 1);
    REQUIRE(r.shapes.size() == 1);
    REQUIRE(r.shapes[0].top_prototypes.size() == 1);
    const PrototypeHit& hit = r.shapes[0].top_prototypes[0];
    CHECK(hit.exemplar == id);
    CHECK(hit.similarity == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("similarities are sorted and match a scan") {
    const InspectReport r = inspect(model, d.split.test, 4);
    REQUIRE(r.shapes.size() == d.split.test.shapes.size());
    for (std::size_t i = 0; i < r.shapes.size(); ++i) {
      const ShapeInspection& s = r.shapes[i];
      CHECK(s.top_prototypes.size() == 4);
      CHECK(s.top_views.size() == std::size_t(std::min(V, 5)));
      for (std::size_t j = 1; j < s.top_prototypes.size(); ++j)
        CHECK(s.top_prototypes[j - 1].similarity >= s.top_prototypes[j].similarity);
      for (std::size_t j = 1; j < s.top_views.size(); ++j)
        CHECK(s.top_views[j - 1].similarity >= s.top_views[j].similarity);
      const Eigen::MatrixXd H = encode(model.encoder, d.split.test.shapes[i].views);
      const Eigen::RowVectorXd mean = H.colwise().mean().normalized();
      double best = -2;
      for (int row = 0; row < model.pool.prototypes().rows(); ++row)
        best = std::max(best, mean.dot(model.pool.prototypes().row(row)));
      CHECK(std::abs(s.top_prototypes[0].similarity - best) < 1e-12);
    }
    CHECK(inspect_report_json(r).find("\"top_prototypes\"") != std::string::npos);
  }
}

TEST_CASE("model files") {
  const SyntheticData d = small_data();
  TrainConfig cfg = small_config();
  cfg.hidden_dim = 4;
  cfg.snap_final_epoch = true;
  const Model m = train(d.split, cfg).model;
  std::stringstream buf;
  write_model(buf, m);
  const std::string bytes = buf.str();
  const Model back = read_model(buf, "mem");
  CHECK(back.encoder == m.encoder);
  CHECK(back.pool == m.pool);
  CHECK(back.config == m.config);
  CHECK(model_bytes(back) == bytes);
  CHECK(parse_config(format_config(back.config)) == cfg);

  auto code_of = [](const std::string& b) {
    std::stringstream in(b);
    try {
      read_model(in, "fixture");
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Contract;
  };
  std::string bad = bytes;
  bad[0] = 'Q';
  CHECK(code_of(bad) == ErrorCode::FormatMismatch);
  CHECK(code_of(bytes.substr(0, bytes.size() / 2)) == ErrorCode::FormatMismatch);
  CHECK(code_of(bytes + "x") == ErrorCode::FormatMismatch);
}

TEST_CASE("sweep grid") {
  const SyntheticData d = small_data();
  TrainConfig base = small_config();
  base.epochs = 1;
  const std::vector<SweepAxis> grid{{"K", {"2", "3"}}, {"alpha", {"0", "0.2"}}};
  const std::vector<SweepCell> cells = run_sweep(d.split, base, grid);
  REQUIRE(cells.size() == 4);
  CHECK(cells[0].settings == std::vector<std::pair<std::string, std::string>>{{"K", "2"}, {"alpha", "0"}});
  CHECK(cells[1].settings[1].second == "0.2");
  CHECK(cells[2].settings[0].second == "3");
  const std::vector<SweepCell> parallel = run_sweep(d.split, base, grid, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(parallel[i].report.confusion == cells[i].report.confusion);
    CHECK(format_metrics_line(parallel[i].log.back()) == format_metrics_line(cells[i].log.back()));
  }
  CHECK_THROWS_AS(run_sweep(d.split, base, {{"bogus", {"1"}}}), Error);
}
