// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "protofg3d/config.hpp"
#include "protofg3d/criterion.hpp"
#include "protofg3d/data.hpp"
#include "protofg3d/error.hpp"
#include "protofg3d/pipeline.hpp"
#include "protofg3d/prototype_pool.hpp"
#include "protofg3d/transport.hpp"

using namespace protofg3d;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

transport::SolverConfig solver(double kappa, transport::SolverKind kind, double tol, int iters) {
  transport::SolverConfig cfg;
  cfg.kappa = kappa;
  cfg.kind = kind;
  cfg.marginal_tolerance = tol;
  cfg.max_iters = iters;
  return cfg;
}

// Worst reconstruction error of diag(mu) exp(S / kappa) diag(nu) against Z over
// every Sinkhorn output produced by the transport checks.
double worst_reconstruction = 0;
int reconstructed = 0;

void record_reconstruction(const Eigen::MatrixXd& S, double kappa, const transport::Assignment<double>& r) {
  const Eigen::MatrixXd kernel = (S.array() / kappa).exp().matrix();
  const Eigen::MatrixXd rebuilt = r.scalings.mu().asDiagonal() * kernel * r.scalings.nu().asDiagonal();
  worst_reconstruction = std::max(worst_reconstruction, (rebuilt - r.Z).cwiseAbs().maxCoeff());
  ++reconstructed;
}

void transport_constraints() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> kdist(2, 8), vdist(2, 32);
  const std::array kappas{0.05, 0.1, 0.5};
  double worst = 0;
  int unconverged = 0;
  const auto start = Clock::now();
  for (int i = 0; i < 100; ++i) {
    const int K = kdist(rng), V = vdist(rng);
    const double kappa = kappas[i % 3];
    const Eigen::MatrixXd S = oracle::random_similarity(K, V, rng);
    const auto r = transport::solve(S, solver(kappa, transport::SolverKind::Sinkhorn, 1e-9, 1000));
    worst = std::max(worst, transport::marginal_violation(r.Z).max());
    unconverged += !r.converged;
    record_reconstruction(S, kappa, r);
  }
  const double elapsed = seconds_since(start);
  report(worst < 1e-6 && elapsed < 5 && unconverged == 0, "transport-constraints",
         fmt("100 instances, max marginal violation %.3g (< 1e-6), %d unconverged, %.2f s (< 5 s)", worst, unconverged,
             elapsed));
}

void oracle_equivalence() {
  std::mt19937_64 rng(102);
  double worst = 0;
  int count = 0;
  for (int V : {2, 3})
    for (double kappa : {0.05, 0.1, 0.5})
      for (int rep = 0; rep < 10; ++rep) {
        const Eigen::MatrixXd S = oracle::random_similarity(2, V, rng);
        const Eigen::MatrixXd ref = oracle::brute_force_transport_k2(S, kappa);
        const auto r = transport::solve(S, solver(kappa, transport::SolverKind::Sinkhorn, 1e-9, 1000));
        worst = std::max(worst, (r.Z - ref).cwiseAbs().maxCoeff());
        record_reconstruction(S, kappa, r);
        ++count;
      }
  report(worst < 1e-3, "oracle-equivalence",
         fmt("%d instances with K=2, V in {2,3}, max |Z - brute force| %.3g (< 1e-3)", count, worst));
}

void cross_solver_agreement() {
  std::mt19937_64 rng(103);
  const std::array kappas{0.05, 0.1, 0.5};
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    const double kappa = kappas[i % 3];
    const Eigen::MatrixXd S = oracle::random_similarity(4, 12, rng);
    const auto sk = transport::solve(S, solver(kappa, transport::SolverKind::Sinkhorn, 1e-10, 1000));
    const auto ap = transport::solve(S, solver(kappa, transport::SolverKind::Apdagd, 1e-9, 200000));
    worst = std::max(worst, (sk.Z - ap.Z).cwiseAbs().maxCoeff());
    record_reconstruction(S, kappa, sk);
  }
  report(worst < 1e-4, "cross-solver-agreement",
         fmt("50 random 4x12 instances, max |Z_sinkhorn - Z_apdagd| %.3g (< 1e-4)", worst));
}

void solution_form() {
  report(worst_reconstruction < 1e-10, "solution-form",
         fmt("%d sinkhorn outputs, max |diag(mu) exp(S/kappa) diag(nu) - Z| %.3g (< 1e-10)", reconstructed,
             worst_reconstruction));
}

void ema_correctness() {
  std::mt19937_64 rng(104);
  double worst = 0;
  for (double eta : {0.5, 0.9, 0.99, 0.999}) {
    PrototypePool pool(1, 1, 16);
    pool.prototypes() = oracle::random_unit_rows(1, 16, rng);
    const Eigen::RowVectorXd q0 = pool.prototypes().row(0);
    const ClusterMeans m{oracle::random_unit_rows(1, 16, rng), {true}, Eigen::VectorXd::Ones(1), {}};
    const EmaConfig cfg{eta, 1000, false};
    for (int t = 1; t <= 50; ++t) {
      ema_update(pool, 0, m, cfg);
      const Eigen::RowVectorXd closed = oracle::ema_closed_form(q0, m.means.row(0), eta, t);
      worst = std::max(worst, (pool.prototypes().row(0) - closed).cwiseAbs().maxCoeff());
    }
  }
  report(worst < 1e-10, "ema-correctness",
         fmt("t <= 50, eta in {0.5, 0.9, 0.99, 0.999}, max |iterate - closed form| %.3g (< 1e-10)", worst));
}

void gradient_suite() {
  std::mt19937_64 rng(105);
  std::uniform_int_distribution<int> cdist(2, 5), kdist(1, 4), ddist(2, 16), ndist(1, 8);
  std::normal_distribution<double> scale(1.0, 0.3);
  const std::array alphas{0.0, 0.2, 1.0};
  double worst = 0;
  int excluded = 0, checked = 0;
  const auto start = Clock::now();
  for (int rep = 0; rep < 50; ++rep) {
    const int C = cdist(rng), K = kdist(rng), D = ddist(rng), N = ndist(rng);
    PrototypePool pool(C, K, D);
    pool.prototypes() = oracle::random_unit_rows(C * K, D, rng);
    EmbeddedBatch raw{oracle::random_unit_rows(N, D, rng), std::vector<int>(N), {}};
    for (int v = 0; v < N; ++v) {
      raw.embeddings.row(v) *= std::abs(scale(rng)) + 0.2;
      raw.labels[v] = std::uniform_int_distribution<int>(0, C - 1)(rng);
    }
    LossConfig cfg;
    cfg.alpha = alphas[rep % 3];
    const GradCheckResult r = grad_check(raw, pool, cfg, 1e-5);
    worst = std::max(worst, r.max_error);
    excluded += r.excluded_views;
    checked += r.checked_coordinates;
  }
  const double elapsed = seconds_since(start);
  report(worst < 1e-4 && elapsed < 30, "gradient-suite",
         fmt("50 configurations, %d coordinates, %d tie views excluded, max relative error %.3g (< 1e-4), %.2f s "
             "(< 30 s)",
             checked, excluded, worst, elapsed));
}

void closed_form_losses() {
  PrototypePool pool(4, 1, 5);
  pool.prototypes().topRows(4) = Eigen::MatrixXd::Identity(4, 5);
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(5);
  h(4) = 1;
  const double ce_err = std::abs(cross_entropy_loss(h, pool, 1) - std::log(4.0));

  Eigen::RowVectorXd anchor = Eigen::RowVectorXd::Zero(3), pos(3), neg(3);
  anchor(0) = 1;
  pos << 0.6, 0.8, 0;
  neg << 0.6, 0, 0.8;
  const double pc_err = std::abs(contrastive_loss(anchor, pos, neg, 0.1).value - std::log(2.0));
  report(ce_err < 1e-12 && pc_err < 1e-12, "closed-form-losses",
         fmt("|L_ce - ln 4| %.3g, |L_pc - ln 2| %.3g (< 1e-12)", ce_err, pc_err));
}

SynthSpec benchmark_spec(std::vector<int> counts, std::uint64_t seed) {
  SynthSpec s;
  s.classes = int(counts.size());
  s.subclusters = 3;
  s.views = 12;
  s.dim = 32;
  s.noise = 0.02;
  s.counts = std::move(counts);
  s.seed = seed;
  return s;
}

TrainConfig benchmark_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = seed;
  return cfg;
}

void end_to_end() {
  const SyntheticData d = generate_synthetic(benchmark_spec({250, 250, 250, 250}, 7));
  const auto start = Clock::now();
  const TrainResult r = train(d.split, benchmark_config(7));
  const double elapsed = seconds_since(start);
  const EvalReport e = evaluate(r.model, d.split.test);
  report(e.aia >= 0.99 && e.aca >= 0.99 && elapsed < 120, "end-to-end",
         fmt("4 classes, 200 train shapes each, 30 epochs: AIA %.4f ACA %.4f (>= 0.99), %.1f s (< 120 s)", e.aia,
             e.aca, elapsed));
}

void imbalance() {
  double proto_gap = 0, base_gap = 0, worst_aca = 1;
  std::string rows;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SyntheticData d = generate_synthetic(benchmark_spec({500, 250, 100, 30, 10}, 100 + seed));
    const TrainConfig cfg = benchmark_config(seed);
    const EvalReport p = evaluate(train(d.split, cfg).model, d.split.test);
    const EvalReport b = baseline_train_eval(d.split, cfg);
    proto_gap += (p.aia - p.aca) / 5;
    base_gap += (b.aia - b.aca) / 5;
    worst_aca = std::min(worst_aca, p.aca);
    rows += fmt("    seed %d: prototype AIA %.4f ACA %.4f gap %.4f | baseline AIA %.4f ACA %.4f gap %.4f\n", int(seed),
                p.aia, p.aca, p.aia - p.aca, b.aia, b.aca, b.aia - b.aca);
  }
  std::fputs(rows.c_str(), stdout);
  report(proto_gap <= base_gap && worst_aca >= 0.85, "imbalance",
         fmt("counts [500,250,100,30,10], 5 seeds: mean gap prototype %.4f <= baseline %.4f, min prototype ACA %.4f "
             "(>= 0.85)",
             proto_gap, base_gap, worst_aca));
}

void ablation_sweep() {
  const SyntheticData d = generate_synthetic(benchmark_spec({250, 250, 250, 250}, 7));
  const std::vector<SweepAxis> grid{{"K", {"10", "20", "30"}}, {"alpha", {"0", "0.2"}}, {"eta0", {"0.9", "0.999"}}};
  const TrainConfig base = benchmark_config(7);
  bool completed = true;
  std::vector<SweepCell> cells;
  try {
    cells = run_sweep(d.split, base, grid);
  } catch (const Error& e) {
    completed = false;
    std::printf("    sweep failed: %s\n", e.what());
  }
  bool deterministic = completed && cells.size() == 12;
  int wins = 0;
  std::string rows;
  for (std::size_t i = 0; deterministic && i < cells.size(); ++i) {
    TrainConfig cfg = base;
    for (const auto& [k, v] : cells[i].settings) set_config_value(cfg, k, v, "grid");
    const EvalReport again = evaluate(train(d.split, cfg).model, d.split.test);
    deterministic = deterministic && again.confusion == cells[i].report.confusion;
    rows += fmt("    K=%s alpha=%s eta0=%s: AIA %.4f ACA %.4f\n", cells[i].settings[0].second.c_str(),
                cells[i].settings[1].second.c_str(), cells[i].settings[2].second.c_str(), cells[i].report.aia,
                cells[i].report.aca);
  }
  // Cells are ordered K slowest, then alpha, then eta0.
  for (int k = 0; deterministic && k < 3; ++k)
    for (int e = 0; e < 2; ++e) wins += cells[k * 4 + 2 + e].report.aca >= cells[k * 4 + e].report.aca;
  std::fputs(rows.c_str(), stdout);
  report(completed && deterministic && wins >= 4, "ablation-sweep",
         fmt("12 cells completed=%s, deterministic=%s, alpha=0.2 >= alpha=0 in ACA on %d of 6 (>= 4)",
             completed ? "yes" : "no", deterministic ? "yes" : "no", wins));
}

void prediction_oracle() {
  std::mt19937_64 rng(106);
  std::uniform_int_distribution<int> cdist(2, 6), kdist(1, 4), vdist(1, 12), ddist(2, 12), hdist(0, 1);
  int matches = 0;
  for (int i = 0; i < 100; ++i) {
    const int C = cdist(rng), K = kdist(rng), V = vdist(rng), D_in = ddist(rng), D = ddist(rng);
    Model m;
    m.encoder = Encoder::create(D_in, D, hdist(rng) ? 8 : 0, 1000 + i);
    m.pool = PrototypePool(C, K, D);
    m.pool.prototypes() = oracle::random_unit_rows(C * K, D, rng);
    Eigen::MatrixXd raw(V, D_in);
    std::normal_distribution<double> g;
    for (Eigen::Index r = 0; r < raw.rows(); ++r)
      for (Eigen::Index c = 0; c < raw.cols(); ++c) raw(r, c) = g(rng);
    const oracle::ScanResult scan = oracle::exhaustive_scan(encode(m.encoder, raw), m.pool.prototypes(), K);
    matches += predict_shape(m, raw).cls == scan.cls;
  }
  report(matches == 100, "prediction-oracle", fmt("%d of 100 random model/shape pairs match the exhaustive scan", matches));
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Contract;
}

void put_u32(std::string& bytes, std::size_t offset, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[offset + i] = char((v >> (8 * i)) & 0xFF);
}

void format_round_trips() {
  const SyntheticData d = generate_synthetic(benchmark_spec({12, 9, 6}, 3));
  TrainConfig cfg = benchmark_config(3);
  cfg.epochs = 2;
  cfg.K = 3;
  cfg.snap_final_epoch = true;
  cfg.hidden_dim = 8;
  const Model model = train(d.split, cfg).model;

  std::stringstream pfge;
  write_dataset(pfge, d.dataset);
  const std::string pfge_bytes = pfge.str();
  std::stringstream pfge2;
  const Dataset ds_back = read_dataset(pfge, "pfge");
  write_dataset(pfge2, ds_back);
  const bool pfge_ok = ds_back == d.dataset && pfge2.str() == pfge_bytes;

  std::stringstream ppool;
  write_pool(ppool, model.pool);
  const std::string ppool_bytes = ppool.str();
  std::stringstream ppool2;
  const PrototypePool pool_back = read_pool(ppool, "ppool");
  write_pool(ppool2, pool_back);
  const bool ppool_ok = pool_back == model.pool && ppool2.str() == ppool_bytes;

  std::stringstream pfgm;
  write_model(pfgm, model);
  const std::string pfgm_bytes = pfgm.str();
  std::stringstream pfgm2;
  const Model model_back = read_model(pfgm, "pfgm");
  write_model(pfgm2, model_back);
  const bool pfgm_ok = model_back.encoder == model.encoder && model_back.pool == model.pool &&
                       model_back.config == model.config && pfgm2.str() == pfgm_bytes;

  const std::string cfg_text = format_config(cfg);
  const bool config_ok = parse_config(cfg_text) == cfg && format_config(parse_config(cfg_text)) == cfg_text;

  auto read_pfge = [](std::string b) {
    return code_of([&] {
      std::stringstream in(b);
      read_dataset(in, "fixture");
    });
  };
  auto read_ppool = [](std::string b) {
    return code_of([&] {
      std::stringstream in(b);
      read_pool(in, "fixture");
    });
  };
  auto read_pfgm = [](std::string b) {
    return code_of([&] {
      std::stringstream in(b);
      read_model(in, "fixture");
    });
  };
  std::string over = pfge_bytes, under = pfge_bytes, magic = pfge_bytes, version = ppool_bytes, pmagic = pfgm_bytes;
  put_u32(over, 7, std::uint32_t(d.dataset.shapes.size() + 1));
  put_u32(under, 7, std::uint32_t(d.dataset.shapes.size() - 1));
  magic[0] = 'X';
  version[5] = '2';
  pmagic[1] = 'X';
  const bool errors_ok = read_pfge(over) == ErrorCode::CountMismatch && read_pfge(under) == ErrorCode::CountMismatch &&
                         read_pfge(magic) == ErrorCode::FormatMismatch &&
                         read_pfge(pfge_bytes.substr(0, 12)) == ErrorCode::FormatMismatch &&
                         read_ppool(version) == ErrorCode::FormatMismatch &&
                         read_ppool(ppool_bytes.substr(0, ppool_bytes.size() - 3)) == ErrorCode::FormatMismatch &&
                         read_pfgm(pmagic) == ErrorCode::FormatMismatch &&
                         read_pfgm(pfgm_bytes + "!") == ErrorCode::FormatMismatch &&
                         code_of([] { parse_config("alpha=abc\n"); }) == ErrorCode::ParseError &&
                         code_of([] { parse_config("width=3\n"); }) == ErrorCode::UnknownKey &&
                         code_of([] { load_model("/nonexistent/model.pfgm"); }) == ErrorCode::IoFailure;
  auto yn = [](bool b) { return b ? "ok" : "MISMATCH"; };
  report(pfge_ok && ppool_ok && pfgm_ok && config_ok && errors_ok, "format-round-trips",
         fmt("PFGE %s, PPOOL %s, PFGM %s, config %s, corrupted fixtures %s", yn(pfge_ok), yn(ppool_ok), yn(pfgm_ok),
             yn(config_ok), yn(errors_ok)));
}

void determinism() {
  const SyntheticData d = generate_synthetic(benchmark_spec({60, 40, 30, 20}, 11));
  TrainConfig cfg = benchmark_config(11);
  cfg.epochs = 10;
  cfg.snap_final_epoch = true;
  auto run_once = [&](std::string& log) {
    const TrainResult r = train(d.split, cfg);
    log.clear();
    for (const EpochMetrics& m : r.log) log += format_metrics_line(m) + "\n";
    std::stringstream buf;
    write_model(buf, r.model);
    return buf.str();
  };
  std::string log_a, log_b;
  const std::string model_a = run_once(log_a);
  const std::string model_b = run_once(log_b);
  report(model_a == model_b && log_a == log_b, "determinism",
         fmt("two 10-epoch runs: model files %s (%zu bytes), metrics logs %s", model_a == model_b ? "identical" : "differ",
             model_a.size(), log_a == log_b ? "identical" : "differ"));
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void()>>> checks{
      {"transport-constraints", transport_constraints},
      {"oracle-equivalence", oracle_equivalence},
      {"cross-solver-agreement", cross_solver_agreement},
      {"solution-form", solution_form},
      {"ema-correctness", ema_correctness},
      {"gradient-suite", gradient_suite},
      {"closed-form-losses", closed_form_losses},
      {"end-to-end", end_to_end},
      {"imbalance", imbalance},
      {"ablation-sweep", ablation_sweep},
      {"prediction-oracle", prediction_oracle},
      {"format-round-trips", format_round_trips},
      {"determinism", determinism},
  };
  for (const auto& [name, check] : checks) {
    try {
      check();
    } catch (const std::exception& e) {
      report(false, name, std::string("threw ") + e.what());
    }
  }
  std::printf("%d of %zu criteria passed\n", int(checks.size()) - failures, checks.size());
  return failures == 0 ? 0 : 1;
}
