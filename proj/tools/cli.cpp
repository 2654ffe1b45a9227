#include "cli.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "protofg3d/config.hpp"
#include "protofg3d/data.hpp"
#include "protofg3d/error.hpp"
#include "protofg3d/pipeline.hpp"
#include "protofg3d/transport.hpp"

namespace protofg3d::cli {

namespace fs = std::filesystem;

namespace {

struct ConfigOptions {
  std::string config_path;
  std::vector<std::string> overrides;

  void attach(CLI::App& cmd) {
    cmd.add_option("-c,--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    cmd.add_option("--set", overrides, "config override key=value (repeatable, wins over the file)");
  }

  TrainConfig resolve() const {
    TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_config(config_path);
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0)
        throw Error(ErrorCode::Contract, "--set '" + kv + "': expected key=value");
      try {
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1), "--set");
      } catch (const Error& e) {
        throw Error(ErrorCode::Contract, e.message());
      }
    }
    cfg.validate();
    return cfg;
  }
};

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

fs::path prepare_output_dir(const std::string& dir) {
  const fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw Error(ErrorCode::IoFailure, "write failed for '" + path.string() + "'");
}

Dataset select_split(const Dataset& data, const std::string& split) {
  if (split == "all") return data;
  const TrainTestSplit s = split_train_test(data);
  return split == "train" ? s.train : s.test;
}

Eigen::MatrixXd read_similarity_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  for (long line_no = 1; std::getline(is, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      while (end && (*end == ' ' || *end == '\t')) ++end;
      if (field.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
        throw Error(ErrorCode::ParseError, where + ": invalid number '" + field + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorCode::ParseError, where + ": expected " + std::to_string(rows.front().size()) +
                                             " columns, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::ParseError, path + ": no rows");
  Eigen::MatrixXd S(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) S(r, c) = rows[r][c];
  return S;
}

void print_matrix(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m) {
  out << name << " (" << m.rows() << " x " << m.cols() << ")\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_real(m(r, c));
    out << '\n';
  }
}

std::string sweep_value_label(const std::vector<std::pair<std::string, std::string>>& settings) {
  std::string s;
  for (const auto& [k, v] : settings) s += (s.empty() ? "" : " ") + k + "=" + v;
  return s;
}

}  // namespace

int resolve_threads(int requested) {
  const int cores = std::max(1u, std::thread::hardware_concurrency());
  int threads = requested <= 0 ? cores : requested;
  if (const char* env = std::getenv("PROTO_FG3D_THREADS"); env && *env) {
    char* end = nullptr;
    errno = 0;
    const long cap = std::strtol(env, &end, 10);
    if (*end != '\0' || errno == ERANGE || cap < 0)
      throw Error(ErrorCode::Contract, std::string("PROTO_FG3D_THREADS: invalid value '") + env + "'");
    if (cap > 0) threads = std::min<long>(threads, cap);
  }
  return threads;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prototype-based multi-view shape classification", "protofg3d"};
  app.require_subcommand(1, 1);

  // synth
  SynthSpec synth;
  std::string synth_out;
  auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic multi-view dataset (PFGE)");
  cmd_synth->add_option("--classes", synth.classes, "number of classes")->capture_default_str();
  cmd_synth->add_option("--subclusters", synth.subclusters, "anchors per class")->capture_default_str();
  cmd_synth->add_option("--views", synth.views, "views per shape")->capture_default_str();
  cmd_synth->add_option("--dim", synth.dim, "raw view dimension")->capture_default_str();
  cmd_synth->add_option("--counts", synth.counts, "shapes per class, comma separated")->delimiter(',')->required();
  cmd_synth->add_option("--noise", synth.noise, "per-coordinate noise sigma")->capture_default_str();
  cmd_synth->add_option("--min-separation", synth.min_separation, "cosine distance floor between anchors")
      ->capture_default_str();
  cmd_synth->add_option("--seed", synth.seed, "random seed")->capture_default_str();
  cmd_synth->add_option("-o,--output", synth_out, "output PFGE file")->required();

  // import
  std::string import_in, import_out;
  auto* cmd_import = app.add_subcommand("import", "convert an embedding CSV into a PFGE file");
  cmd_import->add_option("--csv", import_in, "shape_id,view_id,label,f0..fD-1 rows")->required();
  cmd_import->add_option("-o,--output", import_out, "output PFGE file")->required();

  // train
  ConfigOptions train_cfg;
  std::string train_data, train_dir = ".";
  auto* cmd_train = app.add_subcommand("train", "train a prototype model; writes model.pfgm and metrics.log");
  train_cfg.attach(*cmd_train);
  cmd_train->add_option("--data", train_data, "dataset (PFGE or CSV)")->required();
  cmd_train->add_option("-o,--output-dir", train_dir, "output directory")->capture_default_str();

  // eval
  std::string eval_model, eval_data, eval_split = "test", eval_dir = ".";
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a model; prints a table and writes eval.json");
  cmd_eval->add_option("--model", eval_model, "model file (PFGM)")->required();
  cmd_eval->add_option("--data", eval_data, "dataset (PFGE or CSV)")->required();
  cmd_eval->add_option("--split", eval_split, "test, train or all")
      ->check(CLI::IsMember({"test", "train", "all"}))
      ->capture_default_str();
  cmd_eval->add_option("-o,--output-dir", eval_dir, "output directory")->capture_default_str();

  // inspect
  std::string inspect_model, inspect_data, inspect_split = "test", inspect_dir = ".";
  int inspect_m = 5;
  auto* cmd_inspect = app.add_subcommand("inspect", "rank prototypes and views per shape; writes inspect.json");
  cmd_inspect->add_option("--model", inspect_model, "model file (PFGM)")->required();
  cmd_inspect->add_option("--data", inspect_data, "dataset (PFGE or CSV)")->required();
  cmd_inspect->add_option("--split", inspect_split, "test, train or all")
      ->check(CLI::IsMember({"test", "train", "all"}))
      ->capture_default_str();
  cmd_inspect->add_option("-m,--top", inspect_m, "prototypes listed per shape")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_inspect->add_option("-o,--output-dir", inspect_dir, "output directory")->capture_default_str();

  // sweep
  ConfigOptions sweep_cfg;
  std::string sweep_data, sweep_dir = ".";
  std::vector<std::string> sweep_grid;
  int sweep_threads = 1;
  auto* cmd_sweep = app.add_subcommand("sweep", "train and evaluate over a grid; writes sweep.csv");
  sweep_cfg.attach(*cmd_sweep);
  cmd_sweep->add_option("--data", sweep_data, "dataset (PFGE or CSV)")->required();
  cmd_sweep->add_option("--grid", sweep_grid, "axis key=v1,v2,... (repeatable)")->required();
  cmd_sweep->add_option("--threads", sweep_threads, "parallel cells (0: all cores)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd_sweep->add_option("-o,--output-dir", sweep_dir, "output directory")->capture_default_str();

  // ot-solve
  std::string ot_input, ot_solver = "sinkhorn";
  transport::SolverConfig ot_cfg;
  auto* cmd_ot = app.add_subcommand("ot-solve", "solve one entropic assignment from a K x V similarity CSV");
  cmd_ot->add_option("input", ot_input, "similarity CSV, K rows of V values, no header")->required();
  cmd_ot->add_option("--kappa", ot_cfg.kappa, "entropy weight")->capture_default_str();
  cmd_ot->add_option("--solver", ot_solver, "sinkhorn or apdagd")
      ->check(CLI::IsMember({"sinkhorn", "apdagd"}))
      ->capture_default_str();
  cmd_ot->add_option("--max-iters", ot_cfg.max_iters, "iteration cap")->capture_default_str();
  cmd_ot->add_option("--tolerance", ot_cfg.marginal_tolerance, "marginal tolerance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cmd_synth->parsed()) {
      const SyntheticData data = generate_synthetic(synth);
      write_dataset(data.dataset, synth_out);
      out << "wrote " << synth_out << ": " << data.dataset.shapes.size() << " shapes, C=" << data.dataset.classes
          << " V=" << data.dataset.views << " D=" << data.dataset.dim << '\n';
    } else if (cmd_import->parsed()) {
      const ImportResult imported = import_csv(import_in);
      for (const std::string& w : imported.warnings) err << "warning: " << w << '\n';
      write_dataset(imported.dataset, import_out);
      out << "wrote " << import_out << ": " << imported.dataset.shapes.size() << " shapes, C="
          << imported.dataset.classes << " V=" << imported.dataset.views << " D=" << imported.dataset.dim << '\n';
    } else if (cmd_train->parsed()) {
      const TrainConfig cfg = train_cfg.resolve();
      const Dataset data = load_dataset(train_data);
      const TrainResult result = train(split_train_test(data), cfg);
      const fs::path dir = prepare_output_dir(train_dir);
      std::string log;
      for (const EpochMetrics& m : result.log) log += format_metrics_line(m) + "\n";
      save_model(result.model, (dir / "model.pfgm").string());
      write_text(dir / "metrics.log", log);
      out << log;
    } else if (cmd_eval->parsed()) {
      const Model model = load_model(eval_model);
      const Dataset data = select_split(load_dataset(eval_data), eval_split);
      const EvalReport report = evaluate(model, data);
      const fs::path dir = prepare_output_dir(eval_dir);
      write_text(dir / "eval.json", eval_report_json(report) + "\n");
      out << eval_report_text(report);
    } else if (cmd_inspect->parsed()) {
      const Model model = load_model(inspect_model);
      const Dataset data = select_split(load_dataset(inspect_data), inspect_split);
      const InspectReport report = inspect(model, data, inspect_m);
      const fs::path dir = prepare_output_dir(inspect_dir);
      write_text(dir / "inspect.json", inspect_report_json(report) + "\n");
      out << "inspected " << report.shapes.size() << " shapes; wrote " << (dir / "inspect.json").string() << '\n';
    } else if (cmd_sweep->parsed()) {
      const TrainConfig base = sweep_cfg.resolve();
      std::vector<SweepAxis> grid;
      for (const std::string& axis_text : sweep_grid) {
        const auto eq = axis_text.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == axis_text.size())
          throw Error(ErrorCode::Contract, "--grid '" + axis_text + "': expected key=v1,v2,...");
        SweepAxis axis{axis_text.substr(0, eq), {}};
        std::stringstream values(axis_text.substr(eq + 1));
        for (std::string v; std::getline(values, v, ',');) {
          TrainConfig probe = base;
          try {
            set_config_value(probe, axis.key, v, "--grid");
            probe.validate();
          } catch (const Error& e) {
            throw Error(ErrorCode::Contract, e.message());
          }
          axis.values.push_back(v);
        }
        grid.push_back(std::move(axis));
      }
      const int threads = resolve_threads(sweep_threads);
      const Dataset data = load_dataset(sweep_data);
      const std::vector<SweepCell> cells = run_sweep(split_train_test(data), base, grid, threads);
      const fs::path dir = prepare_output_dir(sweep_dir);
      std::string csv;
      for (const SweepAxis& axis : grid) csv += axis.key + ",";
      csv += "aia,aca,gap,l_total\n";
      for (const SweepCell& cell : cells) {
        const double l_total = cell.log.empty() ? 0.0 : cell.log.back().l_total;
        char metrics[160];
        std::snprintf(metrics, sizeof metrics, "aia=%.6f aca=%.6f gap=%.6f l_total=%.6f", cell.report.aia,
                      cell.report.aca, cell.report.aia - cell.report.aca, l_total);
        out << sweep_value_label(cell.settings) << ' ' << metrics << '\n';
        for (const auto& kv : cell.settings) csv += kv.second + ",";
        std::snprintf(metrics, sizeof metrics, "%.6f,%.6f,%.6f,%.6f\n", cell.report.aia, cell.report.aca,
                      cell.report.aia - cell.report.aca, l_total);
        csv += metrics;
      }
      write_text(dir / "sweep.csv", csv);
    } else if (cmd_ot->parsed()) {
      ot_cfg.kind = transport::solver_kind_from_string(ot_solver);
      try {
        ot_cfg.validate();
      } catch (const Error& e) {
        throw Error(ErrorCode::Contract, "ot-solve options: " + e.message());
      }
      const Eigen::MatrixXd S = read_similarity_csv(ot_input);
      const transport::Assignment<double> result = transport::solve(S, ot_cfg);
      print_matrix(out, "S", S);
      print_matrix(out, "Z", result.Z);
      if (result.scalings.log_mu.size() > 0) {
        print_matrix(out, "mu", result.scalings.mu().transpose());
        print_matrix(out, "nu", result.scalings.nu().transpose());
      } else {
        out << "mu, nu: not available (rounded primal iterate)\n";
      }
      out << "solver=" << ot_solver << " kappa=" << format_real(ot_cfg.kappa) << " iterations=" << result.iterations
          << " converged=" << (result.converged ? "true" : "false") << '\n'
          << "row_violation=" << format_real(result.violation.row)
          << " col_violation=" << format_real(result.violation.col) << '\n';
      transport::require_converged(result, ot_cfg);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.category()) {
      case ErrorCategory::Usage: return 1;
      case ErrorCategory::Data: return 2;
      case ErrorCategory::Numerical: return 3;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace protofg3d::cli
