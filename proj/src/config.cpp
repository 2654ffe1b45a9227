#include "protofg3d/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "protofg3d/error.hpp"

namespace protofg3d {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& where, const std::string& key, const std::string& value) {
  throw Error(ErrorCode::ParseError, where + ": invalid value '" + value + "' for key '" + key + "'");
}

double to_real(const std::string& where, const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) bad_value(where, key, value);
  return v;
}

long long to_integer(const std::string& where, const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (value.empty() || *end != '\0' || errno == ERANGE) bad_value(where, key, value);
  return v;
}

bool to_bool(const std::string& where, const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(where, key, value);
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  require(K >= 1, "K must be >= 1");
  require(kappa > 0, "kappa must be positive");
  require(tau > 0, "tau must be positive");
  require(alpha >= 0, "alpha must be nonnegative");
  require(eta0 > 0 && eta0 <= 1, "eta0 must lie in (0, 1]");
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(lr0 >= 0, "lr0 must be nonnegative");
  require(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
  require(weight_decay >= 0, "weight_decay must be nonnegative");
  require(warmup_epochs >= 0, "warmup_epochs must be nonnegative");
  require(embed_dim >= 1, "embed_dim must be >= 1");
  require(hidden_dim >= 0, "hidden_dim must be nonnegative");
  require(switch_step >= -1, "switch_step must be >= -1");
  require(sampled_negatives >= 0, "sampled_negatives must be nonnegative");
  require(ot_max_iters >= 1, "ot_max_iters must be >= 1");
  require(ot_tolerance > 0, "ot_tolerance must be positive");
}

transport::SolverConfig TrainConfig::solver_config() const {
  transport::SolverConfig s;
  s.kappa = kappa;
  s.max_iters = ot_max_iters;
  s.marginal_tolerance = ot_tolerance;
  s.kind = solver;
  return s;
}

LossConfig TrainConfig::loss_config() const {
  LossConfig l;
  l.tau = tau;
  l.alpha = alpha;
  if (sampled_negatives > 0) {
    l.negatives = NegativePolicy::Sampled;
    l.sampled_negatives = sampled_negatives;
    l.sample_seed = seed;
  }
  return l;
}

EmaConfig TrainConfig::ema_config(long steps_per_epoch) const {
  EmaConfig e;
  e.eta0 = eta0;
  e.switch_step = switch_step >= 0 ? switch_step : steps_per_epoch * warmup_epochs;
  e.renormalize = renormalize;
  return e;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value, const std::string& where) {
  auto integer = [&] { return to_integer(where, key, value); };
  auto positive_int = [&] {
    const long long v = integer();
    if (v < 0 || v > (1LL << 30)) bad_value(where, key, value);
    return static_cast<int>(v);
  };
  auto real = [&] { return to_real(where, key, value); };

  if (key == "K") cfg.K = positive_int();
  else if (key == "kappa") cfg.kappa = real();
  else if (key == "tau") cfg.tau = real();
  else if (key == "alpha") cfg.alpha = real();
  else if (key == "eta0") cfg.eta0 = real();
  else if (key == "epochs") cfg.epochs = positive_int();
  else if (key == "batch_size") cfg.batch_size = positive_int();
  else if (key == "lr0") cfg.lr0 = real();
  else if (key == "momentum") cfg.momentum = real();
  else if (key == "weight_decay") cfg.weight_decay = real();
  else if (key == "warmup_epochs") cfg.warmup_epochs = positive_int();
  else if (key == "seed") {
    const long long v = integer();
    if (v < 0) bad_value(where, key, value);
    cfg.seed = static_cast<std::uint64_t>(v);
  } else if (key == "solver") {
    if (value == "sinkhorn") cfg.solver = transport::SolverKind::Sinkhorn;
    else if (value == "apdagd") cfg.solver = transport::SolverKind::Apdagd;
    else bad_value(where, key, value);
  } else if (key == "aggregation") {
    if (value == "min_distance") cfg.aggregation = Aggregation::MinDistance;
    else if (value == "mean_embedding") cfg.aggregation = Aggregation::MeanEmbedding;
    else bad_value(where, key, value);
  } else if (key == "snap_final_epoch") cfg.snap_final_epoch = to_bool(where, key, value);
  else if (key == "embed_dim") cfg.embed_dim = positive_int();
  else if (key == "hidden_dim") cfg.hidden_dim = positive_int();
  else if (key == "switch_step") {
    const long long v = integer();
    if (v < -1) bad_value(where, key, value);
    cfg.switch_step = static_cast<long>(v);
  } else if (key == "renormalize") cfg.renormalize = to_bool(where, key, value);
  else if (key == "soft_assign") cfg.soft_assign = to_bool(where, key, value);
  else if (key == "positive") {
    if (value == "assigned") cfg.positive = PositivePolicy::Assigned;
    else if (value == "argmin") cfg.positive = PositivePolicy::Argmin;
    else bad_value(where, key, value);
  } else if (key == "sampled_negatives") cfg.sampled_negatives = positive_int();
  else if (key == "ot_max_iters") cfg.ot_max_iters = positive_int();
  else if (key == "ot_tolerance") cfg.ot_tolerance = real();
  else throw Error(ErrorCode::UnknownKey, where + ": unknown key '" + key + "'");
}

TrainConfig parse_config(const std::string& text, const std::string& source) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  for (long line_no = 1; std::getline(is, line); ++line_no) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ParseError, where + ": expected key=value");
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
  }
  return cfg;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot open config '" + path + "'");
  std::ostringstream text;
  text << is.rdbuf();
  return parse_config(text.str(), path);
}

std::string format_config(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "K=" << cfg.K << '\n'
     << "kappa=" << real_text(cfg.kappa) << '\n'
     << "tau=" << real_text(cfg.tau) << '\n'
     << "alpha=" << real_text(cfg.alpha) << '\n'
     << "eta0=" << real_text(cfg.eta0) << '\n'
     << "epochs=" << cfg.epochs << '\n'
     << "batch_size=" << cfg.batch_size << '\n'
     << "lr0=" << real_text(cfg.lr0) << '\n'
     << "momentum=" << real_text(cfg.momentum) << '\n'
     << "weight_decay=" << real_text(cfg.weight_decay) << '\n'
     << "warmup_epochs=" << cfg.warmup_epochs << '\n'
     << "seed=" << cfg.seed << '\n'
     << "solver=" << transport::to_string(cfg.solver) << '\n'
     << "aggregation=" << (cfg.aggregation == Aggregation::MinDistance ? "min_distance" : "mean_embedding") << '\n'
     << "snap_final_epoch=" << (cfg.snap_final_epoch ? "true" : "false") << '\n'
     << "embed_dim=" << cfg.embed_dim << '\n'
     << "hidden_dim=" << cfg.hidden_dim << '\n'
     << "switch_step=" << cfg.switch_step << '\n'
     << "renormalize=" << (cfg.renormalize ? "true" : "false") << '\n'
     << "soft_assign=" << (cfg.soft_assign ? "true" : "false") << '\n'
     << "positive=" << (cfg.positive == PositivePolicy::Assigned ? "assigned" : "argmin") << '\n'
     << "sampled_negatives=" << cfg.sampled_negatives << '\n'
     << "ot_max_iters=" << cfg.ot_max_iters << '\n'
     << "ot_tolerance=" << real_text(cfg.ot_tolerance) << '\n';
  return os.str();
}

}  // namespace protofg3d
