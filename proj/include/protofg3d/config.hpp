#pragma once

#include <cstdint>
#include <string>

#include "protofg3d/criterion.hpp"
#include "protofg3d/prototype_pool.hpp"
#include "protofg3d/transport.hpp"

namespace protofg3d {

enum class Aggregation { MinDistance, MeanEmbedding };
enum class PositivePolicy { Assigned, Argmin };

struct TrainConfig {
  int K = 20;
  double kappa = 0.05;
  double tau = 0.1;
  double alpha = 0.2;
  double eta0 = 0.999;
  int epochs = 100;
  int batch_size = 32;
  double lr0 = 0.005;
  double momentum = 0.9;
  double weight_decay = 0.001;
  int warmup_epochs = 5;
  std::uint64_t seed = 0;
  transport::SolverKind solver = transport::SolverKind::Sinkhorn;
  Aggregation aggregation = Aggregation::MinDistance;
  bool snap_final_epoch = false;

  // Knobs without a published value.
  int embed_dim = 32;
  int hidden_dim = 0;
  long switch_step = -1;  // -1: steps in the warm-up epochs
  bool renormalize = true;
  bool soft_assign = false;
  PositivePolicy positive = PositivePolicy::Assigned;
  int sampled_negatives = 0;  // 0: all prototypes of the other classes
  int ot_max_iters = 1000;
  double ot_tolerance = 1e-6;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;

  transport::SolverConfig solver_config() const;
  LossConfig loss_config() const;
  EmaConfig ema_config(long steps_per_epoch) const;
};

/// Applies one `key=value` assignment; throws UnknownKey or ParseError
/// (`where` prefixes the message, e.g. "cfg.txt:3").
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value, const std::string& where);

/// Plain-text `key=value` lines, `#` comments and blank lines ignored; missing
/// keys keep their defaults.
TrainConfig parse_config(const std::string& text, const std::string& source = "<config>");
TrainConfig load_config(const std::string& path);

/// Every key, one per line, in a form parse_config reads back identically.
std::string format_config(const TrainConfig& cfg);

}  // namespace protofg3d
