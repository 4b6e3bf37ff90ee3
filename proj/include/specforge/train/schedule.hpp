#pragma once

#include <cmath>
#include <numbers>

#include "specforge/core/errors.hpp"

namespace specforge::train {

struct ScheduleConfig {
  double base_lr = 5e-4;
  double floor_lr = 1e-8;
  double warmup_epochs = 5.0;
  double total_epochs = 100.0;
};

// Linear warmup 0 -> base over warmup_epochs, cosine decay base -> floor at
// total_epochs. Endpoints are exact (no trig at the boundaries).
inline double lr_at(const ScheduleConfig& cfg, double epoch) {
  if (cfg.total_epochs <= cfg.warmup_epochs)
    throw ConfigError("lr schedule: total_epochs must exceed warmup");
  if (epoch <= 0.0) return 0.0;
  if (epoch < cfg.warmup_epochs) return cfg.base_lr * (epoch / cfg.warmup_epochs);
  if (epoch == cfg.warmup_epochs) return cfg.base_lr;
  if (epoch >= cfg.total_epochs) return cfg.floor_lr;
  const double t = (epoch - cfg.warmup_epochs) / (cfg.total_epochs - cfg.warmup_epochs);
  return cfg.floor_lr +
         0.5 * (cfg.base_lr - cfg.floor_lr) * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace specforge::train
