#include "relab/optim/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "relab/errors.hpp"

namespace relab {

std::string_view schedule_kind_name(ScheduleKind kind) {
  return kind == ScheduleKind::kLinear ? "linear" : "relora_jagged_cosine";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "relora_jagged_cosine") return ScheduleKind::kReloraJaggedCosine;
  throw ConfigError("unknown schedule kind '" + std::string(name) + "'");
}

void ScheduleConfig::validate() const {
  if (!(peak_lr >= 0.0)) throw ConfigError("schedule: peak_lr must be non-negative");
  if (total_steps <= 0) throw ConfigError("schedule: total_steps must be positive");
  if (warmup_steps < 0 || warmup_steps >= total_steps) {
    throw ConfigError("schedule: warmup_steps must lie in [0, total_steps)");
  }
  if (!(min_lr_ratio >= 0.0 && min_lr_ratio <= 1.0)) throw ConfigError("schedule: min_lr_ratio must lie in [0, 1]");
  if (kind == ScheduleKind::kReloraJaggedCosine) {
    if (reset_frequency <= 0) throw ConfigError("schedule: reset_frequency must be positive");
    if (restart_warmup_steps < 0 || restart_warmup_steps >= reset_frequency) {
      throw ConfigError("schedule: restart_warmup_steps must lie in [0, reset_frequency)");
    }
  }
}

double linear_lr(std::int64_t step, const ScheduleConfig& cfg) {
  if (step < cfg.warmup_steps) {
    return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  const double progress = static_cast<double>(step - cfg.warmup_steps) /
                          static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  const double floor = cfg.min_lr_ratio * cfg.peak_lr;
  return cfg.peak_lr + (floor - cfg.peak_lr) * std::min(progress, 1.0);
}

double cosine_envelope(std::int64_t step, const ScheduleConfig& cfg) {
  const double progress = static_cast<double>(step - cfg.warmup_steps) /
                          static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  const double floor = cfg.min_lr_ratio * cfg.peak_lr;
  return floor + (cfg.peak_lr - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

bool is_restart_step(std::int64_t step, const ScheduleConfig& cfg) {
  return step > 0 && step >= cfg.warmup_steps && step < cfg.total_steps && step % cfg.reset_frequency == 0;
}

std::vector<std::int64_t> restart_steps(const ScheduleConfig& cfg) {
  std::vector<std::int64_t> out;
  for (std::int64_t s = cfg.reset_frequency; s < cfg.total_steps; s += cfg.reset_frequency)
    if (is_restart_step(s, cfg)) out.push_back(s);
  return out;
}

double jagged_cosine_lr(std::int64_t step, const ScheduleConfig& cfg) {
  if (step < cfg.warmup_steps) {
    return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  if (cfg.restart_warmup_steps > 0 && step > 0) {
    const std::int64_t since = step % cfg.reset_frequency;
    const std::int64_t last_restart = step - since;
    if (since < cfg.restart_warmup_steps && is_restart_step(last_restart, cfg)) {
      return cosine_envelope(last_restart + cfg.restart_warmup_steps, cfg) * static_cast<double>(since) /
             static_cast<double>(cfg.restart_warmup_steps);
    }
  }
  return cosine_envelope(step, cfg);
}

double scheduled_lr(std::int64_t step, const ScheduleConfig& cfg) {
  return cfg.kind == ScheduleKind::kLinear ? linear_lr(step, cfg) : jagged_cosine_lr(step, cfg);
}

}  // namespace relab
