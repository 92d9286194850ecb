#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace relab {

enum class ScheduleKind { kLinear, kReloraJaggedCosine };

std::string_view schedule_kind_name(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::kReloraJaggedCosine;
  double peak_lr = 3e-4;
  std::int64_t total_steps = 20000;
  std::int64_t warmup_steps = 2000;
  double min_lr_ratio = 0.1;
  std::int64_t restart_warmup_steps = 100;
  std::int64_t reset_frequency = 2000;

  void validate() const;
};

/// Linear ramp 0 -> peak over warmup_steps, then linear decay to
/// min_lr_ratio * peak at total_steps.
double linear_lr(std::int64_t step, const ScheduleConfig& cfg);

/// Cosine envelope from peak (at warmup end) to min_lr_ratio * peak (at
/// total_steps); undefined before warmup end.
double cosine_envelope(std::int64_t step, const ScheduleConfig& cfg);

/// True for steps in [warmup_steps, total_steps) that are positive multiples
/// of reset_frequency.
bool is_restart_step(std::int64_t step, const ScheduleConfig& cfg);

/// Restart steps in increasing order.
std::vector<std::int64_t> restart_steps(const ScheduleConfig& cfg);

/// Linear warmup to peak, then the cosine envelope with a notch at every
/// restart step: the rate drops to zero at the restart and climbs linearly
/// to the envelope value at the end of the rewarm window.
double jagged_cosine_lr(std::int64_t step, const ScheduleConfig& cfg);

/// Dispatches on cfg.kind.
double scheduled_lr(std::int64_t step, const ScheduleConfig& cfg);

}  // namespace relab
