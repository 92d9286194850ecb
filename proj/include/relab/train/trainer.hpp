#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "relab/train/run_config.hpp"

namespace relab {

struct TrainSummary {
  std::int64_t steps = 0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  std::vector<std::int64_t> restart_steps;
  std::vector<std::filesystem::path> checkpoints;
};

/// Runs the configured training loop and writes into run.out_dir:
///   metrics.csv        step,loss,lr,tokens_seen (flushed every step)
///   eval.csv           step,val_loss,val_ppl (when eval_every > 0)
///   checkpoints/step_<8 digits>.ckpt
///   config.json        resolved config
///
/// Step k first checkpoints (when k is a multiple of checkpoint_every; the
/// state then holds the gradients of step k - 1), then in relora mode
/// merges, reinitialises and prunes if k is a restart step, then takes one
/// optimizer step on batch k at lr(k). A final checkpoint is written at
/// total_steps. A non-finite loss or gradient throws NumericError and leaves
/// earlier checkpoints in place.
TrainSummary train(const RunConfig& config);

}  // namespace relab
