#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>

#include "relab/model/config.hpp"
#include "relab/optim/adamw.hpp"
#include "relab/optim/schedule.hpp"
#include "relab/relora/relora.hpp"

namespace relab {

struct DataConfig {
  std::string corpus_path;
  std::string eval_path;  // optional held-out corpus for eval_every
  std::size_t batch_size = 32;
  std::size_t seq_len = 128;
  std::size_t eval_windows = 16;
};

struct RunSettings {
  std::int64_t total_steps = 20000;
  std::int64_t checkpoint_every = 2000;
  std::int64_t eval_every = 0;  // 0 disables held-out evaluation
  std::uint64_t seed = 0;
  std::string out_dir = "runs/default";
  std::size_t grad_accumulation = 1;
};

/// Fully resolved training run. Relative paths are resolved against the
/// directory of the config file.
struct RunConfig {
  DecoderConfig model;
  std::optional<ReloraConfig> relora;
  ScheduleConfig schedule;
  AdamWOptions optimizer;
  DataConfig data;
  RunSettings run;

  bool is_relora() const { return relora.has_value(); }
  /// Throws ConfigError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Sections: model, relora (optional), schedule, optimizer, data, run.
/// The schedule takes total_steps from run and reset_frequency from relora;
/// the peak rate may be given as schedule.peak_lr or optimizer.lr.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace relab
