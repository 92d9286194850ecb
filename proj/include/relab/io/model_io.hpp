#pragma once

#include <optional>
#include <string>

#include "relab/io/checkpoint.hpp"
#include "relab/model/decoder.hpp"
#include "relab/relora/relora.hpp"

namespace relab {

/// Everything needed to write a checkpoint besides the model itself.
struct SnapshotInfo {
  std::int64_t step = 0;
  std::string mode = "baseline";  // "baseline" or "relora"
  nlohmann::json run_config = nlohmann::json::object();
};

/// Captures parameters ("param/<name>"), probe gradients of W_O, W_V and
/// W_2 when those weights are trainable ("grad/<name>", zeros when no
/// gradient exists yet) and, with an engine, its restart log.
Checkpoint snapshot_model(DecoderModel<float>& model, const ReloraEngine<float>* engine,
                          const SnapshotInfo& info);

struct LoadedModel {
  DecoderModel<float> model;
  std::optional<ReloraConfig> adapters;  // set when the checkpoint holds adapters
};

/// Rebuilds the model described by the header and copies every stored
/// parameter. Throws FormatError naming any missing or misshapen tensor.
LoadedModel load_model(const Checkpoint& ckpt);

/// Restart snapshots recorded in the checkpoint; empty for baseline runs.
RestartLog restart_log_from(const Checkpoint& ckpt);

}  // namespace relab
