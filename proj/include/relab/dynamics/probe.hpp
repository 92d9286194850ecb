#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "relab/dynamics/spectrum.hpp"
#include "relab/io/checkpoint.hpp"

namespace relab {

enum class ProbeKind { kWeights, kGradUpdates };

/// One metric of one probe in one layer. Probes are "ov", "w2" (weights)
/// and "grad_o", "grad_v", "grad_w2" (updates); metrics "er", "per",
/// "kappa".
struct DynamicsRow {
  std::int64_t step = 0;
  std::size_t layer = 0;
  std::string probe;
  std::string metric;
  double value = 0.0;
};

struct AggregateRow {
  std::int64_t step = 0;
  std::string probe;
  std::string metric;
  LayerAggregate stats;
};

struct MatrixMetrics {
  double er = 0.0;
  double per = 0.0;
  double kappa = 0.0;
};

MatrixMetrics matrix_metrics(const Matrix& m, std::size_t d_inter);

/// Weights: per-head OV circuits (metrics averaged over heads) and W_2.
/// Updates: for every O, V and W_2 site, the adapter delta s * down * up
/// when the site carries an adapter, otherwise the stored raw gradient.
/// d_inter is d_model for attention probes and d_ff for W_2. Zero matrices
/// give NaN rows.
std::vector<DynamicsRow> probe_checkpoint(const Checkpoint& ckpt, ProbeKind kind);

/// Layer mean and 95% interval per (step, probe, metric), NaN rows excluded.
std::vector<AggregateRow> aggregate_rows(const std::vector<DynamicsRow>& rows);

/// Columns: step,layer,probe,metric,value,is_nan
void write_dynamics_csv(const std::vector<DynamicsRow>& rows, const std::filesystem::path& path);
/// Columns: step,probe,metric,mean,ci_low,ci_high,n_layers
void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path);

/// Probes every checkpoint in `dir` (both kinds) and writes dynamics.csv
/// and dynamics_aggregate.csv into `out_dir`. Returns the row count.
std::size_t analyze_checkpoints(const std::filesystem::path& dir, const std::filesystem::path& out_dir);

}  // namespace relab
