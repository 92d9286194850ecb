#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "relab/model/decoder.hpp"
#include "relab/optim/adamw.hpp"

namespace relab {

struct ReloraConfig {
  std::set<Projection> targets = {Projection::kQ,  Projection::kK,  Projection::kV, Projection::kO,
                                  Projection::kW1, Projection::kW2, Projection::kW3};
  std::size_t rank = 16;
  double alpha = 32.0;
  double dropout = 0.1;
  std::int64_t reset_frequency = 2000;
  double prune_proportion = 0.99;
  /// Learned scaling is not supported; must stay false.
  bool trainable_scaling = false;
  std::int64_t full_rank_warmup_steps = 0;

  double scale() const { return alpha / static_cast<double>(rank); }
  /// Checks the scalar fields; rank against matrix sizes is checked on inject.
  void validate() const;
};

/// Expands group names ("attention", "swiglu") and projection names ("wq",
/// "w2", ...) into a target set.
std::set<Projection> parse_targets(const std::vector<std::string>& names);

/// Parameter counts of a model built from `config`, optionally with
/// adapters: frozen bases drop out of the trainable count and adapters add
/// r * (in + out) per target. Needs no allocation.
ParamCount expected_param_count(const DecoderConfig& config, const std::optional<ReloraConfig>& relora);

/// Factor snapshot of one adapter at merge time, stored orientation.
struct FactorSnapshot {
  Matrix down;  // [in, r]
  Matrix up;    // [r, out]
};

/// One completed restart: the step it fired at and every adapter's factors.
struct RestartRecord {
  std::int64_t step = 0;
  std::map<std::string, FactorSnapshot> factors;  // keyed by site name
};

struct RestartLog {
  double scale = 2.0;
  std::vector<RestartRecord> restarts;

  std::size_t size() const { return restarts.size(); }
};

/// s * sum_i down_i * up_i over the snapshots (zero matrix of the given
/// shape when empty). Stored orientation; the transpose of s * sum W_B W_A.
Matrix cumulative_update(const std::vector<FactorSnapshot>& snapshots, double scale, std::size_t rows,
                         std::size_t cols);

/// Cumulative update for one site across every restart in the log.
Matrix cumulative_update(const RestartLog& log, const std::string& site, std::size_t rows, std::size_t cols);

/// Zeroes exactly floor(proportion * len) entries, chosen uniformly without
/// replacement, of each first- and second-moment array belonging to the
/// given parameters. Each array draws its own mask. Other parameters'
/// states are untouched.
template <typename T>
void prune_optimizer_state(AdamW<T>& optimizer, const std::vector<Tensor<T>>& params, double proportion, Rng& rng);

/// Owns adapter injection, restart bookkeeping and the reinit RNG.
template <typename T>
class ReloraEngine {
 public:
  ReloraEngine(ReloraConfig config, std::uint64_t seed);

  const ReloraConfig& config() const { return config_; }
  const RestartLog& log() const { return log_; }
  RestartLog& log() { return log_; }

  /// Wraps every site whose projection is targeted: base frozen, down
  /// initialised fan-in uniform, up = 0. Throws ConfigError when
  /// rank >= min(in, out) for any target or when a site already has an adapter.
  void inject(const std::vector<LinearSite<T>>& sites);
  void inject(DecoderModel<T>& model) { inject(model.linear_sites()); }

  /// W <- W + s * down * up for every wrapped site, snapshot the factors,
  /// then reinitialise (down fan-in uniform, up = 0). Factor tensors are
  /// edited in place so optimizer registrations stay valid.
  void merge_and_reinit(const std::vector<LinearSite<T>>& sites, std::int64_t step);
  void merge_and_reinit(DecoderModel<T>& model, std::int64_t step) { merge_and_reinit(model.linear_sites(), step); }

  /// Adapter factor tensors of all wrapped sites.
  static std::vector<Tensor<T>> adapter_parameters(const std::vector<LinearSite<T>>& sites);

  Rng& rng() { return rng_; }

 private:
  void reinit_down(Tensor<T>& down);

  ReloraConfig config_;
  RestartLog log_;
  Rng rng_;
};

extern template class ReloraEngine<float>;
extern template class ReloraEngine<double>;

}  // namespace relab
