#include "relab/relora/relora.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relab/errors.hpp"

namespace relab {

void ReloraConfig::validate() const {
  if (rank < 1) throw ConfigError("relora: r must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("relora: alpha must be positive");
  if (!(dropout >= 0.0 && dropout <= 1.0)) throw ConfigError("relora: dropout must lie in [0, 1]");
  if (reset_frequency <= 0) throw ConfigError("relora: reset_frequency must be positive");
  if (!(prune_proportion >= 0.0 && prune_proportion <= 1.0)) {
    throw ConfigError("relora: prune_proportion must lie in [0, 1]");
  }
  if (trainable_scaling) throw ConfigError("relora: trainable scaling is not supported");
  if (full_rank_warmup_steps < 0) throw ConfigError("relora: full_rank_warmup_steps must be >= 0");
  if (targets.empty()) throw ConfigError("relora: no target modules");
}

std::set<Projection> parse_targets(const std::vector<std::string>& names) {
  std::set<Projection> out;
  for (const auto& n : names) {
    if (n == "attention") {
      out.insert({Projection::kQ, Projection::kK, Projection::kV, Projection::kO});
    } else if (n == "swiglu") {
      out.insert({Projection::kW1, Projection::kW2, Projection::kW3});
    } else if (auto p = parse_projection(n)) {
      out.insert(*p);
    } else {
      throw ConfigError("relora: unknown target module '" + n + "'");
    }
  }
  return out;
}

ParamCount expected_param_count(const DecoderConfig& config, const std::optional<ReloraConfig>& relora) {
  config.validate();
  const std::size_t total = base_param_count(config);
  if (!relora) return {total, total};
  std::size_t frozen = 0, adapters = 0;
  for (auto p : relora->targets) {
    const auto s = projection_shape(config, p);
    frozen += s[0] * s[1];
    adapters += relora->rank * (s[0] + s[1]);
  }
  frozen *= config.n_layers;
  adapters *= config.n_layers;
  return {total - frozen + adapters, total + adapters};
}

Matrix cumulative_update(const std::vector<FactorSnapshot>& snapshots, double scale, std::size_t rows,
                         std::size_t cols) {
  Matrix acc(rows, cols);
  for (const auto& s : snapshots) {
    if (s.down.rows != rows || s.up.cols != cols) throw ShapeError("cumulative_update: snapshot shape mismatch");
    acc = acc + s.down * s.up;
  }
  return scale * acc;
}

Matrix cumulative_update(const RestartLog& log, const std::string& site, std::size_t rows, std::size_t cols) {
  std::vector<FactorSnapshot> snaps;
  for (const auto& r : log.restarts) {
    auto it = r.factors.find(site);
    if (it != r.factors.end()) snaps.push_back(it->second);
  }
  return cumulative_update(snaps, log.scale, rows, cols);
}

template <typename T>
void prune_optimizer_state(AdamW<T>& optimizer, const std::vector<Tensor<T>>& params, double proportion, Rng& rng) {
  if (!(proportion >= 0.0 && proportion <= 1.0)) throw ConfigError("prune proportion must lie in [0, 1]");
  std::vector<std::size_t> idx;
  auto prune = [&](std::vector<T>& arr) {
    const auto k = static_cast<std::size_t>(std::floor(proportion * static_cast<double>(arr.size())));
    if (k == 0) return;
    idx.resize(arr.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform_index(rng, arr.size() - i));
      std::swap(idx[i], idx[j]);
      arr[idx[i]] = T(0);
    }
  };
  for (const auto& p : params) {
    auto& mo = optimizer.moments(p);
    prune(mo.m);
    prune(mo.v);
  }
}

template <typename T>
ReloraEngine<T>::ReloraEngine(ReloraConfig config, std::uint64_t seed) : config_(std::move(config)), rng_(seed) {
  config_.validate();
  log_.scale = config_.scale();
}

template <typename T>
void ReloraEngine<T>::reinit_down(Tensor<T>& down) {
  const double bound = std::sqrt(1.0 / static_cast<double>(down.dim(0)));
  for (auto& v : down.data()) v = static_cast<T>(uniform(rng_, -bound, bound));
}

template <typename T>
void ReloraEngine<T>::inject(const std::vector<LinearSite<T>>& sites) {
  for (const auto& site : sites) {
    if (!config_.targets.count(site.projection)) continue;
    const std::size_t in = site.linear->in_features(), out = site.linear->out_features();
    if (config_.rank >= std::min(in, out)) {
      throw ConfigError("relora: r=" + std::to_string(config_.rank) + " is not below min(" + std::to_string(in) +
                        ", " + std::to_string(out) + ") for " + site.name);
    }
    if (site.linear->adapter) throw ConfigError("relora: " + site.name + " already has an adapter");
  }
  for (const auto& site : sites) {
    if (!config_.targets.count(site.projection)) continue;
    auto& lin = *site.linear;
    AdapterPair<T> pair{Tensor<T>({lin.in_features(), config_.rank}, true),
                        Tensor<T>({config_.rank, lin.out_features()}, true), config_.scale(), config_.dropout};
    reinit_down(pair.down);
    lin.weight.set_requires_grad(false);
    lin.adapter = std::move(pair);
  }
}

template <typename T>
void ReloraEngine<T>::merge_and_reinit(const std::vector<LinearSite<T>>& sites, std::int64_t step) {
  RestartRecord record;
  record.step = step;
  for (const auto& site : sites) {
    auto& lin = *site.linear;
    if (!lin.adapter) continue;
    auto& ad = *lin.adapter;
    FactorSnapshot snap{to_matrix(ad.down), to_matrix(ad.up)};
    const Matrix delta = ad.scale * (snap.down * snap.up);
    auto w = lin.weight.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(static_cast<double>(w[i]) + delta.values[i]);
    record.factors.emplace(site.name, std::move(snap));
    reinit_down(ad.down);
    std::fill(ad.up.data().begin(), ad.up.data().end(), T(0));
  }
  log_.restarts.push_back(std::move(record));
}

template <typename T>
std::vector<Tensor<T>> ReloraEngine<T>::adapter_parameters(const std::vector<LinearSite<T>>& sites) {
  std::vector<Tensor<T>> out;
  for (const auto& site : sites) {
    if (!site.linear->adapter) continue;
    out.push_back(site.linear->adapter->down);
    out.push_back(site.linear->adapter->up);
  }
  return out;
}

template void prune_optimizer_state(AdamW<float>&, const std::vector<Tensor<float>>&, double, Rng&);
template void prune_optimizer_state(AdamW<double>&, const std::vector<Tensor<double>>&, double, Rng&);
template class ReloraEngine<float>;
template class ReloraEngine<double>;

}  // namespace relab
