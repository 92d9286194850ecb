#include "relab/io/config_json.hpp"

#include <set>
#include <string>

#include "relab/errors.hpp"

namespace relab {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename V>
void read(const json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    const auto& v = j.at(key);
    if constexpr (std::is_same_v<V, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + "." + key + " must be a boolean");
    } else if constexpr (std::is_integral_v<V>) {
      if (!v.is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
      if (std::is_unsigned_v<V> && v.get<std::int64_t>() < 0)
        throw ConfigError(where + "." + key + " must be non-negative");
    } else if constexpr (std::is_floating_point_v<V>) {
      if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
    }
    out = v.get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

json to_json(const DecoderConfig& c) {
  return {{"n_layers", c.n_layers},     {"n_heads", c.n_heads},       {"n_kv_heads", c.n_kv_heads},
          {"d_model", c.d_model},       {"d_ff", c.d_ff},             {"vocab_size", c.vocab_size},
          {"max_seq_len", c.max_seq_len}, {"rope_theta", c.rope_theta}, {"rmsnorm_eps", c.rmsnorm_eps}};
}

json to_json(const ReloraConfig& c) {
  json targets = json::array();
  for (auto p : kAllProjections)
    if (c.targets.count(p)) targets.push_back(std::string(projection_name(p)));
  return {{"targets", targets},
          {"rank", c.rank},
          {"alpha", c.alpha},
          {"dropout", c.dropout},
          {"reset_frequency", c.reset_frequency},
          {"prune_proportion", c.prune_proportion},
          {"trainable_scaling", c.trainable_scaling},
          {"full_rank_warmup_steps", c.full_rank_warmup_steps}};
}

json to_json(const ScheduleConfig& c) {
  return {{"kind", std::string(schedule_kind_name(c.kind))},
          {"peak_lr", c.peak_lr},
          {"total_steps", c.total_steps},
          {"warmup_steps", c.warmup_steps},
          {"min_lr_ratio", c.min_lr_ratio},
          {"restart_warmup_steps", c.restart_warmup_steps},
          {"reset_frequency", c.reset_frequency}};
}

json to_json(const AdamWOptions& o) {
  return {{"betas", {o.beta1, o.beta2}}, {"eps", o.eps}, {"weight_decay", o.weight_decay}};
}

DecoderConfig decoder_config_from_json(const json& j) {
  DecoderConfig c;
  if (j.is_string()) {
    auto p = DecoderConfig::preset(j.get<std::string>());
    if (!p) throw ConfigError("unknown model preset '" + j.get<std::string>() + "'");
    c = *p;
  } else {
    check_keys(j,
               {"preset", "n_layers", "n_heads", "n_kv_heads", "d_model", "d_ff", "vocab_size", "max_seq_len",
                "rope_theta", "rmsnorm_eps"},
               "model");
    if (j.contains("preset")) c = decoder_config_from_json(j.at("preset"));
    read(j, "n_layers", c.n_layers, "model");
    read(j, "n_heads", c.n_heads, "model");
    read(j, "n_kv_heads", c.n_kv_heads, "model");
    read(j, "d_model", c.d_model, "model");
    read(j, "d_ff", c.d_ff, "model");
    read(j, "vocab_size", c.vocab_size, "model");
    read(j, "max_seq_len", c.max_seq_len, "model");
    read(j, "rope_theta", c.rope_theta, "model");
    read(j, "rmsnorm_eps", c.rmsnorm_eps, "model");
  }
  c.validate();
  return c;
}

ReloraConfig relora_config_from_json(const json& j) {
  check_keys(j,
             {"targets", "rank", "alpha", "dropout", "reset_frequency", "prune_proportion", "trainable_scaling",
              "full_rank_warmup_steps"},
             "relora");
  ReloraConfig c;
  if (j.contains("targets")) {
    if (!j.at("targets").is_array()) throw ConfigError("relora.targets must be an array of names");
    std::vector<std::string> names;
    for (const auto& t : j.at("targets")) {
      if (!t.is_string()) throw ConfigError("relora.targets must be an array of names");
      names.push_back(t.get<std::string>());
    }
    c.targets = parse_targets(names);
  }
  read(j, "rank", c.rank, "relora");
  read(j, "alpha", c.alpha, "relora");
  read(j, "dropout", c.dropout, "relora");
  read(j, "reset_frequency", c.reset_frequency, "relora");
  read(j, "prune_proportion", c.prune_proportion, "relora");
  read(j, "trainable_scaling", c.trainable_scaling, "relora");
  read(j, "full_rank_warmup_steps", c.full_rank_warmup_steps, "relora");
  c.validate();
  return c;
}

}  // namespace relab
