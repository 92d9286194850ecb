#include "relab/train/run_config.hpp"

#include <fstream>
#include <set>

#include "relab/errors.hpp"
#include "relab/io/config_json.hpp"

namespace relab {

using nlohmann::json;

namespace {

const json& section(const json& j, const char* name, const std::set<std::string>& keys) {
  static const json kEmpty = json::object();
  if (!j.contains(name)) return kEmpty;
  const auto& s = j.at(name);
  if (!s.is_object()) throw ConfigError(std::string(name) + " must be an object");
  for (const auto& [k, v] : s.items())
    if (!keys.count(k)) throw ConfigError("unknown key '" + k + "' in " + name);
  return s;
}

template <typename V>
bool read(const json& s, const char* key, V& out, const char* where) {
  if (!s.contains(key)) return false;
  const auto& v = s.at(key);
  const std::string path = std::string(where) + "." + key;
  if constexpr (std::is_same_v<V, std::string>) {
    if (!v.is_string()) throw ConfigError(path + " must be a string");
  } else if constexpr (std::is_integral_v<V>) {
    if (!v.is_number_integer()) throw ConfigError(path + " must be an integer");
    if (std::is_unsigned_v<V> && v.get<std::int64_t>() < 0) throw ConfigError(path + " must be non-negative");
  } else {
    if (!v.is_number()) throw ConfigError(path + " must be a number");
  }
  out = v.get<V>();
  return true;
}

std::string resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (relora) relora->validate();
  schedule.validate();
  if (run.total_steps <= 0) throw ConfigError("run.total_steps must be positive");
  if (run.checkpoint_every <= 0) throw ConfigError("run.checkpoint_every must be positive");
  if (run.eval_every < 0) throw ConfigError("run.eval_every must be non-negative");
  if (run.grad_accumulation == 0) throw ConfigError("run.grad_accumulation must be positive");
  if (data.corpus_path.empty()) throw ConfigError("data.corpus_path is required");
  if (data.batch_size == 0) throw ConfigError("data.batch_size must be positive");
  if (data.seq_len < 2 || data.seq_len > model.max_seq_len)
    throw ConfigError("data.seq_len must lie in [2, model.max_seq_len]");
  if (run.eval_every > 0 && data.eval_path.empty()) throw ConfigError("run.eval_every needs data.eval_path");
  if (relora) {
    if (relora->reset_frequency % run.checkpoint_every != 0)
      throw ConfigError("run.checkpoint_every must divide relora.reset_frequency");
    if (relora->full_rank_warmup_steps >= run.total_steps)
      throw ConfigError("relora.full_rank_warmup_steps must be below run.total_steps");
  }
  if (optimizer.beta1 < 0.0 || optimizer.beta1 >= 1.0 || optimizer.beta2 < 0.0 || optimizer.beta2 >= 1.0)
    throw ConfigError("optimizer.betas must lie in [0, 1)");
  if (optimizer.eps <= 0.0) throw ConfigError("optimizer.eps must be positive");
  if (optimizer.weight_decay < 0.0) throw ConfigError("optimizer.weight_decay must be non-negative");
}

json RunConfig::to_json() const {
  return {{"model", relab::to_json(model)},
          {"relora", relora ? relab::to_json(*relora) : json(nullptr)},
          {"schedule", relab::to_json(schedule)},
          {"optimizer", relab::to_json(optimizer)},
          {"data",
           {{"corpus_path", data.corpus_path},
            {"eval_path", data.eval_path},
            {"batch_size", data.batch_size},
            {"seq_len", data.seq_len},
            {"eval_windows", data.eval_windows}}},
          {"run",
           {{"total_steps", run.total_steps},
            {"checkpoint_every", run.checkpoint_every},
            {"eval_every", run.eval_every},
            {"seed", run.seed},
            {"out_dir", run.out_dir},
            {"grad_accumulation", run.grad_accumulation}}}};
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (k != "model" && k != "relora" && k != "schedule" && k != "optimizer" && k != "data" && k != "run")
      throw ConfigError("unknown top-level key '" + k + "'");

  RunConfig c;
  if (!j.contains("model")) throw ConfigError("model section is required");
  c.model = decoder_config_from_json(j.at("model"));
  if (j.contains("relora") && !j.at("relora").is_null()) c.relora = relora_config_from_json(j.at("relora"));

  const auto& run = section(j, "run", {"total_steps", "checkpoint_every", "eval_every", "seed", "out_dir",
                                       "grad_accumulation"});
  read(run, "total_steps", c.run.total_steps, "run");
  c.run.checkpoint_every = c.relora ? c.relora->reset_frequency : c.run.total_steps;
  read(run, "checkpoint_every", c.run.checkpoint_every, "run");
  read(run, "eval_every", c.run.eval_every, "run");
  read(run, "seed", c.run.seed, "run");
  read(run, "out_dir", c.run.out_dir, "run");
  read(run, "grad_accumulation", c.run.grad_accumulation, "run");
  c.run.out_dir = resolve(c.run.out_dir, base_dir);

  const auto& data = section(j, "data", {"corpus_path", "eval_path", "batch_size", "seq_len", "eval_windows"});
  read(data, "corpus_path", c.data.corpus_path, "data");
  read(data, "eval_path", c.data.eval_path, "data");
  read(data, "batch_size", c.data.batch_size, "data");
  read(data, "seq_len", c.data.seq_len, "data");
  read(data, "eval_windows", c.data.eval_windows, "data");
  c.data.corpus_path = resolve(c.data.corpus_path, base_dir);
  c.data.eval_path = resolve(c.data.eval_path, base_dir);

  const auto& opt = section(j, "optimizer", {"lr", "betas", "eps", "weight_decay"});
  if (opt.contains("betas")) {
    const auto& b = opt.at("betas");
    if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number())
      throw ConfigError("optimizer.betas must be a pair of numbers");
    c.optimizer.beta1 = b[0].get<double>();
    c.optimizer.beta2 = b[1].get<double>();
  }
  read(opt, "eps", c.optimizer.eps, "optimizer");
  read(opt, "weight_decay", c.optimizer.weight_decay, "optimizer");

  // Baseline runs default to the linear schedule with a 2500-step warmup.
  auto& s = c.schedule;
  if (!c.relora) {
    s.kind = ScheduleKind::kLinear;
    s.warmup_steps = 2500;
  }
  const auto& sch = section(j, "schedule", {"kind", "peak_lr", "warmup_steps", "min_lr_ratio", "restart_warmup_steps",
                                            "total_steps", "reset_frequency"});
  std::string kind;
  if (read(sch, "kind", kind, "schedule")) s.kind = parse_schedule_kind(kind);
  double opt_lr = 0.0;
  const bool has_opt_lr = read(opt, "lr", opt_lr, "optimizer");
  const bool has_peak = read(sch, "peak_lr", s.peak_lr, "schedule");
  if (has_opt_lr && has_peak && opt_lr != s.peak_lr)
    throw ConfigError("optimizer.lr and schedule.peak_lr disagree");
  if (has_opt_lr) s.peak_lr = opt_lr;
  read(sch, "warmup_steps", s.warmup_steps, "schedule");
  read(sch, "min_lr_ratio", s.min_lr_ratio, "schedule");
  read(sch, "restart_warmup_steps", s.restart_warmup_steps, "schedule");

  s.total_steps = c.run.total_steps;
  std::int64_t explicit_total = 0;
  if (read(sch, "total_steps", explicit_total, "schedule") && explicit_total != s.total_steps)
    throw ConfigError("schedule.total_steps disagrees with run.total_steps");
  std::int64_t explicit_freq = 0;
  const bool has_freq = read(sch, "reset_frequency", explicit_freq, "schedule");
  if (c.relora) {
    if (has_freq && explicit_freq != c.relora->reset_frequency)
      throw ConfigError("schedule.reset_frequency disagrees with relora.reset_frequency");
    s.reset_frequency = c.relora->reset_frequency;
  } else if (has_freq) {
    s.reset_frequency = explicit_freq;
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

}  // namespace relab
