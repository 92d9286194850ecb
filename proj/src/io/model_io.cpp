#include "relab/io/model_io.hpp"

#include "relab/errors.hpp"
#include "relab/io/config_json.hpp"

namespace relab {

using nlohmann::json;

namespace {

bool is_probe_projection(Projection p) { return p == Projection::kO || p == Projection::kV || p == Projection::kW2; }

std::string restart_tensor(std::size_t i, const std::string& site, const char* factor) {
  return "restart/" + std::to_string(i) + "/" + site + "/" + factor;
}

}  // namespace

Checkpoint snapshot_model(DecoderModel<float>& model, const ReloraEngine<float>* engine,
                          const SnapshotInfo& info) {
  Checkpoint ckpt;
  const auto sites = model.linear_sites();
  const bool has_adapters = std::any_of(sites.begin(), sites.end(), [](const auto& s) { return s.linear->adapter; });

  const auto counts = model.count_params();
  json& h = ckpt.header;
  h["format_version"] = Checkpoint::kVersion;
  h["step"] = info.step;
  h["mode"] = info.mode;
  h["dtype"] = "f32";
  h["model"] = to_json(model.config());
  h["param_count"] = {{"trainable", counts.trainable}, {"total", counts.total}};
  h["adapters"] = has_adapters && engine ? to_json(engine->config()) : json(nullptr);
  h["scale"] = engine ? engine->config().scale() : 0.0;
  json restart_steps = json::array();
  if (engine)
    for (const auto& r : engine->log().restarts) restart_steps.push_back(r.step);
  h["restart_count"] = restart_steps.size();
  h["restart_steps"] = restart_steps;
  h["config"] = info.run_config;

  for (const auto& np : model.named_parameters()) ckpt.add("param/" + np.name, StoredTensor::from(np.tensor));

  for (const auto& site : sites) {
    const auto& w = site.linear->weight;
    if (!is_probe_projection(site.projection) || !w.requires_grad()) continue;
    StoredTensor g{w.shape(), DType::kF32, std::vector<double>(w.numel(), 0.0)};
    if (w.has_grad()) g.values.assign(w.grad().begin(), w.grad().end());
    ckpt.add("grad/" + site.name + ".weight", std::move(g));
  }

  if (engine) {
    const auto& restarts = engine->log().restarts;
    for (std::size_t i = 0; i < restarts.size(); ++i) {
      for (const auto& [site, snap] : restarts[i].factors) {
        ckpt.add(restart_tensor(i, site, "down"), StoredTensor::from(snap.down, DType::kF32));
        ckpt.add(restart_tensor(i, site, "up"), StoredTensor::from(snap.up, DType::kF32));
      }
    }
  }
  return ckpt;
}

LoadedModel load_model(const Checkpoint& ckpt) {
  const auto& h = ckpt.header;
  if (!h.contains("model")) throw FormatError("checkpoint header has no model section");
  DecoderConfig cfg;
  std::optional<ReloraConfig> adapters;
  try {
    cfg = decoder_config_from_json(h.at("model"));
    if (h.contains("adapters") && !h.at("adapters").is_null()) adapters = relora_config_from_json(h.at("adapters"));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  LoadedModel out{DecoderModel<float>::build(cfg, 0), adapters};
  if (adapters) {
    auto rc = *adapters;
    rc.dropout = 0.0;
    ReloraEngine<float>(rc, 0).inject(out.model);
  }
  for (auto& np : out.model.named_parameters()) {
    const auto name = "param/" + np.name;
    if (!ckpt.has(name)) throw FormatError("checkpoint is missing tensor '" + name + "'");
    const auto& st = ckpt.tensor(name);
    if (st.shape != np.tensor.shape())
      throw FormatError("tensor '" + name + "' has shape " + shape_str(st.shape) + ", expected " +
                        shape_str(np.tensor.shape()));
    auto dst = np.tensor.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(st.values[i]);
  }
  return out;
}

RestartLog restart_log_from(const Checkpoint& ckpt) {
  RestartLog log;
  log.scale = ckpt.header.value("scale", 0.0);
  const auto steps = ckpt.header.value("restart_steps", json::array());
  log.restarts.resize(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) log.restarts[i].step = steps[i].get<std::int64_t>();
  for (const auto& [name, t] : ckpt.tensors) {
    if (!name.starts_with("restart/")) continue;
    const auto a = name.find('/', 8);
    const auto b = name.rfind('/');
    if (a == std::string::npos || b <= a) throw FormatError("bad restart tensor name '" + name + "'");
    const auto i = std::stoul(name.substr(8, a - 8));
    if (i >= log.restarts.size()) throw FormatError("restart tensor '" + name + "' beyond restart_count");
    auto& snap = log.restarts[i].factors[name.substr(a + 1, b - a - 1)];
    (name.substr(b + 1) == "down" ? snap.down : snap.up) = t.matrix();
  }
  return log;
}

}  // namespace relab
