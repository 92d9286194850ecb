#include "relab/model/config.hpp"

#include "relab/errors.hpp"

namespace relab {

DecoderConfig DecoderConfig::tiny() {
  return DecoderConfig{};
}

DecoderConfig DecoderConfig::small() {
  DecoderConfig c;
  c.d_model = 384;
  c.d_ff = 1536;
  return c;
}

std::optional<DecoderConfig> DecoderConfig::preset(std::string_view name) {
  if (name == "tiny") return tiny();
  if (name == "small") return small();
  return std::nullopt;
}

void DecoderConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("decoder config: " + msg); };
  if (n_layers == 0 || n_heads == 0 || n_kv_heads == 0 || d_model == 0 || d_ff == 0 || vocab_size == 0 ||
      max_seq_len == 0) {
    fail("all sizes must be positive");
  }
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (n_heads % n_kv_heads != 0) fail("n_heads must be divisible by n_kv_heads");
  if (head_dim() % 2 != 0) fail("head_dim must be even for rotary embeddings");
  if (!(rope_theta > 0.0)) fail("rope_theta must be positive");
  if (!(rmsnorm_eps > 0.0)) fail("rmsnorm_eps must be positive");
}

std::string_view projection_name(Projection p) {
  switch (p) {
    case Projection::kQ: return "wq";
    case Projection::kK: return "wk";
    case Projection::kV: return "wv";
    case Projection::kO: return "wo";
    case Projection::kW1: return "w1";
    case Projection::kW2: return "w2";
    case Projection::kW3: return "w3";
  }
  return "?";
}

std::optional<Projection> parse_projection(std::string_view name) {
  for (auto p : kAllProjections)
    if (projection_name(p) == name) return p;
  return std::nullopt;
}

bool is_attention(Projection p) {
  return p == Projection::kQ || p == Projection::kK || p == Projection::kV || p == Projection::kO;
}

std::array<std::size_t, 2> projection_shape(const DecoderConfig& cfg, Projection p) {
  switch (p) {
    case Projection::kQ:
    case Projection::kO: return {cfg.d_model, cfg.d_model};
    case Projection::kK:
    case Projection::kV: return {cfg.d_model, cfg.kv_dim()};
    case Projection::kW1:
    case Projection::kW3: return {cfg.d_model, cfg.d_ff};
    case Projection::kW2: return {cfg.d_ff, cfg.d_model};
  }
  return {0, 0};
}

}  // namespace relab
