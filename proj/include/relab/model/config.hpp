#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace relab {

/// Architecture hyperparameters of the Llama-style decoder.
struct DecoderConfig {
  std::size_t n_layers = 12;
  std::size_t n_heads = 12;
  std::size_t n_kv_heads = 4;
  std::size_t d_model = 96;
  std::size_t d_ff = 384;
  std::size_t vocab_size = 50304;
  std::size_t max_seq_len = 2048;
  double rope_theta = 10000.0;
  double rmsnorm_eps = 1e-6;

  static DecoderConfig tiny();
  static DecoderConfig small();
  /// Named preset lookup ("tiny", "small"); nullopt when unknown.
  static std::optional<DecoderConfig> preset(std::string_view name);

  std::size_t head_dim() const { return d_model / n_heads; }
  std::size_t kv_dim() const { return n_kv_heads * head_dim(); }
  std::size_t heads_per_kv() const { return n_heads / n_kv_heads; }

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  bool operator==(const DecoderConfig&) const = default;
};

/// The seven linear projections of a block.
enum class Projection { kQ, kK, kV, kO, kW1, kW2, kW3 };

inline constexpr std::array<Projection, 7> kAllProjections = {
    Projection::kQ, Projection::kK, Projection::kV, Projection::kO,
    Projection::kW1, Projection::kW2, Projection::kW3};

std::string_view projection_name(Projection p);
std::optional<Projection> parse_projection(std::string_view name);
bool is_attention(Projection p);

/// Stored weight shape of a projection as [in, out] (row-vector convention y = x W).
std::array<std::size_t, 2> projection_shape(const DecoderConfig& cfg, Projection p);

}  // namespace relab
