#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relab/model/config.hpp"
#include "relab/relora/adapter.hpp"

namespace relab {

/// Token ids laid out row-major as [batch, seq].
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::vector<std::int32_t> ids;

  std::span<const std::int32_t> row(std::size_t b) const { return {ids.data() + b * seq, seq}; }
};

/// Next-token targets for a batch: position t predicts ids[t+1]; the last
/// position of every row is ignored.
std::vector<std::int32_t> next_token_targets(const TokenBatch& batch);

struct ParamCount {
  std::size_t trainable = 0;
  std::size_t total = 0;
  bool operator==(const ParamCount&) const = default;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
struct DecoderLayer {
  Tensor<T> attention_norm;
  Linear<T> wq, wk, wv, wo;
  Tensor<T> ffn_norm;
  Linear<T> w1, w2, w3;

  Linear<T>& projection(Projection p);
  const Linear<T>& projection(Projection p) const;
};

/// Handle to one projection inside a model; the pointer stays valid for the
/// lifetime of the owning model (layers never reallocate after build).
template <typename T>
struct LinearSite {
  std::string name;
  std::size_t layer = 0;
  Projection projection = Projection::kQ;
  Linear<T>* linear = nullptr;
};

/// Llama-style decoder: token embedding, n_layers pre-norm blocks
/// (RMSNorm, grouped-query attention with RoPE, residual, RMSNorm, SwiGLU,
/// residual), final RMSNorm and an untied output head. No biases.
template <typename T>
class DecoderModel {
 public:
  /// Embeddings and linear weights ~ N(0, 0.02), norm gains = 1.
  static DecoderModel build(const DecoderConfig& config, std::uint64_t seed);

  DecoderModel(const DecoderModel&) = delete;
  DecoderModel& operator=(const DecoderModel&) = delete;
  DecoderModel(DecoderModel&&) noexcept = default;
  DecoderModel& operator=(DecoderModel&&) noexcept = default;

  /// Independent deep copy (adapters included).
  DecoderModel clone() const;

  const DecoderConfig& config() const { return config_; }

  /// Logits [batch, seq, vocab].
  Tensor<T> forward(Tape<T>& tape, const TokenBatch& tokens, const ForwardMode& mode = {}) const;
  /// Mean next-token cross-entropy of the batch.
  Tensor<T> loss(Tape<T>& tape, const TokenBatch& tokens, const ForwardMode& mode = {}) const;

  std::vector<NamedTensor<T>> named_parameters() const;
  std::vector<Tensor<T>> trainable_parameters() const;
  std::vector<LinearSite<T>> linear_sites();
  ParamCount count_params() const;
  void zero_grad();

  /// Per-head OV circuits of a layer, each d_model x d_model with rank at
  /// most head_dim. Uses effective weights (adapter deltas included).
  std::vector<Matrix> ov_matrices(std::size_t layer) const;

  DecoderLayer<T>& layer(std::size_t i) { return layers_.at(i); }
  const DecoderLayer<T>& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t n_layers() const { return layers_.size(); }
  Tensor<T>& token_embedding() { return embedding_; }
  Tensor<T>& final_norm() { return final_norm_; }
  Tensor<T>& output_head() { return head_; }

 private:
  explicit DecoderModel(DecoderConfig config) : config_(std::move(config)) {}

  DecoderConfig config_;
  Tensor<T> embedding_;
  std::vector<DecoderLayer<T>> layers_;
  Tensor<T> final_norm_;
  Tensor<T> head_;
};

/// Parameter name for a projection site, e.g. "layers.3.feed_forward.w2".
std::string projection_site_name(std::size_t layer, Projection p);

/// Closed-form parameter total of an unadapted model built from `config`.
std::size_t base_param_count(const DecoderConfig& config);

extern template class DecoderModel<float>;
extern template class DecoderModel<double>;

}  // namespace relab
