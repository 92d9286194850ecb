#include "relab/model/decoder.hpp"

#include <cmath>

#include "relab/errors.hpp"

namespace relab {

std::vector<std::int32_t> next_token_targets(const TokenBatch& batch) {
  std::vector<std::int32_t> targets(batch.ids.size(), ops::kIgnoreIndex);
  for (std::size_t b = 0; b < batch.batch; ++b)
    for (std::size_t t = 0; t + 1 < batch.seq; ++t) targets[b * batch.seq + t] = batch.ids[b * batch.seq + t + 1];
  return targets;
}

std::string projection_site_name(std::size_t layer, Projection p) {
  const char* block = is_attention(p) ? "attention" : "feed_forward";
  return "layers." + std::to_string(layer) + "." + block + "." + std::string(projection_name(p));
}

std::size_t base_param_count(const DecoderConfig& c) {
  std::size_t per_layer = 2 * c.d_model;  // two norm gains
  for (auto p : kAllProjections) {
    const auto s = projection_shape(c, p);
    per_layer += s[0] * s[1];
  }
  return 2 * c.vocab_size * c.d_model + c.n_layers * per_layer + c.d_model;
}

template <typename T>
Linear<T>& DecoderLayer<T>::projection(Projection p) {
  switch (p) {
    case Projection::kQ: return wq;
    case Projection::kK: return wk;
    case Projection::kV: return wv;
    case Projection::kO: return wo;
    case Projection::kW1: return w1;
    case Projection::kW2: return w2;
    case Projection::kW3: return w3;
  }
  throw Error("unknown projection");
}

template <typename T>
const Linear<T>& DecoderLayer<T>::projection(Projection p) const {
  return const_cast<DecoderLayer<T>*>(this)->projection(p);
}

namespace {

template <typename T>
Tensor<T> normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape), true);
  for (auto& v : t.data()) v = static_cast<T>(stddev * standard_normal(rng));
  return t;
}

template <typename T>
Tensor<T> ones(std::size_t n) {
  return Tensor<T>(Shape{n}, std::vector<T>(n, T(1)), true);
}

template <typename T>
Tensor<T> deep_copy(const Tensor<T>& t) {
  return t.defined() ? t.clone() : Tensor<T>{};
}

template <typename T>
Linear<T> copy_linear(const Linear<T>& l) {
  Linear<T> out{deep_copy(l.weight), std::nullopt};
  if (l.adapter) {
    out.adapter = AdapterPair<T>{deep_copy(l.adapter->down), deep_copy(l.adapter->up), l.adapter->scale,
                                 l.adapter->dropout};
  }
  return out;
}

}  // namespace

template <typename T>
DecoderModel<T> DecoderModel<T>::build(const DecoderConfig& config, std::uint64_t seed) {
  config.validate();
  constexpr double kInitStd = 0.02;
  Rng rng(seed);
  DecoderModel model(config);
  model.embedding_ = normal_tensor<T>({config.vocab_size, config.d_model}, kInitStd, rng);
  model.layers_.resize(config.n_layers);
  for (auto& layer : model.layers_) {
    layer.attention_norm = ones<T>(config.d_model);
    for (auto p : {Projection::kQ, Projection::kK, Projection::kV, Projection::kO}) {
      const auto s = projection_shape(config, p);
      layer.projection(p).weight = normal_tensor<T>({s[0], s[1]}, kInitStd, rng);
    }
    layer.ffn_norm = ones<T>(config.d_model);
    for (auto p : {Projection::kW1, Projection::kW2, Projection::kW3}) {
      const auto s = projection_shape(config, p);
      layer.projection(p).weight = normal_tensor<T>({s[0], s[1]}, kInitStd, rng);
    }
  }
  model.final_norm_ = ones<T>(config.d_model);
  model.head_ = normal_tensor<T>({config.d_model, config.vocab_size}, kInitStd, rng);
  return model;
}

template <typename T>
DecoderModel<T> DecoderModel<T>::clone() const {
  DecoderModel copy(config_);
  copy.embedding_ = deep_copy(embedding_);
  copy.layers_.reserve(layers_.size());
  for (const auto& l : layers_) {
    copy.layers_.push_back(DecoderLayer<T>{deep_copy(l.attention_norm), copy_linear(l.wq), copy_linear(l.wk),
                                           copy_linear(l.wv), copy_linear(l.wo), deep_copy(l.ffn_norm),
                                           copy_linear(l.w1), copy_linear(l.w2), copy_linear(l.w3)});
  }
  copy.final_norm_ = deep_copy(final_norm_);
  copy.head_ = deep_copy(head_);
  return copy;
}

template <typename T>
Tensor<T> DecoderModel<T>::forward(Tape<T>& tape, const TokenBatch& tokens, const ForwardMode& mode) const {
  const auto& c = config_;
  if (tokens.batch == 0 || tokens.seq == 0 || tokens.ids.size() != tokens.batch * tokens.seq) {
    throw InputError("token batch is empty or its ids do not match batch x seq");
  }
  if (tokens.seq > c.max_seq_len) {
    throw InputError("sequence length " + std::to_string(tokens.seq) + " exceeds max_seq_len " +
                     std::to_string(c.max_seq_len));
  }
  const std::size_t B = tokens.batch, S = tokens.seq, H = c.n_heads, G = c.n_kv_heads, D = c.head_dim();
  const T attn_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(D)));

  Tensor<T> x = ops::embedding(tape, embedding_, tokens.ids, B, S);
  for (const auto& layer : layers_) {
    Tensor<T> h = ops::rms_norm(tape, x, layer.attention_norm, c.rmsnorm_eps);

    auto heads = [&](const Linear<T>& proj, std::size_t n) {
      Tensor<T> y = linear_forward(tape, h, proj, mode);
      return ops::swap_axes_12(tape, ops::reshape(tape, y, {B, S, n, D}));  // [B, n, S, D]
    };
    Tensor<T> q = ops::rope(tape, heads(layer.wq, H), c.rope_theta);
    Tensor<T> k = ops::repeat_heads(tape, ops::rope(tape, heads(layer.wk, G), c.rope_theta), H / G);
    Tensor<T> v = ops::repeat_heads(tape, heads(layer.wv, G), H / G);

    Tensor<T> scores = ops::scale(tape, ops::matmul(tape, q, ops::transpose_last(tape, k)), attn_scale);
    Tensor<T> attn = ops::softmax(tape, ops::causal_mask(tape, scores));
    Tensor<T> ctx = ops::reshape(tape, ops::swap_axes_12(tape, ops::matmul(tape, attn, v)), {B, S, c.d_model});
    x = ops::add(tape, x, linear_forward(tape, ctx, layer.wo, mode));

    Tensor<T> f = ops::rms_norm(tape, x, layer.ffn_norm, c.rmsnorm_eps);
    Tensor<T> gate = ops::silu(tape, linear_forward(tape, f, layer.w1, mode));
    Tensor<T> up = linear_forward(tape, f, layer.w3, mode);
    x = ops::add(tape, x, linear_forward(tape, ops::mul(tape, gate, up), layer.w2, mode));
  }
  Tensor<T> out = ops::rms_norm(tape, x, final_norm_, c.rmsnorm_eps);
  return ops::matmul(tape, out, head_);
}

template <typename T>
Tensor<T> DecoderModel<T>::loss(Tape<T>& tape, const TokenBatch& tokens, const ForwardMode& mode) const {
  const auto targets = next_token_targets(tokens);
  return ops::cross_entropy(tape, forward(tape, tokens, mode), targets);
}

template <typename T>
std::vector<NamedTensor<T>> DecoderModel<T>::named_parameters() const {
  std::vector<NamedTensor<T>> out;
  out.push_back({"tok_embeddings.weight", embedding_});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const std::string prefix = "layers." + std::to_string(i) + ".";
    out.push_back({prefix + "attention_norm.weight", l.attention_norm});
    for (auto p : kAllProjections) {
      if (p == Projection::kW1) out.push_back({prefix + "ffn_norm.weight", l.ffn_norm});
      const auto& lin = l.projection(p);
      const std::string site = projection_site_name(i, p);
      out.push_back({site + ".weight", lin.weight});
      if (lin.adapter) {
        out.push_back({site + ".lora_down", lin.adapter->down});
        out.push_back({site + ".lora_up", lin.adapter->up});
      }
    }
  }
  out.push_back({"norm.weight", final_norm_});
  out.push_back({"output.weight", head_});
  return out;
}

template <typename T>
std::vector<Tensor<T>> DecoderModel<T>::trainable_parameters() const {
  std::vector<Tensor<T>> out;
  for (auto& np : named_parameters())
    if (np.tensor.requires_grad()) out.push_back(np.tensor);
  return out;
}

template <typename T>
std::vector<LinearSite<T>> DecoderModel<T>::linear_sites() {
  std::vector<LinearSite<T>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    for (auto p : kAllProjections) out.push_back({projection_site_name(i, p), i, p, &layers_[i].projection(p)});
  return out;
}

template <typename T>
ParamCount DecoderModel<T>::count_params() const {
  ParamCount pc;
  for (const auto& np : named_parameters()) {
    pc.total += np.tensor.numel();
    if (np.tensor.requires_grad()) pc.trainable += np.tensor.numel();
  }
  return pc;
}

template <typename T>
void DecoderModel<T>::zero_grad() {
  for (auto& np : named_parameters()) np.tensor.zero_grad();
}

template <typename T>
std::vector<Matrix> DecoderModel<T>::ov_matrices(std::size_t layer) const {
  if (layer >= layers_.size()) {
    throw InputError("layer " + std::to_string(layer) + " out of range (model has " +
                     std::to_string(layers_.size()) + ")");
  }
  const auto& l = layers_[layer];
  const std::size_t D = config_.head_dim(), dm = config_.d_model;
  const Matrix wv = l.wv.effective_weight();  // [d_model, kv_dim]
  const Matrix wo = l.wo.effective_weight();  // [d_model (heads concat), d_model]
  std::vector<Matrix> out;
  out.reserve(config_.n_heads);
  for (std::size_t h = 0; h < config_.n_heads; ++h) {
    const std::size_t g = h / config_.heads_per_kv();
    Matrix v_slice(dm, D), o_slice(D, dm);
    for (std::size_t i = 0; i < dm; ++i)
      for (std::size_t j = 0; j < D; ++j) v_slice(i, j) = wv(i, g * D + j);
    for (std::size_t i = 0; i < D; ++i)
      for (std::size_t j = 0; j < dm; ++j) o_slice(i, j) = wo(h * D + i, j);
    out.push_back(v_slice * o_slice);
  }
  return out;
}

template struct DecoderLayer<float>;
template struct DecoderLayer<double>;
template class DecoderModel<float>;
template class DecoderModel<double>;

}  // namespace relab
