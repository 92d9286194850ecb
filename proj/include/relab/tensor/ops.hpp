#pragma once

#include <cstdint>
#include <span>

#include "relab/tensor/random.hpp"
#include "relab/tensor/tape.hpp"
#include "relab/tensor/tensor.hpp"

// Differentiable operations. Every op computes its forward value eagerly and,
// when the tape is enabled and some input requires grad, records a closure
// that accumulates input gradients from the output gradient.
//
// Broadcasting is limited to two cases: a single-element right operand
// (scalar) and a right operand whose shape is a suffix of the left operand's
// shape (leading-batch). Anything else needs an explicit reshape.
namespace relab::ops {

/// Target id excluded from cross_entropy (padding / no next token).
inline constexpr std::int32_t kIgnoreIndex = -1;

/// [..., m, k] x [k, n] -> [..., m, n], or batched [..., m, k] x [..., k, n]
/// with identical leading dimensions.
template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Swaps the last two dimensions.
template <typename T>
Tensor<T> transpose_last(Tape<T>& tape, const Tensor<T>& a);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Elementwise product, same broadcasting rules as add().
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor);

/// x * sigmoid(x)
template <typename T>
Tensor<T> silu(Tape<T>& tape, const Tensor<T>& a);

/// Softmax over the last axis.
template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& a);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a);

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& a);

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& a, Shape shape);

/// [A, B, C, D] -> [A, C, B, D]
template <typename T>
Tensor<T> swap_axes_12(Tape<T>& tape, const Tensor<T>& a);

/// [B, G, S, D] -> [B, G*n_rep, S, D]; output head h reads input head h / n_rep.
template <typename T>
Tensor<T> repeat_heads(Tape<T>& tape, const Tensor<T>& a, std::size_t n_rep);

/// Sets entries above the diagonal of the trailing [S, S] block to -inf.
template <typename T>
Tensor<T> causal_mask(Tape<T>& tape, const Tensor<T>& scores);

/// x * gain / sqrt(mean(x^2) + eps) over the last axis.
template <typename T>
Tensor<T> rms_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain, double eps);

/// Rotary position embedding on [B, H, S, D]; rotates the dimension pairs
/// (2i, 2i+1) of position s by s * theta^(-2i/D).
template <typename T>
Tensor<T> rope(Tape<T>& tape, const Tensor<T>& x, double theta);

/// Row gather from a [V, d] table; ids has batch*seq entries -> [batch, seq, d].
template <typename T>
Tensor<T> embedding(Tape<T>& tape, const Tensor<T>& table, std::span<const std::int32_t> ids,
                    std::size_t batch, std::size_t seq);

/// Mean negative log-likelihood (natural log) of `targets` under
/// softmax(logits) over the last axis. One target per leading position;
/// kIgnoreIndex positions are excluded from the mean.
template <typename T>
Tensor<T> cross_entropy(Tape<T>& tape, const Tensor<T>& logits, std::span<const std::int32_t> targets);

/// Inverted dropout. Identity (same handle) when !training or p == 0.
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double p, Rng& rng, bool training);

}  // namespace relab::ops
