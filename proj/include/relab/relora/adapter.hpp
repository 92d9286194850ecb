#pragma once

#include <optional>

#include "relab/tensor/matrix.hpp"
#include "relab/tensor/ops.hpp"

namespace relab {

/// Forward-pass switches shared by every layer.
struct ForwardMode {
  bool training = false;
  /// Source of dropout masks; required only when training with dropout.
  Rng* rng = nullptr;
};

/// Low-rank factor pair attached to a frozen base weight.
///
/// Weights are stored input-major ([in, out], y = x W), so the factors are
/// kept in the same orientation: `down` is W_A transposed ([in, r]) and `up`
/// is W_B transposed ([r, out]). The stored update s * down * up is the
/// transpose of s * W_B * W_A and has the same singular values.
template <typename T>
struct AdapterPair {
  Tensor<T> down;
  Tensor<T> up;
  double scale = 2.0;
  double dropout = 0.0;

  std::size_t rank() const { return down.dim(1); }
  /// s * down * up in stored orientation.
  Matrix delta() const;
};

/// A projection with an optional adapter branch.
template <typename T>
struct Linear {
  Tensor<T> weight;
  std::optional<AdapterPair<T>> adapter;

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  /// Base weight plus the adapter delta, in stored orientation.
  Matrix effective_weight() const;
};

/// y = x W + s * (dropout(x) down) up.
///
/// Dropout touches the adapter input only and is inverted, so evaluation mode
/// computes exactly x (W + s down up).
template <typename T>
Tensor<T> linear_forward(Tape<T>& tape, const Tensor<T>& x, const Linear<T>& layer, const ForwardMode& mode);

extern template struct AdapterPair<float>;
extern template struct AdapterPair<double>;
extern template struct Linear<float>;
extern template struct Linear<double>;

}  // namespace relab
