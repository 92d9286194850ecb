#pragma once

#include <cstdint>
#include <vector>

#include "relab/tensor/tensor.hpp"

namespace relab {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// AdamW with bias correction and decoupled weight decay:
///   p <- p * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
///
/// Only parameters with requires_grad are updated; frozen tensors are never
/// touched, decay included. Moments are tracked per registered tensor and
/// survive in-place edits of the tensor's values.
template <typename T>
class AdamW {
 public:
  struct Moments {
    std::vector<T> m;
    std::vector<T> v;
  };

  AdamW(std::vector<Tensor<T>> params, AdamWOptions options);

  /// One update at learning rate `lr`. Throws NumericError before modifying
  /// anything if any gradient is non-finite.
  void step(double lr);

  /// Registers additional parameters (fresh zero moments); already-known
  /// tensors are ignored.
  void add_params(const std::vector<Tensor<T>>& params);
  /// Forgets parameters that are no longer trainable.
  void drop_frozen();

  Moments& moments(const Tensor<T>& param);
  const Moments& moments(const Tensor<T>& param) const;
  bool tracks(const Tensor<T>& param) const;

  const std::vector<Tensor<T>>& params() const { return params_; }
  std::int64_t step_count() const { return t_; }
  const AdamWOptions& options() const { return options_; }

 private:
  std::size_t index_of(const Tensor<T>& param) const;

  AdamWOptions options_;
  std::vector<Tensor<T>> params_;
  std::vector<Moments> moments_;
  std::int64_t t_ = 0;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace relab
