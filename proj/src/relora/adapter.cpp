#include "relab/relora/adapter.hpp"

#include "relab/errors.hpp"

namespace relab {

template <typename T>
Matrix AdapterPair<T>::delta() const {
  return scale * (to_matrix(down) * to_matrix(up));
}

template <typename T>
Matrix Linear<T>::effective_weight() const {
  Matrix w = to_matrix(weight);
  if (adapter) w = w + adapter->delta();
  return w;
}

template <typename T>
Tensor<T> linear_forward(Tape<T>& tape, const Tensor<T>& x, const Linear<T>& layer, const ForwardMode& mode) {
  if (x.dim(-1) != layer.in_features()) {
    throw ShapeError("linear: input width " + std::to_string(x.dim(-1)) + " does not match weight " +
                     shape_str(layer.weight.shape()));
  }
  Tensor<T> y = ops::matmul(tape, x, layer.weight);
  if (!layer.adapter) return y;
  const auto& ad = *layer.adapter;
  Tensor<T> xin = x;
  if (mode.training && ad.dropout > 0.0) {
    if (mode.rng == nullptr) throw ConfigError("adapter dropout in training mode needs an rng");
    xin = ops::dropout(tape, x, ad.dropout, *mode.rng, true);
  }
  Tensor<T> branch = ops::matmul(tape, ops::matmul(tape, xin, ad.down), ad.up);
  return ops::add(tape, y, ops::scale(tape, branch, static_cast<T>(ad.scale)));
}

template struct AdapterPair<float>;
template struct AdapterPair<double>;
template struct Linear<float>;
template struct Linear<double>;
template Tensor<float> linear_forward(Tape<float>&, const Tensor<float>&, const Linear<float>&, const ForwardMode&);
template Tensor<double> linear_forward(Tape<double>&, const Tensor<double>&, const Linear<double>&,
                                       const ForwardMode&);

}  // namespace relab
