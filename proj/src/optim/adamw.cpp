#include "relab/optim/adamw.hpp"

#include <cmath>

#include "relab/errors.hpp"

namespace relab {

template <typename T>
AdamW<T>::AdamW(std::vector<Tensor<T>> params, AdamWOptions options) : options_(options) {
  add_params(params);
}

template <typename T>
void AdamW<T>::add_params(const std::vector<Tensor<T>>& params) {
  for (const auto& p : params) {
    if (tracks(p)) continue;
    params_.push_back(p);
    moments_.push_back({std::vector<T>(p.numel(), T(0)), std::vector<T>(p.numel(), T(0))});
  }
}

template <typename T>
void AdamW<T>::drop_frozen() {
  std::vector<Tensor<T>> keep_p;
  std::vector<Moments> keep_m;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].requires_grad()) continue;
    keep_p.push_back(params_[i]);
    keep_m.push_back(std::move(moments_[i]));
  }
  params_ = std::move(keep_p);
  moments_ = std::move(keep_m);
}

template <typename T>
std::size_t AdamW<T>::index_of(const Tensor<T>& param) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].same_storage(param)) return i;
  return params_.size();
}

template <typename T>
bool AdamW<T>::tracks(const Tensor<T>& param) const {
  return index_of(param) < params_.size();
}

template <typename T>
typename AdamW<T>::Moments& AdamW<T>::moments(const Tensor<T>& param) {
  const auto i = index_of(param);
  if (i == params_.size()) throw Error("parameter is not registered with the optimizer");
  return moments_[i];
}

template <typename T>
const typename AdamW<T>::Moments& AdamW<T>::moments(const Tensor<T>& param) const {
  return const_cast<AdamW<T>*>(this)->moments(param);
}

template <typename T>
void AdamW<T>::step(double lr) {
  for (const auto& p : params_) {
    if (!p.requires_grad()) continue;
    for (T g : p.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in a parameter of shape " + shape_str(p.shape()) +
                           "; optimizer step aborted at step " + std::to_string(t_ + 1));
      }
    }
  }
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double decay = 1.0 - lr * options_.weight_decay;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.requires_grad()) continue;
    auto data = p.data();
    const auto grad = p.grad();
    auto& mo = moments_[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[j]);
      const double m = b1 * mo.m[j] + (1.0 - b1) * g;
      const double v = b2 * mo.v[j] + (1.0 - b2) * g * g;
      mo.m[j] = static_cast<T>(m);
      mo.v[j] = static_cast<T>(v);
      const double update = (m / bc1) / (std::sqrt(v / bc2) + options_.eps);
      data[j] = static_cast<T>(static_cast<double>(data[j]) * decay - lr * update);
    }
  }
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace relab
