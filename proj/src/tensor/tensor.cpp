#include "relab/tensor/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "relab/errors.hpp"

namespace relab {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad) : storage_(std::make_shared<Storage>()) {
  check_shape(shape);
  storage_->data.assign(shape_numel(shape), T(0));
  storage_->shape = std::move(shape);
  storage_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : storage_(std::make_shared<Storage>()) {
  check_shape(shape);
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_str(shape));
  }
  storage_->shape = std::move(shape);
  storage_->data = std::move(data);
  storage_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  static const Shape kEmpty;
  return storage_ ? storage_->shape : kEmpty;
}

template <typename T>
std::size_t Tensor<T>::dim(int i) const {
  const auto& s = shape();
  const int r = static_cast<int>(s.size());
  const int idx = i < 0 ? r + i : i;
  if (idx < 0 || idx >= r) {
    throw ShapeError("dimension index " + std::to_string(i) + " out of range for " + shape_str(s));
  }
  return s[static_cast<std::size_t>(idx)];
}

template <typename T>
std::size_t Tensor<T>::numel() const {
  return storage_ ? storage_->data.size() : 0;
}

template <typename T>
std::span<T> Tensor<T>::data() {
  return storage_ ? std::span<T>(storage_->data) : std::span<T>();
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  return storage_ ? std::span<const T>(storage_->data) : std::span<const T>();
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() needs a single-element tensor, got " + shape_str(shape()));
  return storage_->data[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return storage_ && storage_->requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
  storage_->requires_grad = on;
  if (!on) storage_->grad.clear();
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return storage_ && !storage_->grad.empty();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  return storage_ ? std::span<const T>(storage_->grad) : std::span<const T>();
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() const {
  if (!requires_grad()) throw Error("gradient requested for a tensor without requires_grad");
  if (storage_->grad.empty()) storage_->grad.assign(storage_->data.size(), T(0));
  return storage_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (storage_) std::fill(storage_->grad.begin(), storage_->grad.end(), T(0));
}

template <typename T>
void Tensor<T>::clear_grad() {
  if (storage_) {
    storage_->grad.clear();
    storage_->grad.shrink_to_fit();
  }
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  if (!storage_) return {};
  return Tensor(storage_->shape, storage_->data, storage_->requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  if (!storage_) return {};
  return Tensor(storage_->shape, storage_->data, false);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace relab
