#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace relab {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major n-dimensional array with an optional gradient buffer.
///
/// A Tensor is a shared handle: copies alias the same storage, which is what
/// lets the tape and the optimizer refer to model parameters. Use clone() for
/// an independent copy. The gradient buffer is allocated on first
/// accumulation and only ever for tensors with requires_grad set.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::move(shape), requires_grad);
  }
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(storage_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  /// Size of dimension i; negative i counts from the back.
  std::size_t dim(int i) const;
  std::size_t numel() const;

  std::span<T> data();
  std::span<const T> data() const;
  T item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  /// Gradient view; empty span when nothing has been accumulated yet.
  std::span<const T> grad() const;
  /// Gradient buffer, allocated (zero-filled) on demand. Only valid when
  /// requires_grad() is true. Const because the gradient belongs to the shared
  /// storage, not to the handle.
  std::span<T> mutable_grad() const;
  void zero_grad();
  /// Drops the gradient buffer entirely.
  void clear_grad();

  /// Deep copy of values (no gradient); requires_grad carried over.
  Tensor clone() const;
  /// New handle over a copy of the values with requires_grad off.
  Tensor detach() const;

  /// True when both handles refer to the same storage.
  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> storage_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace relab
