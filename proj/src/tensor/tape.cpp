#include "relab/tensor/tape.hpp"

#include "relab/errors.hpp"

namespace relab {

template <typename T>
bool Tape<T>::record(const Tensor<T>& out, const char* op, std::function<void()> backward) {
  if (!enabled_ || !out.requires_grad()) return false;
  entries_.push_back({op, std::move(backward)});
  return true;
}

template <typename T>
void Tape<T>::backward(Tensor<T> root) {
  if (root.numel() != 1) throw ShapeError("backward() needs a scalar root, got " + shape_str(root.shape()));
  if (!root.requires_grad()) throw Error("backward() root does not require grad");
  root.mutable_grad()[0] += T(1);
  // Entries are popped as they run so a closure can never fire twice.
  while (!entries_.empty()) {
    auto entry = std::move(entries_.back());
    entries_.pop_back();
    entry.backward();
  }
}

template <typename T>
std::vector<std::string> Tape<T>::op_names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (const auto& e : entries_) names.emplace_back(e.op);
  return names;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace relab
