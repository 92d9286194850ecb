#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "relab/tensor/tensor.hpp"

namespace relab {

/// Ordered record of executed operations.
///
/// Each differentiable op appends a backward closure at the moment it runs, so
/// recording order is a topological order of the graph and replaying the
/// entries back to front visits every node in reverse topological order
/// exactly once. A disabled tape records nothing (evaluation mode).
template <typename T>
class Tape {
 public:
  explicit Tape(bool enabled = true) : enabled_(enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool enabled() const { return enabled_; }

  /// Records a backward closure when the tape is enabled and `out` takes part
  /// in differentiation. Returns whether it was recorded.
  bool record(const Tensor<T>& out, const char* op, std::function<void()> backward);

  /// Seeds d(root)/d(root) = 1 and replays all entries in reverse, then
  /// clears the tape. `root` must be a single-element tensor on this tape.
  void backward(Tensor<T> root);

  std::size_t size() const { return entries_.size(); }
  std::vector<std::string> op_names() const;
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    const char* op;
    std::function<void()> backward;
  };
  bool enabled_;
  std::vector<Entry> entries_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace relab
