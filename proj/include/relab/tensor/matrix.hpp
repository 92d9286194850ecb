#pragma once

#include <cstddef>
#include <vector>

#include "relab/tensor/tensor.hpp"

namespace relab {

/// Plain row-major 64-bit matrix used for analysis (spectra, ranks, probes).
/// Kept separate from Tensor so analysis code never touches the tape.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> v);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(const std::vector<double>& diag);

  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  Matrix transposed() const;
  bool all_finite() const;
  bool is_zero() const;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double max_abs(const Matrix& m);

/// Copies a rank-2 tensor into a 64-bit matrix.
template <typename T>
Matrix to_matrix(const Tensor<T>& t);

/// Copies a rank-2 tensor's gradient; zero matrix when no gradient exists.
template <typename T>
Matrix grad_matrix(const Tensor<T>& t);

}  // namespace relab
