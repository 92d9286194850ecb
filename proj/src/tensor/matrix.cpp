#include "relab/tensor/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "relab/errors.hpp"

namespace relab {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) throw ShapeError("matrix data length does not match dimensions");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(const std::vector<double>& diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols, rows);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool Matrix::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

bool Matrix::is_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw ShapeError("matrix product: inner dimensions disagree");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t p = 0; p < a.cols; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += av * b(p, j);
    }
  return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("matrix sum: shapes disagree");
  Matrix c = a;
  for (std::size_t i = 0; i < c.values.size(); ++i) c.values[i] += b.values[i];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  return a + (-1.0) * b;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (auto& v : c.values) v *= s;
  return c;
}

double max_abs(const Matrix& m) {
  double mx = 0.0;
  for (double v : m.values) mx = std::max(mx, std::abs(v));
  return mx;
}

template <typename T>
Matrix to_matrix(const Tensor<T>& t) {
  if (t.rank() != 2) throw ShapeError("to_matrix needs a rank-2 tensor, got " + shape_str(t.shape()));
  const auto d = t.data();
  return Matrix(t.dim(0), t.dim(1), std::vector<double>(d.begin(), d.end()));
}

template <typename T>
Matrix grad_matrix(const Tensor<T>& t) {
  if (t.rank() != 2) throw ShapeError("grad_matrix needs a rank-2 tensor, got " + shape_str(t.shape()));
  Matrix m(t.dim(0), t.dim(1));
  const auto g = t.grad();
  std::copy(g.begin(), g.end(), m.values.begin());
  return m;
}

template Matrix to_matrix(const Tensor<float>&);
template Matrix to_matrix(const Tensor<double>&);
template Matrix grad_matrix(const Tensor<float>&);
template Matrix grad_matrix(const Tensor<double>&);

}  // namespace relab
