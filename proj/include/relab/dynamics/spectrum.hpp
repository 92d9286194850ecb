#pragma once

#include <cstddef>
#include <vector>

#include "relab/tensor/matrix.hpp"

namespace relab {

/// Singular values in ascending order. A matrix with any non-finite entry
/// yields min(m, n) NaN values.
struct SingularSpectrum {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  bool is_nan() const;
  double largest() const { return values.empty() ? 0.0 : values.back(); }
};

/// One-sided Jacobi SVD in 64-bit; accurate to a few ulps relative to the
/// largest singular value.
SingularSpectrum singular_values(const Matrix& m);

/// Singular values above max(m, n) * sigma_max * 1e-12.
std::size_t numerical_rank(const SingularSpectrum& s);
std::size_t numerical_rank(const Matrix& m);

/// exp of the entropy of the l1-normalised spectrum. NaN for a zero or
/// non-finite matrix.
double effective_rank(const SingularSpectrum& s);
double effective_rank(const Matrix& m);

/// effective_rank / d_inter.
double proportional_effective_rank(const SingularSpectrum& s, std::size_t d_inter);
double proportional_effective_rank(const Matrix& m, std::size_t d_inter);

/// Largest over smallest singular value, taken over the numerically nonzero
/// part of the spectrum. NaN for a zero or non-finite matrix.
double condition_number(const SingularSpectrum& s);
double condition_number(const Matrix& m);

struct LayerAggregate {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;  // non-NaN values used
};

/// Mean and normal 95% interval (mean +- 1.96 sd / sqrt(k), sample sd) over
/// the non-NaN values. All NaN gives a NaN triple with n = 0.
LayerAggregate layer_aggregate(const std::vector<double>& values);

}  // namespace relab
