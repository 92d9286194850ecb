#pragma once

#include <cstddef>

namespace relab {

struct ZTestResult {
  double z = 0.0;
  double p_value = 0.0;
};

/// Pooled two-proportion z-test with the one-sided alternative p1 > p2.
/// Throws InputError for p outside [0, 1] or n == 0 and NumericError when
/// the pooled proportion is 0 or 1.
ZTestResult proportion_ztest(double p1, std::size_t n1, double p2, std::size_t n2);

/// Upper tail of the standard normal, P(Z > z).
double normal_upper_tail(double z);

}  // namespace relab
