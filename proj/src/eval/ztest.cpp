#include "relab/eval/ztest.hpp"

#include <cmath>
#include <numbers>

#include "relab/errors.hpp"

namespace relab {

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

ZTestResult proportion_ztest(double p1, std::size_t n1, double p2, std::size_t n2) {
  if (!(p1 >= 0.0 && p1 <= 1.0) || !(p2 >= 0.0 && p2 <= 1.0)) throw InputError("proportions must lie in [0, 1]");
  if (n1 == 0 || n2 == 0) throw InputError("sample sizes must be positive");
  const double a = static_cast<double>(n1), b = static_cast<double>(n2);
  const double pooled = (p1 * a + p2 * b) / (a + b);
  if (pooled <= 0.0 || pooled >= 1.0) throw NumericError("pooled proportion is 0 or 1; the z statistic is undefined");
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / a + 1.0 / b));
  const double z = (p1 - p2) / se;
  return {z, normal_upper_tail(z)};
}

}  // namespace relab
