#include "relab/dynamics/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace relab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kMaxSweeps = 80;

}  // namespace

bool SingularSpectrum::is_nan() const {
  return std::any_of(values.begin(), values.end(), [](double v) { return std::isnan(v); });
}

SingularSpectrum singular_values(const Matrix& m) {
  SingularSpectrum out;
  out.rows = m.rows;
  out.cols = m.cols;
  const std::size_t q = std::min(m.rows, m.cols);
  if (!m.all_finite()) {
    out.values.assign(q, kNaN);
    return out;
  }
  // Orthogonalise the columns of a tall matrix; store them contiguously.
  const Matrix a = m.rows >= m.cols ? m : m.transposed();
  const std::size_t rows = a.rows, n = a.cols;
  std::vector<std::vector<double>> col(n, std::vector<double>(rows));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < n; ++j) col[j][i] = a(i, j);

  const double eps = std::numeric_limits<double>::epsilon();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t r = p + 1; r < n; ++r) {
        auto& x = col[p];
        auto& y = col[r];
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
          alpha += x[i] * x[i];
          beta += y[i] * y[i];
          gamma += x[i] * y[i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const double xi = x[i], yi = y[i];
          x[i] = c * xi - s * yi;
          y[i] = s * xi + c * yi;
        }
      }
    }
    if (!rotated) break;
  }
  out.values.resize(q);
  for (std::size_t j = 0; j < n; ++j) {
    double ss = 0.0;
    for (double v : col[j]) ss += v * v;
    out.values[j] = std::sqrt(ss);
  }
  std::sort(out.values.begin(), out.values.end());
  return out;
}

namespace {

double rank_tolerance(const SingularSpectrum& s) {
  return static_cast<double>(std::max(s.rows, s.cols)) * s.largest() * 1e-12;
}

bool undefined(const SingularSpectrum& s) { return s.values.empty() || s.is_nan() || s.largest() == 0.0; }

}  // namespace

std::size_t numerical_rank(const SingularSpectrum& s) {
  if (undefined(s)) return 0;
  const double tol = rank_tolerance(s);
  return static_cast<std::size_t>(std::count_if(s.values.begin(), s.values.end(), [&](double v) { return v > tol; }));
}

std::size_t numerical_rank(const Matrix& m) { return numerical_rank(singular_values(m)); }

double effective_rank(const SingularSpectrum& s) {
  if (undefined(s)) return kNaN;
  const double l1 = std::accumulate(s.values.begin(), s.values.end(), 0.0);
  double entropy = 0.0;
  for (double v : s.values) {
    if (v <= 0.0) continue;
    const double p = v / l1;
    entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

double effective_rank(const Matrix& m) { return effective_rank(singular_values(m)); }

double proportional_effective_rank(const SingularSpectrum& s, std::size_t d_inter) {
  return effective_rank(s) / static_cast<double>(d_inter);
}

double proportional_effective_rank(const Matrix& m, std::size_t d_inter) {
  return proportional_effective_rank(singular_values(m), d_inter);
}

double condition_number(const SingularSpectrum& s) {
  if (undefined(s)) return kNaN;
  const double tol = rank_tolerance(s);
  const auto smallest = std::find_if(s.values.begin(), s.values.end(), [&](double v) { return v > tol; });
  return s.largest() / *smallest;
}

double condition_number(const Matrix& m) { return condition_number(singular_values(m)); }

LayerAggregate layer_aggregate(const std::vector<double>& values) {
  std::vector<double> kept;
  for (double v : values)
    if (!std::isnan(v)) kept.push_back(v);
  LayerAggregate out;
  out.n = kept.size();
  if (kept.empty()) {
    out.mean = out.ci_low = out.ci_high = kNaN;
    return out;
  }
  const double k = static_cast<double>(kept.size());
  out.mean = std::accumulate(kept.begin(), kept.end(), 0.0) / k;
  double half = 0.0;
  if (kept.size() > 1) {
    double ss = 0.0;
    for (double v : kept) ss += (v - out.mean) * (v - out.mean);
    half = 1.96 * std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
  }
  out.ci_low = out.mean - half;
  out.ci_high = out.mean + half;
  return out;
}

}  // namespace relab
