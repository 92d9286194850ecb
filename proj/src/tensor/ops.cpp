#include "relab/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "relab/errors.hpp"

namespace relab::ops {

namespace {

template <typename T>
bool tracks(const Tape<T>& tape, const Tensor<T>& a) {
  return tape.enabled() && a.requires_grad();
}

template <typename T>
bool tracks(const Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return tape.enabled() && (a.requires_grad() || b.requires_grad());
}

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      if (av == T(0)) continue;
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m x k] += G[m x n] * B[k x n]^T
template <typename T>
void gemm_nt(const T* g, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* gi = g + i * n;
    T* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T* bp = b + p * n;
      T acc = T(0);
      for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
      ci[p] += acc;
    }
  }
}

// C[k x n] += A[m x k]^T * G[m x n]
template <typename T>
void gemm_tn(const T* a, const T* g, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    const T* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      if (av == T(0)) continue;
      T* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * gi[j];
    }
  }
}

enum class Broadcast { kSame, kScalar, kSuffix };

template <typename T>
Broadcast broadcast_kind(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.numel() == 1) return Broadcast::kScalar;
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sb.size() < sa.size() && std::equal(sb.begin(), sb.end(), sa.end() - static_cast<std::ptrdiff_t>(sb.size()))) {
    return Broadcast::kSuffix;
  }
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(sb) + " onto " + shape_str(sa));
}

}  // namespace

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() >= 2 && b.rank() >= 2, "matmul", "operands must have rank >= 2");
  const std::size_t m = a.dim(-2);
  const std::size_t k = a.dim(-1);
  const std::size_t n = b.dim(-1);
  require(b.dim(-2) == k, "matmul",
          "inner dimensions disagree: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const bool shared_rhs = b.rank() == 2;
  std::size_t batches = a.numel() / (m * k);
  if (!shared_rhs) {
    require(b.rank() == a.rank() &&
                std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin()),
            "matmul", "batched operands need identical leading dims: " + shape_str(a.shape()) + " x " +
                          shape_str(b.shape()));
  }
  Shape out_shape = a.shape();
  out_shape.back() = n;
  Tensor<T> out(out_shape, tracks(tape, a, b));
  auto od = out.data();
  const auto ad = a.data();
  const auto bd = b.data();
  if (shared_rhs) {
    // The leading dims fold into the row count.
    gemm_nn(ad.data(), bd.data(), od.data(), batches * m, k, n);
    batches = 1;
  } else {
    for (std::size_t t = 0; t < batches; ++t) {
      gemm_nn(ad.data() + t * m * k, bd.data() + t * k * n, od.data() + t * m * n, m, k, n);
    }
  }
  tape.record(out, "matmul", [a, b, out, m, k, n, shared_rhs]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    const std::size_t total_rows = a.numel() / k;
    if (shared_rhs) {
      if (a.requires_grad()) gemm_nt(g.data(), b.data().data(), a.mutable_grad().data(), total_rows, n, k);
      if (b.requires_grad()) gemm_tn(a.data().data(), g.data(), b.mutable_grad().data(), total_rows, k, n);
      return;
    }
    const std::size_t nb = total_rows / m;
    for (std::size_t t = 0; t < nb; ++t) {
      const T* gt = g.data() + t * m * n;
      if (a.requires_grad()) gemm_nt(gt, b.data().data() + t * k * n, a.mutable_grad().data() + t * m * k, m, n, k);
      if (b.requires_grad()) gemm_tn(a.data().data() + t * m * k, gt, b.mutable_grad().data() + t * k * n, m, k, n);
    }
  });
  return out;
}

template <typename T>
Tensor<T> transpose_last(Tape<T>& tape, const Tensor<T>& a) {
  require(a.rank() >= 2, "transpose_last", "rank must be >= 2");
  const std::size_t r = a.dim(-2), c = a.dim(-1);
  const std::size_t nb = a.numel() / (r * c);
  Shape s = a.shape();
  std::swap(s[s.size() - 1], s[s.size() - 2]);
  Tensor<T> out(s, tracks(tape, a));
  auto od = out.data();
  const auto ad = a.data();
  for (std::size_t t = 0; t < nb; ++t)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) od[t * r * c + j * r + i] = ad[t * r * c + i * c + j];
  tape.record(out, "transpose_last", [a, out, r, c, nb]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    auto ga = a.mutable_grad();
    for (std::size_t t = 0; t < nb; ++t)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[t * r * c + i * c + j] += g[t * r * c + j * r + i];
  });
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  broadcast_kind("add", a, b);
  Tensor<T> out(a.shape(), tracks(tape, a, b));
  auto od = out.data();
  const auto ad = a.data();
  const auto bd = b.data();
  const std::size_t nb = bd.size();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + bd[i % nb];
  tape.record(out, "add", [a, b, out, nb]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % nb] += g[i];
    }
  });
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  broadcast_kind("mul", a, b);
  Tensor<T> out(a.shape(), tracks(tape, a, b));
  auto od = out.data();
  const auto ad = a.data();
  const auto bd = b.data();
  const std::size_t nb = bd.size();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * bd[i % nb];
  tape.record(out, "mul", [a, b, out, nb]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      const auto bd = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bd[i % nb];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      const auto ad = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % nb] += g[i] * ad[i];
    }
  });
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor) {
  Tensor<T> out(a.shape(), tracks(tape, a));
  auto od = out.data();
  const auto ad = a.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * factor;
  tape.record(out, "scale", [a, out, factor]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
  return out;
}

template <typename T>
Tensor<T> silu(Tape<T>& tape, const Tensor<T>& a) {
  Tensor<T> out(a.shape(), tracks(tape, a));
  auto od = out.data();
  const auto ad = a.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] / (T(1) + std::exp(-ad[i]));
  tape.record(out, "silu", [a, out]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    const auto ad = a.data();
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T sig = T(1) / (T(1) + std::exp(-ad[i]));
      ga[i] += g[i] * sig * (T(1) + ad[i] * (T(1) - sig));
    }
  });
  return out;
}

template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& a) {
  const std::size_t n = a.dim(-1);
  const std::size_t rows = a.numel() / n;
  Tensor<T> out(a.shape(), tracks(tape, a));
  auto od = out.data();
  const auto ad = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = ad.data() + r * n;
    T* y = od.data() + r * n;
    const T mx = *std::max_element(x, x + n);
    T total = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      total += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= total;
  }
  tape.record(out, "softmax", [a, out, n, rows]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    const auto y = out.data();
    auto ga = a.mutable_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = T(0);
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
    }
  });
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a) {
  double total = 0.0;
  for (T v : a.data()) total += v;
  Tensor<T> out(Shape{1}, std::vector<T>{static_cast<T>(total)}, tracks(tape, a));
  tape.record(out, "sum", [a, out]() mutable {
    if (!out.has_grad()) return;
    const T g = out.grad()[0];
    for (auto& v : a.mutable_grad()) v += g;
  });
  return out;
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& a) {
  const std::size_t n = a.numel();
  double total = 0.0;
  for (T v : a.data()) total += v;
  Tensor<T> out(Shape{1}, std::vector<T>{static_cast<T>(total / static_cast<double>(n))}, tracks(tape, a));
  tape.record(out, "mean", [a, out, n]() mutable {
    if (!out.has_grad()) return;
    const T g = out.grad()[0] / static_cast<T>(n);
    for (auto& v : a.mutable_grad()) v += g;
  });
  return out;
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& a, Shape shape) {
  require(shape_numel(shape) == a.numel(), "reshape",
          "cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  Tensor<T> out(std::move(shape), std::vector<T>(a.data().begin(), a.data().end()), tracks(tape, a));
  tape.record(out, "reshape", [a, out]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
  return out;
}

template <typename T>
Tensor<T> swap_axes_12(Tape<T>& tape, const Tensor<T>& a) {
  require(a.rank() == 4, "swap_axes_12", "expects rank 4, got " + shape_str(a.shape()));
  const std::size_t A = a.dim(0), B = a.dim(1), C = a.dim(2), D = a.dim(3);
  Tensor<T> out(Shape{A, C, B, D}, tracks(tape, a));
  auto od = out.data();
  const auto ad = a.data();
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t j = 0; j < B; ++j)
      for (std::size_t l = 0; l < C; ++l)
        std::copy_n(ad.data() + ((i * B + j) * C + l) * D, D, od.data() + ((i * C + l) * B + j) * D);
  tape.record(out, "swap_axes_12", [a, out, A, B, C, D]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < A; ++i)
      for (std::size_t j = 0; j < B; ++j)
        for (std::size_t l = 0; l < C; ++l) {
          const T* src = g.data() + ((i * C + l) * B + j) * D;
          T* dst = ga.data() + ((i * B + j) * C + l) * D;
          for (std::size_t d = 0; d < D; ++d) dst[d] += src[d];
        }
  });
  return out;
}

template <typename T>
Tensor<T> repeat_heads(Tape<T>& tape, const Tensor<T>& a, std::size_t n_rep) {
  require(a.rank() == 4, "repeat_heads", "expects rank 4, got " + shape_str(a.shape()));
  require(n_rep >= 1, "repeat_heads", "n_rep must be >= 1");
  if (n_rep == 1) return a;
  const std::size_t B = a.dim(0), G = a.dim(1), S = a.dim(2), D = a.dim(3);
  const std::size_t block = S * D;
  Tensor<T> out(Shape{B, G * n_rep, S, D}, tracks(tape, a));
  auto od = out.data();
  const auto ad = a.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < G * n_rep; ++h)
      std::copy_n(ad.data() + (b * G + h / n_rep) * block, block, od.data() + (b * G * n_rep + h) * block);
  tape.record(out, "repeat_heads", [a, out, B, G, n_rep, block]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    auto ga = a.mutable_grad();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t h = 0; h < G * n_rep; ++h) {
        const T* src = g.data() + (b * G * n_rep + h) * block;
        T* dst = ga.data() + (b * G + h / n_rep) * block;
        for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
      }
  });
  return out;
}

template <typename T>
Tensor<T> causal_mask(Tape<T>& tape, const Tensor<T>& scores) {
  require(scores.rank() >= 2 && scores.dim(-1) == scores.dim(-2), "causal_mask",
          "needs a trailing square block, got " + shape_str(scores.shape()));
  const std::size_t S = scores.dim(-1);
  const std::size_t nb = scores.numel() / (S * S);
  Tensor<T> out = scores.detach();
  out.set_requires_grad(tracks(tape, scores));
  auto od = out.data();
  for (std::size_t t = 0; t < nb; ++t)
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t j = i + 1; j < S; ++j) od[t * S * S + i * S + j] = -std::numeric_limits<T>::infinity();
  tape.record(out, "causal_mask", [scores, out, S, nb]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    auto gs = scores.mutable_grad();
    for (std::size_t t = 0; t < nb; ++t)
      for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j <= i; ++j) gs[t * S * S + i * S + j] += g[t * S * S + i * S + j];
  });
  return out;
}

template <typename T>
Tensor<T> rms_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain, double eps) {
  const std::size_t d = x.dim(-1);
  require(gain.rank() == 1 && gain.dim(0) == d, "rms_norm",
          "gain " + shape_str(gain.shape()) + " does not match input " + shape_str(x.shape()));
  const std::size_t rows = x.numel() / d;
  Tensor<T> out(x.shape(), tracks(tape, x, gain));
  std::vector<T> inv_rms(rows);
  auto od = out.data();
  const auto xd = x.data();
  const auto gd = gain.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double ms = 0.0;
    for (std::size_t j = 0; j < d; ++j) ms += static_cast<double>(xd[r * d + j]) * xd[r * d + j];
    const T inv = static_cast<T>(1.0 / std::sqrt(ms / static_cast<double>(d) + eps));
    inv_rms[r] = inv;
    for (std::size_t j = 0; j < d; ++j) od[r * d + j] = xd[r * d + j] * inv * gd[j];
  }
  tape.record(out, "rms_norm", [x, gain, out, d, rows, inv_rms = std::move(inv_rms)]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    const auto xd = x.data();
    const auto gd = gain.data();
    if (gain.requires_grad()) {
      auto gg = gain.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) gg[j] += g[r * d + j] * xd[r * d + j] * inv_rms[r];
    }
    if (x.requires_grad()) {
      auto gx = x.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const T inv = inv_rms[r];
        T dot = T(0);
        for (std::size_t j = 0; j < d; ++j) dot += g[r * d + j] * gd[j] * xd[r * d + j];
        const T coeff = inv * inv * dot / static_cast<T>(d);
        for (std::size_t j = 0; j < d; ++j)
          gx[r * d + j] += inv * (g[r * d + j] * gd[j] - xd[r * d + j] * coeff);
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> rope(Tape<T>& tape, const Tensor<T>& x, double theta) {
  require(x.rank() == 4, "rope", "expects [B, H, S, D], got " + shape_str(x.shape()));
  const std::size_t S = x.dim(2), D = x.dim(3);
  require(D % 2 == 0, "rope", "head dimension must be even");
  const std::size_t half = D / 2;
  std::vector<T> cos_t(S * half), sin_t(S * half);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::pow(theta, -2.0 * static_cast<double>(i) / static_cast<double>(D));
      const double ang = static_cast<double>(s) * freq;
      cos_t[s * half + i] = static_cast<T>(std::cos(ang));
      sin_t[s * half + i] = static_cast<T>(std::sin(ang));
    }
  const std::size_t nb = x.numel() / (S * D);
  Tensor<T> out(x.shape(), tracks(tape, x));
  auto od = out.data();
  const auto xd = x.data();
  for (std::size_t t = 0; t < nb; ++t)
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t i = 0; i < half; ++i) {
        const std::size_t base = (t * S + s) * D + 2 * i;
        const T c = cos_t[s * half + i], sn = sin_t[s * half + i];
        od[base] = xd[base] * c - xd[base + 1] * sn;
        od[base + 1] = xd[base] * sn + xd[base + 1] * c;
      }
  tape.record(out, "rope",
              [x, out, S, D, half, nb, cos_t = std::move(cos_t), sin_t = std::move(sin_t)]() mutable {
                if (!out.has_grad()) return;
                const auto g = out.grad();
                auto gx = x.mutable_grad();
                for (std::size_t t = 0; t < nb; ++t)
                  for (std::size_t s = 0; s < S; ++s)
                    for (std::size_t i = 0; i < half; ++i) {
                      const std::size_t base = (t * S + s) * D + 2 * i;
                      const T c = cos_t[s * half + i], sn = sin_t[s * half + i];
                      gx[base] += g[base] * c + g[base + 1] * sn;
                      gx[base + 1] += -g[base] * sn + g[base + 1] * c;
                    }
              });
  return out;
}

template <typename T>
Tensor<T> embedding(Tape<T>& tape, const Tensor<T>& table, std::span<const std::int32_t> ids,
                    std::size_t batch, std::size_t seq) {
  require(table.rank() == 2, "embedding", "table must be [V, d]");
  if (ids.size() != batch * seq) {
    throw ShapeError("embedding: " + std::to_string(ids.size()) + " ids for batch " + std::to_string(batch) +
                     " x seq " + std::to_string(seq));
  }
  const std::size_t V = table.dim(0), d = table.dim(1);
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= V) {
      throw InputError("token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(V));
    }
  }
  Tensor<T> out(Shape{batch, seq, d}, tracks(tape, table));
  auto od = out.data();
  const auto td = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(td.data() + static_cast<std::size_t>(ids[i]) * d, d, od.data() + i * d);
  tape.record(out, "embedding", [table, out, d, idv = std::vector<std::int32_t>(ids.begin(), ids.end())]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    auto gt = table.mutable_grad();
    for (std::size_t i = 0; i < idv.size(); ++i) {
      T* dst = gt.data() + static_cast<std::size_t>(idv[i]) * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += g[i * d + j];
    }
  });
  return out;
}

template <typename T>
Tensor<T> cross_entropy(Tape<T>& tape, const Tensor<T>& logits, std::span<const std::int32_t> targets) {
  const std::size_t V = logits.dim(-1);
  const std::size_t rows = logits.numel() / V;
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(rows) +
                     " positions");
  }
  std::size_t count = 0;
  for (auto t : targets) {
    if (t == kIgnoreIndex) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= V) {
      throw InputError("cross_entropy: target id " + std::to_string(t) + " outside vocabulary of size " +
                       std::to_string(V));
    }
    ++count;
  }
  if (count == 0) throw InputError("cross_entropy: every target position is ignored");
  const auto ld = logits.data();
  std::vector<T> log_norm(rows, T(0));
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == kIgnoreIndex) continue;
    const T* x = ld.data() + r * V;
    const T mx = *std::max_element(x, x + V);
    double z = 0.0;
    for (std::size_t j = 0; j < V; ++j) z += std::exp(static_cast<double>(x[j] - mx));
    const double lse = static_cast<double>(mx) + std::log(z);
    log_norm[r] = static_cast<T>(lse);
    total += lse - static_cast<double>(x[targets[r]]);
  }
  Tensor<T> out(Shape{1}, std::vector<T>{static_cast<T>(total / static_cast<double>(count))}, tracks(tape, logits));
  tape.record(out, "cross_entropy",
              [logits, out, V, rows, count, log_norm = std::move(log_norm),
               tv = std::vector<std::int32_t>(targets.begin(), targets.end())]() mutable {
                if (!out.has_grad()) return;
                const T g = out.grad()[0] / static_cast<T>(count);
                const auto ld = logits.data();
                auto gl = logits.mutable_grad();
                for (std::size_t r = 0; r < rows; ++r) {
                  if (tv[r] == kIgnoreIndex) continue;
                  for (std::size_t j = 0; j < V; ++j) gl[r * V + j] += g * std::exp(ld[r * V + j] - log_norm[r]);
                  gl[r * V + static_cast<std::size_t>(tv[r])] -= g;
                }
              });
  return out;
}

template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double p, Rng& rng, bool training) {
  if (p < 0.0 || p > 1.0) throw ConfigError("dropout probability must lie in [0, 1]");
  if (!training || p == 0.0) return x;
  const T keep_scale = p >= 1.0 ? T(0) : static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.numel());
  for (auto& m : mask) m = uniform01(rng) >= p ? keep_scale : T(0);
  Tensor<T> out(x.shape(), tracks(tape, x));
  auto od = out.data();
  const auto xd = x.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = xd[i] * mask[i];
  tape.record(out, "dropout", [x, out, mask = std::move(mask)]() mutable {
    if (!out.has_grad()) return;
    const auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
  return out;
}

#define RELAB_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> transpose_last(Tape<T>&, const Tensor<T>&);                                   \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                         \
  template Tensor<T> silu(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T> softmax(Tape<T>&, const Tensor<T>&);                                          \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                              \
  template Tensor<T> mean(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T> reshape(Tape<T>&, const Tensor<T>&, Shape);                                   \
  template Tensor<T> swap_axes_12(Tape<T>&, const Tensor<T>&);                                     \
  template Tensor<T> repeat_heads(Tape<T>&, const Tensor<T>&, std::size_t);                        \
  template Tensor<T> causal_mask(Tape<T>&, const Tensor<T>&);                                      \
  template Tensor<T> rms_norm(Tape<T>&, const Tensor<T>&, const Tensor<T>&, double);               \
  template Tensor<T> rope(Tape<T>&, const Tensor<T>&, double);                                     \
  template Tensor<T> embedding(Tape<T>&, const Tensor<T>&, std::span<const std::int32_t>, std::size_t, \
                               std::size_t);                                                       \
  template Tensor<T> cross_entropy(Tape<T>&, const Tensor<T>&, std::span<const std::int32_t>);    \
  template Tensor<T> dropout(Tape<T>&, const Tensor<T>&, double, Rng&, bool);

RELAB_INSTANTIATE_OPS(float)
RELAB_INSTANTIATE_OPS(double)

#undef RELAB_INSTANTIATE_OPS

}  // namespace relab::ops
