#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gradcheck.hpp"
#include "relab/errors.hpp"
#include "relab/tensor/ops.hpp"

namespace relab {
namespace {

using testing::max_gradient_error;
using testing::random_tensor;
using TensorD = Tensor<double>;

constexpr double kGradTol = 1e-4;

TEST(Tensor, DataLengthMustMatchShape) {
  EXPECT_THROW(TensorD(Shape{2, 3}, std::vector<double>(5)), ShapeError);
  EXPECT_THROW(TensorD(Shape{2, 0}), ShapeError);
  TensorD t(Shape{2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.dim(-1), 3u);
}

TEST(Tensor, NoGradientWithoutRequiresGrad) {
  Rng rng(1);
  auto a = random_tensor({3, 3}, rng, false);
  auto b = random_tensor({3, 3}, rng, true);
  Tape<double> tape;
  auto loss = ops::sum(tape, ops::matmul(tape, a, b));
  tape.backward(loss);
  EXPECT_FALSE(a.has_grad());
  EXPECT_TRUE(b.has_grad());
  EXPECT_THROW(a.mutable_grad(), Error);
}

TEST(Tensor, CloneIsIndependent) {
  TensorD a(Shape{2}, {1.0, 2.0});
  auto b = a.clone();
  b.data()[0] = 5.0;
  EXPECT_EQ(a.data()[0], 1.0);
  auto alias = a;
  alias.data()[1] = 9.0;
  EXPECT_EQ(a.data()[1], 9.0);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tape<double> tape(false);
  TensorD eye(Shape{2, 2}, {1, 0, 0, 1});
  TensorD m(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  auto out = ops::matmul(tape, eye, m);
  EXPECT_EQ(std::vector<double>(out.data().begin(), out.data().end()), std::vector<double>({1, 2, 3, 4, 5, 6}));
}

TEST(Matmul, HandComputedProduct) {
  Tape<double> tape(false);
  auto out = ops::matmul(tape, TensorD(Shape{2, 2}, {1, 2, 3, 4}), TensorD(Shape{2, 1}, {1, 1}));
  ASSERT_EQ(out.shape(), (Shape{2, 1}));
  EXPECT_EQ(out.data()[0], 3.0);
  EXPECT_EQ(out.data()[1], 7.0);
}

TEST(Matmul, InnerDimensionMismatchThrows) {
  Tape<double> tape(false);
  EXPECT_THROW(ops::matmul(tape, TensorD(Shape{2, 3}), TensorD(Shape{2, 3})), ShapeError);
  EXPECT_THROW(ops::matmul(tape, TensorD(Shape{2, 2, 3}), TensorD(Shape{3, 2, 2})), ShapeError);
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  Rng rng(11);
  auto f = [](Tape<double>& t, const std::vector<TensorD>& in) { return ops::matmul(t, in[0], in[1]); };
  EXPECT_LT(max_gradient_error(f, {random_tensor({5, 4}, rng), random_tensor({4, 3}, rng)}), kGradTol);
  // leading batch on the left with a shared right operand
  EXPECT_LT(max_gradient_error(f, {random_tensor({2, 3, 4}, rng), random_tensor({4, 3}, rng)}), kGradTol);
  // fully batched
  EXPECT_LT(max_gradient_error(f, {random_tensor({2, 2, 3, 4}, rng), random_tensor({2, 2, 4, 5}, rng)}), kGradTol);
}

TEST(Softmax, SymmetricInputIsUniform) {
  Tape<double> tape(false);
  auto out = ops::softmax(tape, TensorD(Shape{2}, std::vector<double>{0.0, 0.0}));
  EXPECT_DOUBLE_EQ(out.data()[0], 0.5);
  EXPECT_DOUBLE_EQ(out.data()[1], 0.5);
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  auto f = [](Tape<double>& t, const std::vector<TensorD>& in) { return ops::softmax(t, in[0]); };
  EXPECT_LT(max_gradient_error(f, {random_tensor({6}, rng)}), kGradTol);
  EXPECT_LT(max_gradient_error(f, {random_tensor({3, 5}, rng)}), kGradTol);
}

TEST(Silu, ZeroMapsToZero) {
  Tape<double> tape(false);
  auto out = ops::silu(tape, TensorD(Shape{1}, std::vector<double>{0.0}));
  EXPECT_EQ(out.item(), 0.0);
}

TEST(Elementwise, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  using Ins = std::vector<TensorD>;
  EXPECT_LT(max_gradient_error([](Tape<double>& t, const Ins& in) { return ops::add(t, in[0], in[1]); },
                               {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}),
            kGradTol);
  EXPECT_LT(max_gradient_error([](Tape<double>& t, const Ins& in) { return ops::add(t, in[0], in[1]); },
                               {random_tensor({2, 3, 4}, rng), random_tensor({4}, rng)}),
            kGradTol);
  EXPECT_LT(max_gradient_error([](Tape<double>& t, const Ins& in) { return ops::mul(t, in[0], in[1]); },
                               {random_tensor({2, 3, 4}, rng), random_tensor({3, 4}, rng)}),
            kGradTol);
  EXPECT_LT(max_gradient_error([](Tape<double>& t, const Ins& in) { return ops::mul(t, in[0], in[1]); },
                               {random_tensor({5}, rng), random_tensor({1}, rng)}),
            kGradTol);
  EXPECT_LT(max_gradient_error([](Tape<double>& t, const Ins& in) { return ops::scale(t, in[0], -2.5); },
                               {random_tensor({4}, rng)}),
            kGradTol);
  EXPECT_LT(max_gradient_error([](Tape<double>& t, const Ins& in) { return ops::silu(t, in[0]); },
                               {random_tensor({7}, rng)}),
            kGradTol);
  EXPECT_LT(max_gradient_error([](Tape<double>& t, const Ins& in) { return ops::sum(t, in[0]); },
                               {random_tensor({3, 2}, rng)}),
            kGradTol);
  EXPECT_LT(max_gradient_error([](Tape<double>& t, const Ins& in) { return ops::mean(t, in[0]); },
                               {random_tensor({3, 2}, rng)}),
            kGradTol);
}

TEST(Elementwise, BroadcastOutsideLeadingBatchIsRejected) {
  Tape<double> tape(false);
  EXPECT_THROW(ops::add(tape, TensorD(Shape{3, 4}), TensorD(Shape{3})), ShapeError);
  EXPECT_THROW(ops::mul(tape, TensorD(Shape{4}), TensorD(Shape{3, 4})), ShapeError);
}

TEST(Layout, GradientsMatchFiniteDifferences) {
  Rng rng(9);
  using Ins = std::vector<TensorD>;
  EXPECT_LT(max_gradient_error([](Tape<double>& t, const Ins& in) { return ops::reshape(t, in[0], {6, 2}); },
                               {random_tensor({3, 4}, rng)}),
            kGradTol);
  EXPECT_LT(max_gradient_error([](Tape<double>& t, const Ins& in) { return ops::transpose_last(t, in[0]); },
                               {random_tensor({2, 3, 4}, rng)}),
            kGradTol);
  EXPECT_LT(max_gradient_error([](Tape<double>& t, const Ins& in) { return ops::swap_axes_12(t, in[0]); },
                               {random_tensor({2, 3, 4, 2}, rng)}),
            kGradTol);
  EXPECT_LT(max_gradient_error([](Tape<double>& t, const Ins& in) { return ops::repeat_heads(t, in[0], 3); },
                               {random_tensor({2, 2, 3, 2}, rng)}),
            kGradTol);
}

TEST(Layout, RepeatHeadsMapsGroupsContiguously) {
  Tape<double> tape(false);
  TensorD x(Shape{1, 2, 1, 1}, {10.0, 20.0});
  auto y = ops::repeat_heads(tape, x, 2);
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), std::vector<double>({10, 10, 20, 20}));
}

TEST(Attention, MaskedSoftmaxIsCausal) {
  Rng rng(2);
  Tape<double> tape(false);
  auto p = ops::softmax(tape, ops::causal_mask(tape, random_tensor({2, 4, 4}, rng, false)));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 4; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        const double v = p.data()[b * 16 + i * 4 + j];
        if (j > i) {
          EXPECT_EQ(v, 0.0);
        }
        row += v;
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
  auto f = [](Tape<double>& t, const std::vector<TensorD>& in) {
    return ops::softmax(t, ops::causal_mask(t, in[0]));
  };
  EXPECT_LT(max_gradient_error(f, {random_tensor({2, 3, 3}, rng)}), kGradTol);
}

TEST(Normalization, RmsNormGradientMatchesFiniteDifferences) {
  Rng rng(4);
  auto f = [](Tape<double>& t, const std::vector<TensorD>& in) { return ops::rms_norm(t, in[0], in[1], 1e-6); };
  EXPECT_LT(max_gradient_error(f, {random_tensor({2, 3, 5}, rng), random_tensor({5}, rng)}), kGradTol);
}

TEST(Rope, PositionZeroIsIdentityAndNormPreserved) {
  Rng rng(6);
  Tape<double> tape(false);
  auto x = random_tensor({1, 2, 3, 4}, rng, false);
  auto y = ops::rope(tape, x, 10000.0);
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t d = 0; d < 4; ++d) EXPECT_DOUBLE_EQ(y.data()[h * 12 + d], x.data()[h * 12 + d]);
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t pair = 0; pair < 2; ++pair) {
        const std::size_t i = h * 12 + s * 4 + 2 * pair;
        EXPECT_NEAR(std::hypot(y.data()[i], y.data()[i + 1]), std::hypot(x.data()[i], x.data()[i + 1]), 1e-12);
      }
  }
  // position 1, first pair rotates by exactly one radian
  const double a = x.data()[4], b = x.data()[5];
  EXPECT_NEAR(y.data()[4], a * std::cos(1.0) - b * std::sin(1.0), 1e-12);
  auto f = [](Tape<double>& t, const std::vector<TensorD>& in) { return ops::rope(t, in[0], 10000.0); };
  EXPECT_LT(max_gradient_error(f, {random_tensor({2, 2, 3, 4}, rng)}), kGradTol);
}

TEST(Embedding, GatherAndScatterGradient) {
  Rng rng(8);
  const std::vector<std::int32_t> ids = {3, 1, 3, 0};
  auto f = [&](Tape<double>& t, const std::vector<TensorD>& in) { return ops::embedding(t, in[0], ids, 2, 2); };
  EXPECT_LT(max_gradient_error(f, {random_tensor({5, 3}, rng)}), kGradTol);
  Tape<double> tape(false);
  const std::vector<std::int32_t> bad = {5};
  EXPECT_THROW(ops::embedding(tape, random_tensor({5, 3}, rng), bad, 1, 1), InputError);
}

TEST(Dropout, InvertedScalingAndGradient) {
  Rng rng(10);
  auto x = random_tensor({200}, rng, false);
  Tape<double> tape(false);
  Rng mask_rng(1);
  auto y = ops::dropout(tape, x, 0.25, mask_rng, true);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double v = y.data()[i];
    EXPECT_TRUE(v == 0.0 || std::abs(v - x.data()[i] / 0.75) < 1e-12);
  }
  auto full = ops::dropout(tape, x, 1.0, mask_rng, true);
  for (double v : full.data()) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(ops::dropout(tape, x, 0.5, mask_rng, false).same_storage(x));
  // Reseeding per evaluation pins the mask for the finite-difference probe.
  auto f = [](Tape<double>& t, const std::vector<TensorD>& in) {
    Rng r(42);
    return ops::dropout(t, in[0], 0.3, r, true);
  };
  EXPECT_LT(max_gradient_error(f, {random_tensor({12}, rng)}), kGradTol);
}

// Log-softmax-gather written out directly, independent of the op.
double reference_cross_entropy(const TensorD& logits, const std::vector<std::int32_t>& targets) {
  const std::size_t V = logits.dim(-1);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0) continue;
    double z = 0.0;
    for (std::size_t j = 0; j < V; ++j) z += std::exp(logits.data()[r * V + j]);
    total += std::log(z) - logits.data()[r * V + static_cast<std::size_t>(targets[r])];
    ++n;
  }
  return total / static_cast<double>(n);
}

TEST(CrossEntropy, UniformLogitsGiveLogVocab) {
  Tape<double> tape(false);
  const std::vector<std::int32_t> targets = {0, 3, 6};
  auto loss = ops::cross_entropy(tape, TensorD(Shape{1, 3, 7}), targets);
  EXPECT_NEAR(loss.item(), std::log(7.0), 1e-12);
}

TEST(CrossEntropy, ConfidentCorrectLogitsGiveNearZero) {
  Tape<double> tape(false);
  TensorD logits(Shape{2, 4});
  logits.data()[1] = 50.0;
  logits.data()[4 + 2] = 50.0;
  const std::vector<std::int32_t> targets = {1, 2};
  EXPECT_LT(ops::cross_entropy(tape, logits, targets).item(), 1e-20);
}

TEST(CrossEntropy, MatchesDirectFormulaOracle) {
  Rng rng(12);
  auto logits = random_tensor({2, 3, 11}, rng, false, 2.0);
  std::vector<std::int32_t> targets(6);
  for (auto& t : targets) t = static_cast<std::int32_t>(uniform_index(rng, 11));
  Tape<double> tape(false);
  const double got = ops::cross_entropy(tape, logits, targets).item();
  const double want = reference_cross_entropy(logits, targets);
  EXPECT_LT(std::abs(got - want) / want, 1e-6);
}

TEST(CrossEntropy, IgnoredPositionsAreExcluded) {
  Rng rng(13);
  auto logits = random_tensor({4, 5}, rng, false);
  const std::vector<std::int32_t> targets = {1, ops::kIgnoreIndex, 4, ops::kIgnoreIndex};
  Tape<double> tape(false);
  EXPECT_NEAR(ops::cross_entropy(tape, logits, targets).item(), reference_cross_entropy(logits, targets), 1e-12);
  auto f = [&](Tape<double>& t, const std::vector<TensorD>& in) { return ops::cross_entropy(t, in[0], targets); };
  EXPECT_LT(max_gradient_error(f, {random_tensor({4, 5}, rng)}), kGradTol);
}

TEST(CrossEntropy, OutOfRangeTargetIsInputError) {
  Tape<double> tape(false);
  const std::vector<std::int32_t> targets = {7};
  EXPECT_THROW(ops::cross_entropy(tape, TensorD(Shape{1, 5}), targets), InputError);
}

// Jacobian of a map R^n -> R^m by central differences, row-major [m, n].
std::vector<double> numeric_jacobian(const std::function<TensorD(const TensorD&)>& f, TensorD x) {
  const std::size_t n = x.numel();
  const std::size_t m = f(x).numel();
  std::vector<double> jac(m * n);
  const double h = 1e-6;
  for (std::size_t j = 0; j < n; ++j) {
    const double saved = x.data()[j];
    x.data()[j] = saved + h;
    auto up = f(x);
    x.data()[j] = saved - h;
    auto down = f(x);
    x.data()[j] = saved;
    for (std::size_t i = 0; i < m; ++i) jac[i * n + j] = (up.data()[i] - down.data()[i]) / (2 * h);
  }
  return jac;
}

TEST(Tape, ChainRuleEqualsJacobianProduct) {
  Rng rng(14);
  auto w = random_tensor({4, 3}, rng, false);
  auto x = random_tensor({2, 4}, rng, true);
  auto first = [&](const TensorD& in) {
    Tape<double> t(false);
    return ops::matmul(t, in, w);
  };
  auto second = [](const TensorD& in) {
    Tape<double> t(false);
    return ops::softmax(t, in);
  };
  const auto j1 = numeric_jacobian(first, x.detach());            // [6, 8]
  const auto j2 = numeric_jacobian(second, first(x.detach()));    // [6, 6]
  std::vector<double> r(6);
  for (auto& v : r) v = standard_normal(rng);

  Tape<double> tape;
  auto y = ops::softmax(tape, ops::matmul(tape, x, w));
  tape.backward(ops::sum(tape, ops::mul(tape, y, TensorD(Shape{2, 3}, r))));
  for (std::size_t k = 0; k < 8; ++k) {
    double expect = 0.0;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) expect += r[i] * j2[i * 6 + j] * j1[j * 8 + k];
    EXPECT_NEAR(x.grad()[k], expect, 1e-7);
  }
}

TEST(Tape, RecordsInExecutionOrderAndReplaysOnce) {
  Rng rng(15);
  auto a = random_tensor({2, 2}, rng);
  Tape<double> tape;
  auto b = ops::silu(tape, a);
  auto c = ops::mul(tape, b, b);
  auto loss = ops::sum(tape, c);
  EXPECT_EQ(tape.op_names(), (std::vector<std::string>{"silu", "mul", "sum"}));
  tape.backward(loss);
  EXPECT_EQ(tape.size(), 0u);
  const std::vector<double> first(a.grad().begin(), a.grad().end());
  // a second backward on the emptied tape only seeds the root
  tape.backward(loss);
  EXPECT_EQ(std::vector<double>(a.grad().begin(), a.grad().end()), first);
  for (std::size_t i = 0; i < 4; ++i) {
    const double x = a.data()[i];
    const double sig = 1.0 / (1.0 + std::exp(-x));
    EXPECT_NEAR(first[i], 2 * x * sig * sig * (1 + x * (1 - sig)), 1e-12);
  }
}

TEST(Tape, DisabledTapeRecordsNothing) {
  Rng rng(16);
  auto a = random_tensor({3}, rng);
  Tape<double> off(false);
  auto y = ops::silu(off, a);
  EXPECT_EQ(off.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Ops, ForwardIsDeterministic) {
  Rng rng(17);
  auto a = random_tensor({3, 4}, rng, false);
  auto b = random_tensor({4, 5}, rng, false);
  Tape<double> t(false);
  auto y1 = ops::softmax(t, ops::matmul(t, a, b));
  auto y2 = ops::softmax(t, ops::matmul(t, a, b));
  EXPECT_TRUE(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
}

}  // namespace
}  // namespace relab
