#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "eigen_oracle.hpp"
#include "model_gradcheck.hpp"
#include "relab/errors.hpp"
#include "relab/model/decoder.hpp"
#include "relab/relora/relora.hpp"

namespace relab {
namespace {

using testing::micro_config;
using testing::random_batch;

using testing::eigen_rank;
using testing::eigen_singular_values;

TEST(DecoderConfig, PresetShapes) {
  const auto tiny = DecoderConfig::tiny();
  EXPECT_EQ(tiny.n_layers, 12u);
  EXPECT_EQ(tiny.n_heads, 12u);
  EXPECT_EQ(tiny.n_kv_heads, 4u);
  EXPECT_EQ(tiny.d_model, 96u);
  EXPECT_EQ(tiny.d_ff, 384u);
  EXPECT_EQ(tiny.vocab_size, 50304u);
  EXPECT_EQ(tiny.max_seq_len, 2048u);
  EXPECT_EQ(DecoderConfig::small().d_model, 384u);
  EXPECT_EQ(DecoderConfig::small().d_ff, 1536u);
  EXPECT_FALSE(DecoderConfig::preset("medium").has_value());
}

TEST(DecoderConfig, InvalidConfigsAreRejected) {
  auto c = micro_config();
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = micro_config();
  c.n_kv_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = micro_config(6);  // head_dim 3 is odd
  EXPECT_THROW(c.validate(), ConfigError);
  c = micro_config();
  c.rope_theta = 0.0;
  EXPECT_THROW(DecoderModel<float>::build(c, 1), ConfigError);
}

TEST(ParamCount, TinyPresetBuiltCount) {
  const auto start = std::chrono::steady_clock::now();
  auto model = DecoderModel<float>::build(DecoderConfig::tiny(), 0);
  EXPECT_EQ(model.count_params(), (ParamCount{11282784, 11282784}));
  ReloraEngine<float> engine(ReloraConfig{}, 0);
  engine.inject(model);
  EXPECT_EQ(model.count_params(), (ParamCount{10060128, 11682144}));
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 5.0);
}

TEST(ParamCount, ClosedFormForBothPresets) {
  EXPECT_EQ(base_param_count(DecoderConfig::tiny()), 11282784u);
  EXPECT_EQ(base_param_count(DecoderConfig::small()), 64595328u);
  EXPECT_EQ(expected_param_count(DecoderConfig::small(), std::nullopt), (ParamCount{64595328, 64595328}));
  EXPECT_EQ(expected_param_count(DecoderConfig::tiny(), ReloraConfig{}), (ParamCount{10060128, 11682144}));
  EXPECT_EQ(expected_param_count(DecoderConfig::small(), ReloraConfig{}), (ParamCount{40240512, 66192768}));
}

TEST(ParamCount, FormulaAgreesWithBuiltModel) {
  for (std::size_t d : {8u, 16u}) {
    const auto c = micro_config(d, 29);
    auto model = DecoderModel<double>::build(c, 3);
    const std::size_t hd = c.head_dim();
    const std::size_t formula = 2 * c.vocab_size * c.d_model +
                                c.n_layers * (2 * c.d_model * c.d_model + 2 * c.d_model * c.n_kv_heads * hd +
                                              3 * c.d_model * c.d_ff + 2 * c.d_model) +
                                c.d_model;
    EXPECT_EQ(model.count_params().total, formula);
    EXPECT_EQ(base_param_count(c), formula);
  }
}

TEST(Decoder, SameSeedGivesIdenticalParameters) {
  const auto c = micro_config(16, 64);
  auto a = DecoderModel<float>::build(c, 99);
  auto b = DecoderModel<float>::build(c, 99);
  auto pa = a.named_parameters();
  auto pb = b.named_parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_TRUE(std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pb[i].tensor.data().begin()));
  }
  auto c2 = DecoderModel<float>::build(c, 100);
  EXPECT_FALSE(std::equal(pa[0].tensor.data().begin(), pa[0].tensor.data().end(),
                          c2.named_parameters()[0].tensor.data().begin()));
}

TEST(Decoder, InitialisationStatistics) {
  auto model = DecoderModel<double>::build(micro_config(16, 64), 5);
  const auto head = model.output_head().data();
  double ss = 0.0;
  for (double v : head) ss += v * v;
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(head.size())), 0.02, 0.003);
  for (double g : model.final_norm().data()) EXPECT_EQ(g, 1.0);
}

TEST(Decoder, LogitsShapeAndCausality) {
  const auto c = micro_config(16, 64);
  auto model = DecoderModel<double>::build(c, 1);
  auto batch = random_batch(1, 8, c.vocab_size, 2);
  Tape<double> off(false);
  auto base = model.forward(off, batch);
  ASSERT_EQ(base.shape(), (Shape{1, 8, 64}));
  for (std::size_t cut = 1; cut < 8; ++cut) {
    auto changed = batch;
    Rng rng(cut);
    for (std::size_t t = cut; t < 8; ++t) changed.ids[t] = static_cast<std::int32_t>(uniform_index(rng, 64));
    auto logits = model.forward(off, changed);
    for (std::size_t i = 0; i < cut * 64; ++i) EXPECT_EQ(logits.data()[i], base.data()[i]) << "cut " << cut;
  }
}

TEST(Decoder, IdenticalRowsGiveIdenticalLogits) {
  const auto c = micro_config(16, 64);
  auto model = DecoderModel<float>::build(c, 1);
  auto one = random_batch(1, 6, c.vocab_size, 4);
  TokenBatch two{2, 6, one.ids};
  two.ids.insert(two.ids.end(), one.ids.begin(), one.ids.end());
  Tape<float> off(false);
  auto logits = model.forward(off, two);
  const std::size_t row = 6 * 64;
  for (std::size_t i = 0; i < row; ++i) EXPECT_EQ(logits.data()[i], logits.data()[row + i]);
}

TEST(Decoder, InputValidation) {
  const auto c = micro_config(16, 64);
  auto model = DecoderModel<float>::build(c, 1);
  Tape<float> off(false);
  EXPECT_THROW(model.forward(off, random_batch(1, c.max_seq_len + 1, 64, 1)), InputError);
  TokenBatch bad{1, 2, {3, 64}};
  EXPECT_THROW(model.forward(off, bad), InputError);
}

TEST(Decoder, RmsNormMatchesDirectFormula) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 3 + static_cast<std::size_t>(uniform_index(rng, 20));
    Tensor<double> v(Shape{d}), gain(Shape{d});
    for (auto& x : v.data()) x = 3.0 * standard_normal(rng);
    for (auto& x : gain.data()) x = standard_normal(rng);
    Tape<double> off(false);
    auto y = ops::rms_norm(off, v, gain, 1e-6);
    double ms = 0.0;
    for (double x : v.data()) ms += x * x;
    ms /= static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double expect = v.data()[i] * gain.data()[i] / std::sqrt(ms + 1e-6);
      EXPECT_LT(std::abs(y.data()[i] - expect), 1e-6 * std::max(1e-12, std::abs(expect)));
    }
  }
}

TEST(Decoder, EndToEndGradientMatchesFiniteDifferences) {
  auto model = DecoderModel<double>::build(micro_config(8, 13), 17);
  // Perturb norm gains away from 1 so their gradients are generic.
  Rng rng(3);
  for (auto& np : model.named_parameters())
    if (np.name.find("norm") != std::string::npos)
      for (auto& g : np.tensor.data()) g = 1.0 + 0.3 * standard_normal(rng);
  const auto errors = testing::model_gradient_errors(model, random_batch(2, 5, 13, 8));
  EXPECT_EQ(errors.size(), model.named_parameters().size());
  for (const auto& [name, err] : errors) EXPECT_LT(err, 1e-3) << name;
}

TEST(Decoder, GradientWithAdaptersMatchesFiniteDifferences) {
  auto model = DecoderModel<double>::build(micro_config(8, 13), 17);
  ReloraConfig rc;
  rc.rank = 2;
  rc.dropout = 0.0;
  ReloraEngine<double> engine(rc, 4);
  engine.inject(model);
  Rng rng(5);
  for (auto& site : model.linear_sites())
    for (auto& v : site.linear->adapter->up.data()) v = 0.1 * standard_normal(rng);
  const auto errors = testing::model_gradient_errors(model, random_batch(2, 5, 13, 9));
  std::size_t adapter_tensors = 0;
  for (const auto& [name, err] : errors) {
    EXPECT_LT(err, 1e-3) << name;
    if (name.find("lora") != std::string::npos) ++adapter_tensors;
  }
  EXPECT_EQ(adapter_tensors, 2u * 7u * 2u);
  for (const auto& np : model.named_parameters()) {
    if (np.name.ends_with(".weight") && np.name.find("layers.") == 0 && np.name.find("norm") == std::string::npos) {
      EXPECT_FALSE(np.tensor.has_grad()) << np.name;
    }
  }
}

TEST(OvCircuit, IdentityPatternedHeadsHaveFullHeadRank) {
  const auto c = micro_config(8, 13);  // 2 heads of width 4, one kv head
  auto model = DecoderModel<double>::build(c, 1);
  auto& layer = model.layer(0);
  std::fill(layer.wo.weight.data().begin(), layer.wo.weight.data().end(), 0.0);
  std::fill(layer.wv.weight.data().begin(), layer.wv.weight.data().end(), 0.0);
  for (std::size_t i = 0; i < 8; ++i) layer.wo.weight.data()[i * 8 + i] = 1.0;
  for (std::size_t j = 0; j < 4; ++j) layer.wv.weight.data()[j * 4 + j] = 1.0;
  const auto ov = model.ov_matrices(0);
  ASSERT_EQ(ov.size(), 2u);
  for (const auto& m : ov) {
    EXPECT_EQ(m.rows, 8u);
    EXPECT_EQ(m.cols, 8u);
    const auto sv = eigen_singular_values(m);
    std::size_t nonzero = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > 1e-12) ++nonzero;
    EXPECT_EQ(nonzero, c.head_dim());
  }
}

TEST(OvCircuit, RandomTinyLayerRanksBoundedByHeadDim) {
  auto model = DecoderModel<float>::build(DecoderConfig::tiny(), 2);
  const auto ov = model.ov_matrices(5);
  ASSERT_EQ(ov.size(), 12u);
  for (const auto& m : ov) EXPECT_EQ(eigen_rank(m), 8u);
  EXPECT_THROW(model.ov_matrices(12), InputError);
}

TEST(OvCircuit, ScalingValueWeightsScalesSpectrum) {
  auto model = DecoderModel<double>::build(micro_config(16, 13), 3);
  const auto before = model.ov_matrices(1);
  for (auto& v : model.layer(1).wv.weight.data()) v *= 3.0;
  const auto after = model.ov_matrices(1);
  for (std::size_t h = 0; h < before.size(); ++h) {
    const auto s0 = eigen_singular_values(before[h]);
    const auto s1 = eigen_singular_values(after[h]);
    for (Eigen::Index i = 0; i < 8; ++i) EXPECT_NEAR(s1(i), 3.0 * s0(i), 1e-12 * s1(0));
  }
}

TEST(Decoder, CloneIsDeep) {
  auto model = DecoderModel<double>::build(micro_config(8, 13), 3);
  auto copy = model.clone();
  copy.output_head().data()[0] += 1.0;
  EXPECT_NE(copy.output_head().data()[0], model.output_head().data()[0]);
}

}  // namespace
}  // namespace relab
