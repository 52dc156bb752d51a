#include <gtest/gtest.h>

#include <cmath>

#include "cdae/errors.hpp"
#include "cdae/layers.hpp"
#include "oracles.hpp"

namespace cdae::nn {
namespace {

using testing::central_differences;
using testing::random_tensor;
using testing::relative_error;

ConvLayer random_conv(std::size_t in, std::size_t out, std::size_t k, Rng& rng) {
  ConvLayer layer(in, out, k);
  layer.mutable_weights() = random_tensor({out, in, k, k}, rng);
  layer.mutable_bias() = random_tensor({out}, rng);
  return layer;
}

ConvLayer identity_conv() {
  ConvLayer layer(1, 1, 3);
  layer.mutable_weights().at({0, 0, 1, 1}) = 1.0;
  return layer;
}

std::vector<double> to_vector(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

// ---- convolution ----

TEST(Conv, IdentityKernelPassesInputThrough) {
  Rng rng(1);
  const Tensor x = random_tensor({1, 6, 4}, rng);
  EXPECT_EQ(conv_forward(identity_conv(), x).output, x);
}

TEST(Conv, AllOnesKernelOnAllOnesInputCountsNeighbours) {
  ConvLayer layer(1, 1, 3);
  layer.mutable_weights().fill(1.0);
  const Tensor out = conv_forward(layer, Tensor::filled({1, 3, 3}, 1.0)).output;
  EXPECT_EQ(out, Tensor::from({1, 3, 3}, {4, 6, 4, 6, 9, 6, 4, 6, 4}));
}

TEST(Conv, PreservesSpatialSizeForEveryOddKernel) {
  Rng rng(2);
  for (std::size_t k : {1u, 3u, 5u, 7u}) {
    const ConvLayer layer = random_conv(2, 3, k, rng);
    EXPECT_EQ(conv_forward(layer, random_tensor({2, 9, 6}, rng)).output.shape(), (Shape{3, 9, 6}));
  }
  EXPECT_THROW(ConvLayer(1, 1, 4), ConfigError);
}

TEST(Conv, FullResolutionInputKeepsShape) {
  ConvLayer layer(1, 4, 3);
  EXPECT_EQ(conv_forward(layer, Tensor::zeros({1, 960, 480})).output.shape(), (Shape{4, 960, 480}));
}

TEST(Conv, ChannelMismatchIsShapeError) {
  ConvLayer layer(2, 1, 3);
  EXPECT_THROW(conv_forward(layer, Tensor::zeros({1, 4, 4})), ShapeError);
}

TEST(Conv, ZeroUpstreamGradientGivesZeroGradients) {
  Rng rng(3);
  const ConvLayer layer = random_conv(2, 2, 3, rng);
  const auto fwd = conv_forward(layer, random_tensor({2, 5, 5}, rng));
  const auto g = conv_backward(layer, fwd.cache, Tensor::zeros({2, 5, 5}));
  EXPECT_EQ(g.input, Tensor::zeros({2, 5, 5}));
  EXPECT_EQ(g.weights, Tensor::zeros({2, 2, 3, 3}));
  EXPECT_EQ(g.bias, Tensor::zeros({2}));
}

TEST(Conv, IdentityKernelBackwardPassesGradientThrough) {
  Rng rng(4);
  const ConvLayer layer = identity_conv();
  const auto fwd = conv_forward(layer, random_tensor({1, 5, 5}, rng));
  const Tensor g = random_tensor({1, 5, 5}, rng);
  EXPECT_EQ(conv_backward(layer, fwd.cache, g).input, g);
}

TEST(Conv, BiasGradientIsSumOfUpstream) {
  Rng rng(5);
  const ConvLayer layer = random_conv(1, 2, 3, rng);
  const auto fwd = conv_forward(layer, random_tensor({1, 4, 3}, rng));
  const Tensor g = random_tensor({2, 4, 3}, rng);
  const auto grads = conv_backward(layer, fwd.cache, g);
  for (std::size_t f = 0; f < 2; ++f) {
    double s = 0.0;
    for (std::size_t i = 0; i < 12; ++i) s += g[f * 12 + i];
    EXPECT_NEAR(grads.bias[f], s, 1e-12);
  }
}

TEST(Conv, GradientsMatchFiniteDifferences) {
  Rng rng(6);
  ConvLayer layer = random_conv(1, 2, 3, rng);
  Tensor x = random_tensor({1, 5, 5}, rng);
  const Tensor g = random_tensor({2, 5, 5}, rng);
  const auto fwd = conv_forward(layer, x);
  const auto grads = conv_backward(layer, fwd.cache, g);
  auto loss = [&] { return dot(conv_forward(layer, x).output, g); };

  EXPECT_LT(relative_error(grads.input.values(), central_differences(x.values(), loss)), 1e-6);
  Tensor& w = layer.mutable_weights();
  EXPECT_LT(relative_error(grads.weights.values(), central_differences(w.values(), loss)), 1e-6);
  Tensor& b = layer.mutable_bias();
  EXPECT_LT(relative_error(grads.bias.values(), central_differences(b.values(), loss)), 1e-6);
}

TEST(Conv, BackwardIsAdjointOfForward) {
  Rng rng(7);
  ConvLayer layer = random_conv(3, 2, 5, rng);
  layer.mutable_bias().fill(0.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor({3, 6, 8}, rng);
    const Tensor g = random_tensor({2, 6, 8}, rng);
    const auto fwd = conv_forward(layer, x);
    const Tensor back = conv_backward(layer, fwd.cache, g).input;
    EXPECT_NEAR(dot(fwd.output, g), dot(x, back), 1e-10);
  }
}

TEST(Conv, MissingOrStaleCacheIsUsageError) {
  Rng rng(8);
  ConvLayer layer = random_conv(1, 1, 3, rng);
  const Tensor x = random_tensor({1, 4, 4}, rng);
  EXPECT_THROW(conv_backward(layer, ConvCache{}, x), UsageError);
  const auto fwd = conv_forward(layer, x);
  layer.apply_gradient(Tensor::zeros({1, 1, 3, 3}), Tensor::zeros({1}), 0.1);
  EXPECT_THROW(conv_backward(layer, fwd.cache, x), UsageError);
}

TEST(Conv, UpstreamShapeMismatchIsShapeError) {
  Rng rng(9);
  const ConvLayer layer = random_conv(1, 2, 3, rng);
  const auto fwd = conv_forward(layer, random_tensor({1, 4, 4}, rng));
  EXPECT_THROW(conv_backward(layer, fwd.cache, Tensor::zeros({1, 4, 4})), ShapeError);
}

TEST(Conv, GlorotInitStaysInBoundsWithZeroBias) {
  Rng rng(10);
  ConvLayer layer(4, 4, 3);
  layer.init_uniform(rng);
  const double s = std::sqrt(6.0 / (36.0 + 36.0));
  for (double v : layer.weights().values()) {
    EXPECT_LE(std::abs(v), s);
  }
  EXPECT_EQ(layer.bias(), Tensor::zeros({4}));
}

// ---- deconvolution ----

TEST(Deconv, LearnedModeEqualsConvolution) {
  Rng rng(11);
  DeconvLayer deconv = DeconvLayer::learned(2, 3, 3);
  deconv.own().mutable_weights() = random_tensor({3, 2, 3, 3}, rng);
  deconv.own().mutable_bias() = random_tensor({3}, rng);
  const Tensor x = random_tensor({2, 6, 4}, rng);
  EXPECT_EQ(deconv_forward(deconv, nullptr, x).output, conv_forward(deconv.own(), x).output);
}

TEST(Deconv, TransposeFlipIsInvolutionWithSwappedChannels) {
  Rng rng(12);
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  const Tensor t = transpose_flip(w);
  ASSERT_EQ(t.shape(), (Shape{2, 3, 3, 3}));
  EXPECT_EQ(t.at({1, 2, 0, 1}), w.at({2, 1, 2, 1}));
  EXPECT_EQ(transpose_flip(t), w);
}

TEST(Deconv, TiedToIdentityPassesInputThrough) {
  Rng rng(13);
  const ConvLayer source = identity_conv();
  const DeconvLayer deconv = DeconvLayer::tied_to(source);
  const Tensor x = random_tensor({1, 5, 3}, rng);
  EXPECT_EQ(deconv_forward(deconv, &source, x).output, x);
}

TEST(Deconv, TiedWeightsFollowSourceUpdates) {
  Rng rng(14);
  ConvLayer source = random_conv(2, 3, 3, rng);
  const DeconvLayer deconv = DeconvLayer::tied_to(source);
  EXPECT_EQ(deconv.effective_weights(&source), transpose_flip(source.weights()));
  source.apply_gradient(random_tensor({3, 2, 3, 3}, rng), Tensor::zeros({3}), 0.5);
  EXPECT_EQ(deconv.effective_weights(&source), transpose_flip(source.weights()));
  EXPECT_THROW(deconv_forward(deconv, nullptr, random_tensor({3, 4, 4}, rng)), UsageError);
}

TEST(Deconv, TiedGradientsMatchFiniteDifferences) {
  Rng rng(15);
  ConvLayer source = random_conv(2, 1, 3, rng);
  DeconvLayer deconv = DeconvLayer::tied_to(source);
  deconv.own().mutable_bias() = random_tensor({2}, rng);
  Tensor x = random_tensor({1, 4, 4}, rng);
  const Tensor g = random_tensor({2, 4, 4}, rng);
  const auto fwd = deconv_forward(deconv, &source, x);
  const auto grads = deconv_backward(deconv, &source, fwd.cache, g);
  ASSERT_EQ(grads.weights.shape(), source.weights().shape());
  auto loss = [&] { return dot(deconv_forward(deconv, &source, x).output, g); };

  EXPECT_LT(relative_error(grads.input.values(), central_differences(x.values(), loss)), 1e-6);
  Tensor& w = source.mutable_weights();
  EXPECT_LT(relative_error(grads.weights.values(), central_differences(w.values(), loss)), 1e-6);
  Tensor& b = deconv.own().mutable_bias();
  EXPECT_LT(relative_error(grads.bias.values(), central_differences(b.values(), loss)), 1e-6);
}

TEST(Deconv, TiedCacheGoesStaleWhenSourceChanges) {
  Rng rng(16);
  ConvLayer source = random_conv(1, 1, 3, rng);
  const DeconvLayer deconv = DeconvLayer::tied_to(source);
  const Tensor x = random_tensor({1, 4, 4}, rng);
  const auto fwd = deconv_forward(deconv, &source, x);
  source.mutable_weights()[0] += 1.0;
  EXPECT_THROW(deconv_backward(deconv, &source, fwd.cache, x), UsageError);
}

// ---- pooling ----

TEST(Pool, SingleBlockTakesMaximum) {
  const auto p = maxpool2x2_forward(Tensor::from({1, 2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(p.output, Tensor::from({1, 1, 1}, {4}));
  EXPECT_EQ(p.switches.offset(0), (std::pair<int, int>{1, 1}));
}

TEST(Pool, ConstantInputPicksFirstPosition) {
  const auto p = maxpool2x2_forward(Tensor::filled({2, 4, 6}, 0.25));
  EXPECT_EQ(p.output, Tensor::filled({2, 2, 3}, 0.25));
  for (auto c : p.switches.codes) EXPECT_EQ(c, 0);
}

TEST(Pool, CountingGridByHand) {
  std::vector<double> v(16);
  for (int i = 0; i < 16; ++i) v[i] = i + 1;
  EXPECT_EQ(maxpool2x2_forward(Tensor::from({1, 4, 4}, v)).output, Tensor::from({1, 2, 2}, {6, 8, 14, 16}));
}

TEST(Pool, OddExtentsAreShapeErrors) {
  EXPECT_THROW(maxpool2x2_forward(Tensor::zeros({1, 3, 4})), ShapeError);
  EXPECT_THROW(maxpool2x2_forward(Tensor::zeros({1, 4, 5})), ShapeError);
  EXPECT_THROW(unpool2x2_backward(Tensor::zeros({1, 3, 4})), ShapeError);
}

TEST(Pool, BackwardRoutesToArgmax) {
  const auto p = maxpool2x2_forward(Tensor::from({1, 2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(maxpool2x2_backward(p.switches, Tensor::from({1, 1, 1}, {7})),
            Tensor::from({1, 2, 2}, {0, 0, 0, 7}));
  EXPECT_EQ(maxpool2x2_backward(p.switches, Tensor::zeros({1, 1, 1})), Tensor::zeros({1, 2, 2}));
  EXPECT_THROW(maxpool2x2_backward(p.switches, Tensor::zeros({1, 2, 1})), ShapeError);
}

TEST(Pool, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  Tensor x = testing::random_distinct_tensor({1, 4, 4}, rng);
  const Tensor g = random_tensor({1, 2, 2}, rng);
  const auto p = maxpool2x2_forward(x);
  const Tensor analytic = maxpool2x2_backward(p.switches, g);
  auto loss = [&] { return dot(maxpool2x2_forward(x).output, g); };
  EXPECT_LT(relative_error(analytic.values(), central_differences(x.values(), loss)), 1e-6);
}

// ---- unpooling ----

TEST(Unpool, DuplicatesIntoBlocks) {
  EXPECT_EQ(unpool2x2_forward(Tensor::from({1, 1, 1}, {4})), Tensor::filled({1, 2, 2}, 4));
  EXPECT_EQ(unpool2x2_forward(Tensor::zeros({2, 3, 1})), Tensor::zeros({2, 6, 2}));
  EXPECT_EQ(unpool2x2_forward(Tensor::from({1, 2, 2}, {1, 2, 3, 4})),
            Tensor::from({1, 4, 4}, {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4}));
}

TEST(Unpool, BackwardIsBlockSum) {
  EXPECT_EQ(unpool2x2_backward(Tensor::filled({1, 4, 2}, 1.5)), Tensor::filled({1, 2, 1}, 6.0));
  EXPECT_EQ(unpool2x2_backward(Tensor::zeros({1, 2, 2})), Tensor::zeros({1, 1, 1}));
}

TEST(Unpool, GradientMatchesFiniteDifferences) {
  Rng rng(18);
  Tensor x = random_tensor({2, 2, 3}, rng);
  const Tensor g = random_tensor({2, 4, 6}, rng);
  const Tensor analytic = unpool2x2_backward(g);
  auto loss = [&] { return dot(unpool2x2_forward(x), g); };
  EXPECT_LT(relative_error(analytic.values(), central_differences(x.values(), loss)), 1e-6);
}

TEST(PoolUnpool, RetractionAndBlockMaxima) {
  Rng rng(19);
  const Tensor y = random_tensor({3, 5, 4}, rng);
  EXPECT_EQ(maxpool2x2_forward(unpool2x2_forward(y)).output, y);

  const Tensor x = random_tensor({2, 6, 4}, rng);
  const Tensor u = unpool2x2_forward(maxpool2x2_forward(x).output);
  ASSERT_EQ(u.shape(), x.shape());
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        const std::size_t bi = i / 2 * 2, bj = j / 2 * 2;
        const double m = std::max({x.at({c, bi, bj}), x.at({c, bi, bj + 1}), x.at({c, bi + 1, bj}),
                                   x.at({c, bi + 1, bj + 1})});
        EXPECT_EQ(u.at({c, i, j}), m);
      }
}

TEST(PoolUnpool, UnpoolAdjointIdentity) {
  Rng rng(20);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_tensor({2, 3, 5}, rng);
    const Tensor g = random_tensor({2, 6, 10}, rng);
    EXPECT_NEAR(dot(unpool2x2_forward(x), g), dot(x, unpool2x2_backward(g)), 1e-10);
  }
}

// ---- activations ----

TEST(Activation, ReluDefinitionAndZeroDerivativeAtZero) {
  const Tensor x = Tensor::from({3}, {-1, 0, 2});
  const Tensor y = relu(x);
  EXPECT_EQ(y, Tensor::from({3}, {0, 0, 2}));
  EXPECT_EQ(relu_backward(y, Tensor::filled({3}, 5.0)), Tensor::from({3}, {0, 0, 5}));
}

TEST(Activation, TanhAtZero) {
  EXPECT_EQ(tanh(Tensor::zeros({1})), Tensor::zeros({1}));
}

TEST(Activation, TanhGradientMatchesFiniteDifferences) {
  Rng rng(21);
  Tensor x = random_tensor({12}, rng, -2.0, 2.0);
  const Tensor g = random_tensor({12}, rng);
  const Tensor analytic = tanh_backward(tanh(x), g);
  auto loss = [&] { return dot(tanh(x), g); };
  EXPECT_LT(relative_error(analytic.values(), central_differences(x.values(), loss)), 1e-8);
}

TEST(Activation, ReluGradientMatchesFiniteDifferences) {
  Rng rng(22);
  Tensor x = testing::random_tensor_away_from_zero({3, 4}, rng);
  const Tensor g = random_tensor({3, 4}, rng);
  const Tensor analytic = relu_backward(relu(x), g);
  auto loss = [&] { return dot(relu(x), g); };
  EXPECT_LT(relative_error(analytic.values(), central_differences(x.values(), loss)), 1e-8);
}

TEST(Activation, CacheDispatch) {
  Rng rng(23);
  const Tensor x = random_tensor({5}, rng);
  const Tensor g = random_tensor({5}, rng);
  const auto c = activation_forward(Activation::kTanh, x);
  EXPECT_EQ(c.output, tanh(x));
  EXPECT_EQ(activation_backward(c, g), tanh_backward(c.output, g));
}

}  // namespace
}  // namespace cdae::nn
