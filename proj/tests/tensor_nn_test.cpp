#include "face_manifold/tensor_nn.hpp"

#include <gtest/gtest.h>

#include <random>

#include "face_manifold/errors.hpp"
#include "oracles.hpp"

namespace face_manifold {
namespace {

using testing::central_differences;
using testing::max_relative_error;
using testing::random_map;

// Sum of out * g, the scalar every backward pass differentiates.
double weighted_sum(const FeatureMap& out, const FeatureMap& g) {
  return testing::inner(out.data, g.data);
}

TEST(Conv1d, DeltaKernelIsIdentity) {
  auto k = ConvKernel::conv(1, 1);
  k.weights = {0.0, 1.0, 0.0};
  std::mt19937_64 rng(1);
  const auto x = random_map(1, 11, rng);
  EXPECT_EQ(conv1d_forward(x, k), x);
}

TEST(Conv1d, PreservesLength29) {
  std::mt19937_64 rng(2);
  auto k = ConvKernel::conv(8, 1);
  testing::randomize(k, rng);
  EXPECT_EQ(conv1d_forward(random_map(1, 29, rng), k).length, 29u);
}

TEST(Conv1d, MatchesDirectSumOnAllSmallShapes) {
  std::mt19937_64 rng(3);
  for (std::size_t in = 1; in <= 4; ++in)
    for (std::size_t out = 1; out <= 4; ++out)
      for (std::size_t len = 1; len <= 16; ++len) {
        auto k = ConvKernel::conv(out, in);
        testing::randomize(k, rng);
        const auto x = random_map(in, len, rng);
        const auto got = conv1d_forward(x, k);
        const auto want = testing::direct_conv(x, k);
        for (std::size_t j = 0; j < got.data.size(); ++j)
          ASSERT_NEAR(got.data[j], want.data[j], 1e-12) << in << "->" << out << " L=" << len;
      }
}

TEST(Conv1d, RejectsChannelMismatch) {
  const auto k = ConvKernel::conv(3, 2);
  EXPECT_THROW(conv1d_forward(FeatureMap(3, 5), k), DimensionError);
}

TEST(Conv1d, BackwardZeroGradient) {
  std::mt19937_64 rng(4);
  auto k = ConvKernel::conv(3, 2);
  testing::randomize(k, rng);
  const auto x = random_map(2, 7, rng);
  const auto g = conv1d_backward(x, k, FeatureMap(3, 7));
  for (const double v : g.input.data) EXPECT_EQ(v, 0.0);
  for (const double v : g.weights) EXPECT_EQ(v, 0.0);
  for (const double v : g.bias) EXPECT_EQ(v, 0.0);
}

TEST(Conv1d, BiasGradientIsRowSum) {
  std::mt19937_64 rng(5);
  auto k = ConvKernel::conv(3, 2);
  testing::randomize(k, rng);
  const auto x = random_map(2, 7, rng);
  const auto go = random_map(3, 7, rng);
  const auto g = conv1d_backward(x, k, go);
  for (std::size_t o = 0; o < 3; ++o) {
    double s = 0.0;
    for (const double v : go.row(o)) s += v;
    EXPECT_NEAR(g.bias[o], s, 1e-14);
  }
}

TEST(Conv1d, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  auto k = ConvKernel::conv(3, 2);
  testing::randomize(k, rng);
  const auto x = random_map(2, 7, rng);
  const auto go = random_map(3, 7, rng);
  const auto g = conv1d_backward(x, k, go);

  const auto fd_x = central_differences(x.data, [&](const std::vector<double>& v) {
    return weighted_sum(conv1d_forward(FeatureMap(2, 7, v), k), go);
  });
  const auto fd_w = central_differences(k.weights, [&](const std::vector<double>& v) {
    auto kk = k;
    kk.weights = v;
    return weighted_sum(conv1d_forward(x, kk), go);
  });
  EXPECT_LT(max_relative_error(g.input.data, fd_x), 1e-6);
  EXPECT_LT(max_relative_error(g.weights, fd_w), 1e-6);
}

TEST(Tconv1d, AdjointOfConvolution) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto conv = ConvKernel::conv(3, 2);
    testing::randomize(conv, rng);
    std::fill(conv.bias.begin(), conv.bias.end(), 0.0);
    auto tconv = ConvKernel::transposed(3, 2);
    tconv.weights = conv.weights;
    const auto x = random_map(2, 9, rng);
    const auto y = random_map(3, 9, rng);
    const double lhs = testing::inner(conv1d_forward(x, conv).data, y.data);
    const double rhs = testing::inner(x.data, tconv1d_forward(y, tconv).data);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Tconv1d, DeltaKernelIsIdentity) {
  auto k = ConvKernel::transposed(1, 1);
  k.weights = {0.0, 1.0, 0.0};
  std::mt19937_64 rng(8);
  const auto x = random_map(1, 6, rng);
  EXPECT_EQ(tconv1d_forward(x, k), x);
}

TEST(Tconv1d, MatchesDenseTransposeOracle) {
  std::mt19937_64 rng(9);
  for (std::size_t len : {1u, 2u, 5u, 12u}) {
    auto k = ConvKernel::transposed(4, 3);
    testing::randomize(k, rng);
    const auto x = random_map(4, len, rng);
    const auto got = tconv1d_forward(x, k);
    const auto want = testing::dense_tconv(x, k);
    for (std::size_t j = 0; j < got.data.size(); ++j) EXPECT_NEAR(got.data[j], want.data[j], 1e-12);
  }
}

TEST(Tconv1d, RejectsShapeMismatch) {
  const auto k = ConvKernel::transposed(4, 3);
  EXPECT_THROW(tconv1d_forward(FeatureMap(3, 5), k), DimensionError);
}

TEST(Tconv1d, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  auto k = ConvKernel::transposed(3, 2);
  testing::randomize(k, rng);
  const auto x = random_map(3, 6, rng);
  const auto go = random_map(2, 6, rng);
  const auto g = tconv1d_backward(x, k, go);
  const auto fd_x = central_differences(x.data, [&](const std::vector<double>& v) {
    return weighted_sum(tconv1d_forward(FeatureMap(3, 6, v), k), go);
  });
  const auto fd_w = central_differences(k.weights, [&](const std::vector<double>& v) {
    auto kk = k;
    kk.weights = v;
    return weighted_sum(tconv1d_forward(x, kk), go);
  });
  const auto fd_b = central_differences(k.bias, [&](const std::vector<double>& v) {
    auto kk = k;
    kk.bias = v;
    return weighted_sum(tconv1d_forward(x, kk), go);
  });
  EXPECT_LT(max_relative_error(g.input.data, fd_x), 1e-6);
  EXPECT_LT(max_relative_error(g.weights, fd_w), 1e-6);
  EXPECT_LT(max_relative_error(g.bias, fd_b), 1e-6);
}

TEST(MaxPool1d, ShapeChains) {
  auto chain = [](std::size_t len) {
    std::vector<std::size_t> lengths{len};
    FeatureMap x(1, len, 1.0);
    for (int l = 0; l < 4; ++l) {
      x = maxpool1d_forward(x).first;
      lengths.push_back(x.length);
    }
    return lengths;
  };
  EXPECT_EQ(chain(199), (std::vector<std::size_t>{199, 99, 49, 24, 12}));
  EXPECT_EQ(chain(29), (std::vector<std::size_t>{29, 14, 7, 3, 1}));
}

TEST(MaxPool1d, TieGoesToLowerIndex) {
  const auto [out, rec] = maxpool1d_forward(FeatureMap(1, 2, {5.0, 5.0}));
  EXPECT_EQ(out.data, std::vector<double>{5.0});
  EXPECT_EQ(rec.indices, std::vector<std::uint32_t>{0});
  EXPECT_EQ(rec.pre_length, 2u);
}

TEST(MaxPool1d, RejectsShortInput) {
  EXPECT_THROW(maxpool1d_forward(FeatureMap(1, 1)), DimensionError);
}

TEST(MaxPool1d, BackwardRoutesToArgmax) {
  std::mt19937_64 rng(11);
  const auto [out4, rec4] = maxpool1d_forward(random_map(1, 4, rng));
  const auto g4 = maxpool1d_backward(rec4, FeatureMap(1, 2, 1.0));
  int ones = 0;
  for (const double v : g4.data) ones += v == 1.0;
  EXPECT_EQ(ones, 2);

  for (int trial = 0; trial < 10; ++trial) {
    const auto [out5, rec5] = maxpool1d_forward(random_map(2, 5, rng));
    const auto g5 = maxpool1d_backward(rec5, random_map(2, 2, rng));
    EXPECT_EQ(g5.at(0, 4), 0.0);
    EXPECT_EQ(g5.at(1, 4), 0.0);
  }
}

TEST(MaxPool1d, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  const auto x = random_map(3, 9, rng);  // continuous draws: no ties within 1e-6
  const auto go = random_map(3, 4, rng);
  const auto [out, rec] = maxpool1d_forward(x);
  const auto g = maxpool1d_backward(rec, go);
  const auto fd = central_differences(x.data, [&](const std::vector<double>& v) {
    return weighted_sum(maxpool1d_forward(FeatureMap(3, 9, v)).first, go);
  });
  EXPECT_LT(max_relative_error(g.data, fd), 1e-6);
}

TEST(MaxUnpool1d, PlacesAtMostOneValuePerWindow) {
  std::mt19937_64 rng(13);
  const auto x = random_map(4, 10, rng, 0.1, 1.0);
  const auto [pooled, rec] = maxpool1d_forward(x);
  const auto up = maxunpool1d_forward(pooled, rec);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t t = 0; t < 5; ++t)
      EXPECT_LE((up.at(c, 2 * t) != 0.0) + (up.at(c, 2 * t + 1) != 0.0), 1);
}

TEST(MaxUnpool1d, PoolOfUnpoolIsIdempotent) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_map(3, 13, rng);
    const auto [pooled, rec] = maxpool1d_forward(x);
    // Unpooled zeros can outrank negative maxima, so compare through the stored indices.
    const auto up = maxunpool1d_forward(pooled, rec);
    const auto again = maxunpool1d_backward(rec, up);
    EXPECT_EQ(again, pooled);
  }
  const auto x = random_map(3, 13, rng, 0.5, 1.0);
  const auto [pooled, rec] = maxpool1d_forward(x);
  EXPECT_EQ(maxpool1d_forward(maxunpool1d_forward(pooled, rec)).first, pooled);
}

TEST(MaxUnpool1d, RestoresLength199) {
  std::mt19937_64 rng(15);
  const auto [pooled, rec] = maxpool1d_forward(random_map(2, 199, rng));
  EXPECT_EQ(pooled.length, 99u);
  EXPECT_EQ(maxunpool1d_forward(pooled, rec).length, 199u);
}

TEST(MaxUnpool1d, UnplacedCellsAreExactlyZero) {
  std::mt19937_64 rng(16);
  const auto [pooled, rec] = maxpool1d_forward(random_map(2, 9, rng));
  const auto up = maxunpool1d_forward(pooled, rec);
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<bool> placed(9, false);
    for (std::size_t t = 0; t < rec.out_length; ++t) placed[rec.indices[c * rec.out_length + t]] = true;
    std::size_t count = 0;
    for (std::size_t t = 0; t < 9; ++t) {
      count += placed[t];
      if (!placed[t]) EXPECT_EQ(up.at(c, t), 0.0);
    }
    EXPECT_EQ(count, rec.out_length);
  }
}

TEST(MaxUnpool1d, RejectsOutOfRangeIndex) {
  PoolRecord rec{4, 1, 2, {0, 7}};
  EXPECT_THROW(maxunpool1d_forward(FeatureMap(1, 2, 1.0), rec), DimensionError);
}

TEST(MaxUnpool1d, BackwardGathersAndMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  const auto [pooled, rec] = maxpool1d_forward(random_map(2, 11, rng));
  EXPECT_EQ(maxunpool1d_backward(rec, FeatureMap(2, 11)).data, std::vector<double>(10, 0.0));

  const auto go = random_map(2, 11, rng);
  const auto g = maxunpool1d_backward(rec, go);
  const auto fd = central_differences(pooled.data, [&](const std::vector<double>& v) {
    return weighted_sum(maxunpool1d_forward(FeatureMap(2, 5, v), rec), go);
  });
  EXPECT_LT(max_relative_error(g.data, fd), 1e-6);
  // pool backward after unpool backward is the identity on pooled-shaped gradients.
  const auto round_trip = maxunpool1d_backward(rec, maxpool1d_backward(rec, pooled));
  EXPECT_EQ(round_trip, pooled);
}

TEST(Relu, ForwardAndBackward) {
  const FeatureMap pos(1, 3, {0.0, 1.0, 2.5});
  EXPECT_EQ(relu_forward(pos), pos);
  const FeatureMap neg(1, 1, {-1.0});
  EXPECT_EQ(relu_forward(neg).data[0], 0.0);
  EXPECT_EQ(relu_backward(neg, FeatureMap(1, 1, 1.0)).data[0], 0.0);
  EXPECT_EQ(relu_backward(FeatureMap(1, 1, 0.0), FeatureMap(1, 1, 1.0)).data[0], 0.0);

  std::mt19937_64 rng(18);
  auto x = random_map(2, 8, rng);
  for (auto& v : x.data) v += v > 0 ? 0.01 : -0.01;  // keep clear of the kink
  const auto go = random_map(2, 8, rng);
  const auto fd = central_differences(x.data, [&](const std::vector<double>& v) {
    return weighted_sum(relu_forward(FeatureMap(2, 8, v)), go);
  });
  EXPECT_LT(max_relative_error(relu_backward(x, go).data, fd), 1e-6);
}

TEST(Mse, ValuesAndGradient) {
  const std::vector<double> a{1.0, -2.0};
  EXPECT_EQ(mse_loss(a, a).loss, 0.0);
  const auto r = mse_loss(std::vector<double>{4.0}, std::vector<double>{1.0});
  EXPECT_EQ(r.loss, 9.0);
  EXPECT_EQ(r.grad, std::vector<double>{6.0});

  std::mt19937_64 rng(19);
  std::normal_distribution<double> n(0.0, 3.0);
  std::vector<double> p(37), t(37);
  for (auto& v : p) v = n(rng);
  for (auto& v : t) v = n(rng);
  double oracle = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) oracle += (p[j] - t[j]) * (p[j] - t[j]) / 37.0;
  const auto got = mse_loss(p, t);
  EXPECT_NEAR(got.loss, oracle, 1e-14 * std::max(1.0, oracle));
  for (std::size_t j = 0; j < p.size(); ++j) EXPECT_NEAR(got.grad[j], 2.0 * (p[j] - t[j]) / 37.0, 1e-14);
  EXPECT_THROW(mse_loss(p, std::vector<double>(3)), DimensionError);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  std::vector<double> params{1.0, -2.0, 3.0};
  AdamState state(3, 1e-3);
  adam_step(params, std::vector<double>(3, 0.0), state);
  EXPECT_EQ(params, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> params{0.0, 0.0, 0.0};
  AdamState state(3, 1e-3);
  adam_step(params, std::vector<double>{0.5, -7.0, 1e3}, state);
  EXPECT_NEAR(params[0], -1e-3, 1e-10);
  EXPECT_NEAR(params[1], 1e-3, 1e-10);
  EXPECT_NEAR(params[2], -1e-3, 1e-10);
}

TEST(Adam, MinimizesQuadratic) {
  std::vector<double> w{0.0};
  AdamState state(1, 0.1);
  for (int step = 0; step < 500; ++step) {
    const std::vector<double> g{2.0 * (w[0] - 3.0)};
    adam_step(w, g, state);
  }
  EXPECT_LT(std::abs(w[0] - 3.0), 1e-3);
}

TEST(Adam, DeterministicAndSizeChecked) {
  std::vector<double> a{1.0, 2.0}, b{1.0, 2.0};
  AdamState sa(2, 0.01), sb(2, 0.01);
  for (int i = 0; i < 5; ++i) {
    adam_step(a, std::vector<double>{0.3, -0.1}, sa);
    adam_step(b, std::vector<double>{0.3, -0.1}, sb);
  }
  EXPECT_EQ(a, b);
  EXPECT_THROW(adam_step(a, std::vector<double>{1.0}, sa), DimensionError);
}

}  // namespace
}  // namespace face_manifold
