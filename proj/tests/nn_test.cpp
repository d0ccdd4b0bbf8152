#include <gtest/gtest.h>

#include <cmath>

#include "fashion/nn/adam.hpp"
#include "fashion/nn/layers.hpp"
#include "test_support.hpp"

using namespace fashion;
using namespace fashion::nn;
using fashion::testing::Gen;
using fashion::testing::worst_relative_error;

namespace {

// loss = sum(probe * layer(x)); returns the worst relative error of the
// backward pass over the input and every parameter.
double layer_error(Layer<double>& layer, Tensor<double> x, std::uint64_t seed, bool train = true) {
  // Probe stream distinct from the one callers use for x.
  Gen g(seed + 1000003);
  const Tensor<double> y0 = layer.forward(x, train);
  Tensor<double> probe(y0.channels(), y0.batch(), y0.height(), y0.width());
  for (auto& v : probe.values()) v = g.normal();
  auto loss = [&] {
    const Tensor<double> y = layer.forward(x, train);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += probe[i] * y[i];
    return s;
  };
  ParameterList<double> params;
  layer.collect(params, "");
  zero_grad(params);
  layer.forward(x, train);
  const Tensor<double> dx = layer.backward(probe);

  std::vector<double> flat(x.values().begin(), x.values().end());
  std::vector<double> analytic(dx.values().begin(), dx.values().end());
  // Entries far below the gradient's scale are dominated by rounding in the
  // difference quotient; the floor tracks the largest entry.
  auto floor_of = [](const std::vector<double>& a) {
    double m = 0;
    for (double v : a) m = std::max(m, std::abs(v));
    return std::max(1e-7, 1e-4 * m);
  };
  double worst = worst_relative_error(flat, analytic, [&] {
    std::copy(flat.begin(), flat.end(), x.data());
    return loss();
  }, 1e-5, floor_of(analytic), 60, seed);
  std::copy(flat.begin(), flat.end(), x.data());

  for (auto& p : params) {
    if (!p.param->trainable) continue;
    std::vector<double> pv(p.param->value.values().begin(), p.param->value.values().end());
    std::vector<double> pg(p.param->grad.values().begin(), p.param->grad.values().end());
    Tensor<double>& target = p.param->value;
    worst = std::max(worst, worst_relative_error(pv, pg, [&] {
      std::copy(pv.begin(), pv.end(), target.data());
      return loss();
    }, 1e-5, floor_of(pg), 40, seed + 1));
    std::copy(pv.begin(), pv.end(), target.data());
  }
  return worst;
}

// Direct zero-padded convolution.
Tensor<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, int out_ch, int k,
                           int s, int p) {
  const int oh = (x.height() + 2 * p - k) / s + 1, ow = (x.width() + 2 * p - k) / s + 1;
  Tensor<double> y(out_ch, x.batch(), oh, ow);
  for (int o = 0; o < out_ch; ++o)
    for (int n = 0; n < x.batch(); ++n)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double acc = b[o];
          for (int c = 0; c < x.channels(); ++c)
            for (int u = 0; u < k; ++u)
              for (int v = 0; v < k; ++v) {
                const int yy = i * s - p + u, xx = j * s - p + v;
                if (yy < 0 || xx < 0 || yy >= x.height() || xx >= x.width()) continue;
                acc += w[o * x.channels() * k * k + (c * k + u) * k + v] * x.at(c, n, yy, xx);
              }
          y.at(o, n, i, j) = acc;
        }
  return y;
}

}  // namespace

TEST(Conv2d, MatchesDirectConvolution) {
  Rng rng(1);
  Gen g(1);
  Conv2d<double> conv(3, 5, 4, 2, 1, rng, 0.3);
  ParameterList<double> ps;
  conv.collect(ps, "");
  for (auto& v : ps[1].param->value.values()) v = g.normal();
  const auto x = g.tensor<double>(3, 2, 8, 8);
  const auto y = conv.infer(x);
  const auto o = conv_oracle(x, ps[0].param->value, ps[1].param->value, 5, 4, 2, 1);
  ASSERT_TRUE(y.same_shape(o));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], o[i], 1e-12);
}

TEST(ConvTranspose2d, IsAdjointOfConv) {
  // <conv(x), y> == <x, convT(y)> with shared weights and zero bias.
  Rng r1(2), r2(2);
  Gen g(2);
  Conv2d<double> conv(3, 4, 4, 2, 1, r1, 0.3);
  ConvTranspose2d<double> tconv(4, 3, 4, 2, 1, r2, 0.3);
  ParameterList<double> a, b;
  conv.collect(a, "");
  tconv.collect(b, "");
  ASSERT_EQ(a[0].param->value.size(), b[0].param->value.size());
  b[0].param->value = a[0].param->value;
  const auto x = g.tensor<double>(3, 2, 8, 8);
  const auto y = g.tensor<double>(4, 2, 4, 4);
  const auto cx = conv.infer(x);
  const auto ty = tconv.infer(y);
  ASSERT_TRUE(ty.same_shape(x));
  double l = 0, r = 0;
  for (std::size_t i = 0; i < y.size(); ++i) l += cx[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) r += x[i] * ty[i];
  EXPECT_NEAR(l, r, 1e-10);
}

TEST(LayerGradients, Conv2d) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    Conv2d<double> l(2, 3, 4, 2, 1, rng, 0.3);
    EXPECT_LT(layer_error(l, Gen(seed).tensor<double>(2, 5, 6, 6), seed), 1e-6);
  }
}

TEST(LayerGradients, ConvTranspose2d) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    ConvTranspose2d<double> l(3, 2, 4, 2, 1, rng, 0.3);
    EXPECT_LT(layer_error(l, Gen(seed).tensor<double>(3, 5, 3, 3), seed), 1e-6);
  }
}

TEST(LayerGradients, Linear) {
  Rng rng(4);
  Linear<double> l(7, 5, rng, 0.3);
  EXPECT_LT(layer_error(l, Gen(4).tensor<double>(7, 3), 4), 1e-6);
}

TEST(LayerGradients, BatchNormTrainAndEval) {
  Rng rng(5);
  BatchNorm<double> l(3, rng);
  EXPECT_LT(layer_error(l, Gen(5).tensor<double>(3, 4, 2, 2), 5, true), 1e-5);
  EXPECT_LT(layer_error(l, Gen(6).tensor<double>(3, 4, 2, 2), 6, false), 1e-6);
}

TEST(LayerGradients, Activations) {
  ReLU<double> relu(0.2);
  Tanh<double> tanh_layer;
  ChannelSoftmax<double> softmax;
  auto x = Gen(7).tensor<double>(4, 3, 2, 2);
  for (auto& v : x.values())
    if (std::abs(v) < 1e-3) v = 0.5;  // keep away from the ReLU kink
  EXPECT_LT(layer_error(relu, x, 7), 1e-6);
  EXPECT_LT(layer_error(tanh_layer, x, 8), 1e-6);
  EXPECT_LT(layer_error(softmax, x, 9), 1e-6);
}

TEST(ChannelSoftmax, OutputsSimplexEvenForLargeLogits) {
  ChannelSoftmax<float> s;
  Tensor<float> x(7, 2, 3, 3);
  Gen g(10);
  for (auto& v : x.values()) v = static_cast<float>(80 * g.normal());
  const auto y = s.infer(x);
  const std::size_t m = y.channel_stride();
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0;
    for (int k = 0; k < 7; ++k) {
      EXPECT_GE(y[k * m + i], 0.0f);
      sum += y[k * m + i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-5);
  }
}

TEST(Adam, MatchesHandComputedUpdates) {
  Parameter<double> p(Tensor<double>(2, 1));
  p.value[0] = 1.0;
  p.value[1] = -2.0;
  ParameterList<double> list{{"p", &p}};
  AdamConfig cfg{0.1, 0.9, 0.99, 1e-8};
  Adam<double> opt(list, cfg);
  double m0 = 0, v0 = 0, x0 = 1.0;
  const double grads[] = {0.5, -1.5, 2.0};
  for (int t = 1; t <= 3; ++t) {
    opt.zero_grad();
    p.grad[0] = grads[t - 1];
    opt.step();
    m0 = 0.9 * m0 + 0.1 * grads[t - 1];
    v0 = 0.99 * v0 + 0.01 * grads[t - 1] * grads[t - 1];
    const double mh = m0 / (1 - std::pow(0.9, t)), vh = v0 / (1 - std::pow(0.99, t));
    x0 -= 0.1 * mh / (std::sqrt(vh) + 1e-8 / std::sqrt(1 - std::pow(0.99, t)));
    EXPECT_NEAR(p.value[0], x0, 1e-12) << t;
    EXPECT_EQ(p.value[1], -2.0);
  }
  EXPECT_EQ(opt.steps(), 3);
}

TEST(Adam, SkipsFrozenParameters) {
  Parameter<float> a(Tensor<float>(1, 1, 1, 1, 1.0f));
  Parameter<float> b(Tensor<float>(1, 1, 1, 1, 1.0f), false);
  Adam<float> opt({{"a", &a}, {"b", &b}}, {});
  a.grad[0] = b.grad[0] = 1.0f;
  opt.step();
  EXPECT_LT(a.value[0], 1.0f);
  EXPECT_EQ(b.value[0], 1.0f);
  EXPECT_EQ(opt.state().size(), 2u);
}

TEST(TensorOps, BatchSliceConcatRoundTrip) {
  Gen g(11);
  const auto t = g.tensor<float>(3, 5, 2, 2);
  const auto a = slice_batch(t, 0, 2), b = slice_batch(t, 2, 3);
  EXPECT_EQ(concat_batch(a, b), t);
  EXPECT_EQ(a.at(1, 1, 0, 1), t.at(1, 1, 0, 1));
  EXPECT_EQ(b.at(2, 0, 1, 0), t.at(2, 2, 1, 0));
}

TEST(TensorOps, DenseMapRoundTrip) {
  const auto t = Gen(12).tensor<double>(4, 2, 3, 3);
  EXPECT_EQ(dense_to_map(map_to_dense(t), 4, 3, 3), t);
}
