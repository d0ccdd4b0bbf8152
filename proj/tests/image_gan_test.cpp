#include <gtest/gtest.h>

#include "fashion/bridge.hpp"
#include "fashion/image_gan.hpp"
#include "fashion/stage.hpp"
#include "fashion/synth_data.hpp"
#include "test_support.hpp"

using namespace fashion;
using fashion::testing::Gen;

namespace {

TextureStack<float> random_textures(Gen& g, int h, int w, int l) {
  TextureStack<float> t;
  for (int c = 0; c < l; ++c) {
    Grid3f ch(h, w, 3);
    for (auto& v : ch.values()) v = static_cast<float>(g.uniform(-1, 1));
    t.push_back(ch);
  }
  return t;
}

// Brute force: accumulate channel by channel in double.
Grid3d oracle_compose(const TextureStack<float>& t, const Grid3f& m) {
  Grid3d out(m.height(), m.width(), 3);
  for (int c = 0; c < m.channels(); ++c)
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x)
        for (int k = 0; k < 3; ++k) out(y, x, k) += static_cast<double>(m(y, x, c)) * t[c](y, x, k);
  return out;
}

}  // namespace

TEST(Compose, HardMatchesBruteForce) {
  Gen g(1);
  for (int t = 0; t < 30; ++t) {
    const int h = g.integer(1, 12), w = g.integer(1, 12);
    const auto tex = random_textures(g, h, w, kNumLabels);
    const LabelGrid labels = g.labels(h, w);
    const Grid3f masks = one_hot(labels);
    const Grid3f out = compose(tex, masks, ComposeMode::kHard);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int k = 0; k < 3; ++k) ASSERT_EQ(out(y, x, k), tex[labels(y, x)](y, x, k));
  }
}

TEST(Compose, SoftMatchesBruteForceAndHardOnOneHot) {
  Gen g(2);
  for (int t = 0; t < 30; ++t) {
    const int h = g.integer(1, 12), w = g.integer(1, 12);
    const auto tex = random_textures(g, h, w, kNumLabels);
    const Grid3f soft_masks = g.simplex(h, w, kNumLabels);
    const Grid3f s = compose(tex, soft_masks, ComposeMode::kSoft);
    const Grid3d o = oracle_compose(tex, soft_masks);
    for (std::size_t i = 0; i < s.size(); ++i) ASSERT_NEAR(s.values()[i], o.values()[i], 1e-5);
    const Grid3f hot = one_hot(g.labels(h, w));
    EXPECT_EQ(compose(tex, hot, ComposeMode::kSoft), compose(tex, hot, ComposeMode::kHard));
  }
}

TEST(Compose, RejectsNonOneHotAndShapeMismatch) {
  Gen g(3);
  const auto tex = random_textures(g, 4, 4, kNumLabels);
  try {
    compose(tex, g.simplex(4, 4, kNumLabels), ComposeMode::kHard);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonOneHot);
  }
  Grid3f empty(4, 4, kNumLabels);
  EXPECT_THROW(compose(tex, empty, ComposeMode::kHard), Error);
  try {
    compose(random_textures(g, 4, 5, kNumLabels), one_hot(g.labels(4, 4)), ComposeMode::kHard);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Compose, TensorFormMatchesGridForm) {
  Gen g(4);
  const int h = 6, w = 5;
  const auto tex = random_textures(g, h, w, kNumLabels);
  const Grid3f masks = g.simplex(h, w, kNumLabels);
  nn::Tensor<float> ch(3 * kNumLabels, 1, h, w);
  for (int c = 0; c < kNumLabels; ++c)
    for (int k = 0; k < 3; ++k)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) ch.at(3 * c + k, 0, y, x) = tex[c](y, x, k);
  const auto out = to_grid<float>(compose_tensor(ch, to_tensor<float>(masks)), 0);
  const Grid3f ref = compose(tex, masks, ComposeMode::kSoft);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.values()[i], ref.values()[i], 1e-6);
}

TEST(Compose, BackwardIsGradTimesMask) {
  // Compose is linear in the textures, so a finite difference is exact up to
  // rounding.
  Gen g(5);
  const int h = 3, w = 3;
  auto ch = g.tensor<double>(3 * kNumLabels, 2, h, w);
  nn::Tensor<double> masks(kNumLabels, 2, h, w);
  for (int n = 0; n < 2; ++n) {
    const Grid3f s = g.simplex(h, w, kNumLabels);
    write_sample(masks, n, s);
  }
  const auto probe = g.tensor<double>(3, 2, h, w);
  const auto grad = compose_tensor_backward(probe, masks);
  auto loss = [&] {
    const auto y = compose_tensor(ch, masks);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * probe[i];
    return s;
  };
  for (std::size_t i = 0; i < ch.size(); i += 7) {
    const double keep = ch[i];
    ch[i] = keep + 1e-3;
    const double up = loss();
    ch[i] = keep - 1e-3;
    const double down = loss();
    ch[i] = keep;
    EXPECT_NEAR((up - down) / 2e-3, grad[i], 1e-9);
  }
  const auto grid_grad = compose_backward(to_grid<double>(probe, 0), to_grid<double>(masks, 0));
  EXPECT_NEAR(grid_grad[2](1, 1, 0), grad.at(6, 0, 1, 1), 1e-12);
}

TEST(ReplaceHead, CopiesExactlyHairAndFacePixels) {
  const auto r = generate_records(3, 7, 32);
  for (const auto& rec : r) {
    const ImageRGB gen = ImageRGB::filled(32, 32, 0.25f, -0.25f, 0.0f);
    const ImageRGB out = replace_head(gen, rec.image, rec.segmap);
    const LabelGrid l = argmax_labels(rec.segmap);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        const bool head = l(y, x) == kHair || l(y, x) == kFace;
        for (int k = 0; k < 3; ++k)
          ASSERT_EQ(out.pixels()(y, x, k), head ? rec.image.pixels()(y, x, k) : gen.pixels()(y, x, k));
      }
  }
}

TEST(ImageStage, TexturesAreInRangeAndComposeOntoMap) {
  Rng rng(6);
  ConditionalGenerator<float> gen(generator_layout(StageKind::kImage, {32, 2, 2}), rng);
  const auto rec = generate_records(1, 8, 32)[0];
  std::array<float, kDesignDim> d{};
  const auto tex = generate_texture_channels(LatentNoise::sample(3), rec.segmap, DesignCoding(d), gen);
  ASSERT_EQ(tex.size(), static_cast<std::size_t>(kNumLabels));
  for (const auto& t : tex)
    for (float v : t.values()) ASSERT_LE(std::abs(v), 1.0f);
  const ImageRGB img = compose(tex, rec.segmap, ComposeMode::kHard);
  EXPECT_EQ(img.height(), 32);
}
