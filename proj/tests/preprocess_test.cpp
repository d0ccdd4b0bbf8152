#include <gtest/gtest.h>

#include <cmath>

#include "fashion/error.hpp"
#include "fashion/preprocess.hpp"
#include "fashion/synth_data.hpp"
#include "test_support.hpp"

using namespace fashion;
using fashion::testing::Gen;

namespace {

// Cubic B-spline as the sum of its polynomial pieces, written out
// independently of the library.
double bspline(double x) {
  x = std::fabs(x);
  if (x < 1) return 2.0 / 3 - x * x + 0.5 * x * x * x;
  if (x < 2) return (8 - 12 * x + 6 * x * x - x * x * x) / 6;
  return 0;
}

// Direct 2-D antialiased bicubic to 8x8 from the continuous-coordinate
// definition: out(i, j) = sum_{y,x} k(y) k(x) S(clamp y, clamp x) / norm.
Grid3f oracle_resample(const Grid3f& s, int out) {
  auto weights = [](int in, int out_n, int i) {
    const double scale = static_cast<double>(out_n) / in;
    const double ks = std::min(scale, 1.0);
    const double c = (i + 0.5) / scale - 0.5;
    std::vector<double> w(in, 0.0);
    for (int j = -3 * in; j < 4 * in; ++j) w[std::clamp(j, 0, in - 1)] += bspline((c - j) * ks) * ks;
    double sum = 0;
    for (double v : w) sum += v;
    for (double& v : w) v /= sum;
    return w;
  };
  Grid3f o(out, out, s.channels());
  for (int i = 0; i < out; ++i) {
    const auto wy = weights(s.height(), out, i);
    for (int j = 0; j < out; ++j) {
      const auto wx = weights(s.width(), out, j);
      for (int c = 0; c < s.channels(); ++c) {
        double v = 0;
        for (int y = 0; y < s.height(); ++y)
          for (int x = 0; x < s.width(); ++x) v += wy[y] * wx[x] * s(y, x, c);
        o(i, j, c) = static_cast<float>(v);
      }
    }
  }
  return o;
}

}  // namespace

TEST(MergeLabels, ConservesMassExactly) {
  Gen g(1);
  for (int t = 0; t < 20; ++t) {
    const Grid3f s = g.simplex(g.integer(1, 12), g.integer(1, 12), kNumLabels);
    const Grid3f m = merge_labels(s);
    ASSERT_EQ(m.channels(), kNumMergedLabels);
    for (int y = 0; y < s.height(); ++y)
      for (int x = 0; x < s.width(); ++x) {
        EXPECT_EQ(m(y, x, 0), s(y, x, 0));
        EXPECT_EQ(m(y, x, 1), s(y, x, 1));
        EXPECT_EQ(m(y, x, 2), s(y, x, 2));
        EXPECT_FLOAT_EQ(m(y, x, 3), s(y, x, 3) + s(y, x, 4) + s(y, x, 5) + s(y, x, 6));
      }
  }
}

TEST(MergeLabels, RejectsWrongChannelCount) {
  EXPECT_THROW(merge_labels(Grid3f(4, 4, 5)), Error);
}

TEST(MergeLabels, OneHotPantsPixelBecomesRest) {
  Grid3f s(1, 1, kNumLabels);
  s(0, 0, kPantsShorts) = 1;
  const Grid3f m = merge_labels(s);
  EXPECT_EQ(m(0, 0, kMergedRest), 1.0f);
  EXPECT_EQ(m(0, 0, kMergedBackground), 0.0f);
}

TEST(Bicubic, TapsMatchDirectDefinition) {
  Gen g(2);
  for (int size : {16, 32, 48, 64}) {
    const Grid3f s = g.simplex(size, size, 3);
    const Grid3f a = resample_bicubic(s, 8);
    const Grid3f b = oracle_resample(s, 8);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a.values()[i], b.values()[i], 1e-5) << size;
  }
}

TEST(Bicubic, IdentityAtSameSize) {
  Gen g(3);
  const Grid3f s = g.simplex(8, 8, 7);
  const Grid3f d = downsample_bicubic(s);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(d.values()[i], s.values()[i], 1e-6);
}

TEST(Bicubic, ConstantMapStaysConstant) {
  Grid3f s(32, 32, 2);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      s(y, x, 0) = 0.25f;
      s(y, x, 1) = 0.75f;
    }
  const Grid3f d = downsample_bicubic(s);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      EXPECT_NEAR(d(y, x, 0), 0.25, 1e-6);
      EXPECT_NEAR(d(y, x, 1), 0.75, 1e-6);
    }
}

TEST(Bicubic, TooSmallThrows) {
  try {
    downsample_bicubic(Grid3f(7, 9, 7));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooSmall);
  }
}

TEST(Bicubic, OutputIsSimplexAfterClampAndRenormalize) {
  Gen g(4);
  for (int t = 0; t < 30; ++t) {
    const int size = 8 * g.integer(1, 6);
    const Grid3f d = downsample_bicubic(one_hot(g.labels(size, size)));
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        double s = 0;
        for (float v : d.pixel(y, x)) {
          EXPECT_GE(v, 0.0f);
          EXPECT_LE(v, 1.0f);
          s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-5);
      }
  }
}

// Property: merge and downsample commute on random simplex maps.
TEST(PreprocessAlgebra, MergeDownsampleCommute) {
  Gen g(5);
  for (int t = 0; t < 50; ++t) {
    const int size = 8 * g.integer(1, 8);
    const Grid3f s = g.simplex(size, size, kNumLabels);
    const Grid3f a = merge_labels(downsample_bicubic(s));
    const Grid3f b = downsample_bicubic(merge_labels(s));
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a.values()[i], b.values()[i], 1e-6) << "case " << t;
  }
}

// Property: every constraint built from a valid map passes validation.
TEST(PreprocessAlgebra, BuildSpatialConstraintAlwaysValid) {
  Gen g(6);
  for (int t = 0; t < 50; ++t) {
    const int size = 8 * g.integer(1, 8);
    const SegMap m = validate_segmap(g.simplex(size, size, kNumLabels));
    const SpatialConstraint c = build_spatial_constraint(m);
    EXPECT_NO_THROW(SpatialConstraint{c.probs()});
    EXPECT_EQ(c.probs().height(), 8);
    EXPECT_EQ(c.probs().channels(), 4);
  }
  for (const auto& r : generate_records(20, 9, 32)) EXPECT_NO_THROW(SpatialConstraint{build_spatial_constraint(r).probs()});
}

TEST(SpatialConstraint, RejectsWrongShapeAndNonSimplex) {
  EXPECT_THROW(SpatialConstraint(Grid3f(8, 8, 7)), Error);
  Grid3f bad(8, 8, 4);
  EXPECT_THROW(SpatialConstraint{bad}, Error);
}

TEST(UpsampleNearest, ReplicatesBlocks) {
  Gen g(7);
  const Grid3f s = g.simplex(8, 8, 4);
  const Grid3f u = upsample_nearest(s, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 4; ++c) ASSERT_EQ(u(y, x, c), s(y / 4, x / 4, c));
}

TEST(DownsampledPrior, KeepsSevenChannels) {
  const auto r = generate_records(1, 3, 32)[0];
  const Grid3f p = downsampled_prior(r.segmap);
  EXPECT_EQ(p.channels(), kNumLabels);
  EXPECT_EQ(p.height(), 8);
  const Grid3f merged = merge_labels(p);
  const Grid3f c = build_spatial_constraint(r).probs();
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(merged.values()[i], c.values()[i], 1e-6);
}

TEST(Median, OddEvenAndSingle) {
  EXPECT_EQ(median({3, 1, 2}), 2);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(median({7}), 7);
}

TEST(ExtractAttributes, SkinMediansAndBoundingBox) {
  // 8x8 image: face pixels at (2..3, 3..4) with value 0.5 in all channels.
  Grid3f px(8, 8, 3, -1.0f);
  LabelGrid labels{8, 8, std::vector<int>(64, kBackground)};
  for (int y = 2; y <= 3; ++y)
    for (int x = 3; x <= 4; ++x) {
      labels(y, x) = kFace;
      for (int c = 0; c < 3; ++c) px(y, x, c) = 0.5f;
    }
  labels(6, 1) = kPantsShorts;
  PersonRecord r;
  r.id = "t";
  r.image = ImageRGB(px);
  r.segmap = segmap_from_labels(labels);
  r.caption = "a man";
  r.attributes.gender = true;
  r.attributes.hat = true;
  const auto a = extract_attributes(r);
  EXPECT_EQ(a[kAttrGender], 1.0f);
  EXPECT_EQ(a[kAttrLongHair], 0.0f);
  EXPECT_EQ(a[kAttrHat], 1.0f);
  EXPECT_NEAR(a[kAttrSkinR], 0.75, 1e-6);
  EXPECT_NEAR(a[kAttrSkinG], 0.75, 1e-6);
  // Bounding box of non-background: rows 2..6, cols 1..4.
  EXPECT_NEAR(a[kAttrHeight], 5.0 / 8, 1e-6);
  EXPECT_NEAR(a[kAttrWidth], 4.0 / 8, 1e-6);
}

TEST(ExtractAttributes, NoSkinFallsBackToHalf) {
  LabelGrid labels{8, 8, std::vector<int>(64, kUpperClothes)};
  PersonRecord r{"t", ImageRGB::filled(8, 8, 0, 0, 0), segmap_from_labels(labels), "x", {}, std::nullopt};
  const auto a = extract_attributes(r);
  EXPECT_EQ(a[kAttrSkinR], 0.5f);
  EXPECT_EQ(a[kAttrSkinY], 0.5f);
}
