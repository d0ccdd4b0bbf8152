#include <gtest/gtest.h>

#include <fstream>

#include "fashion/checkpoint.hpp"
#include "fashion/png_io.hpp"
#include "fashion/synth_data.hpp"
#include "test_support.hpp"

using namespace fashion;
using fashion::testing::Gen;
using fashion::testing::TempDir;

TEST(Png, RgbRoundTripIsLossless) {
  Gen g(1);
  RgbBytes img{7, 5, std::vector<std::uint8_t>(7 * 5 * 3)};
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(g.integer(0, 255));
  const RgbBytes back = decode_png_rgb(encode_png_rgb(img));
  EXPECT_EQ(back.height, 7);
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.rgb, img.rgb);
}

TEST(Png, PaletteRoundTripAndViolations) {
  PaletteBytes p{3, 4, {0, 1, 2, 3, 4, 5, 6, 0, 1, 2, 3, 4}};
  const auto bytes = encode_png_palette(p);
  EXPECT_EQ(decode_png_palette(bytes).indices, p.indices);
  EXPECT_THROW(decode_png_palette(bytes, 6), Error);
  p.indices[0] = 7;
  EXPECT_THROW(encode_png_palette(p), Error);
  const std::vector<std::uint8_t> junk{1, 2, 3};
  try {
    decode_png_palette(junk);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PaletteViolation);
  }
  EXPECT_THROW(decode_png_rgb(junk), Error);
  // A palette map decodes as RGB through its palette.
  const RgbBytes rgb = decode_png_rgb(bytes);
  EXPECT_EQ(rgb.rgb[3], label_palette()[1][0]);
}

TEST(Png, SegmapAndImageHelpers) {
  const auto r = generate_records(1, 4, 32)[0];
  EXPECT_EQ(segmap_from_png(segmap_png(r.segmap)), r.segmap);
  EXPECT_EQ(image_from_png(image_png(r.image)), r.image);
}

TEST(Checkpoint, RoundTripPreservesManifestAndArrays) {
  TempDir dir("ck");
  Checkpoint ck;
  ck.manifest = {{"stage", "shape"}, {"epoch", 3}, {"note", "x"}};
  ck.arrays["a"] = {{2, 3}, {1, 2, 3, 4, 5, 6}};
  ck.arrays["b.c"] = {{1}, {-0.5f}};
  ck.arrays["empty"] = {{0}, {}};
  save_checkpoint(ck, dir.path / "sub" / "x.fgck");
  const Checkpoint back = load_checkpoint(dir.path / "sub" / "x.fgck");
  EXPECT_EQ(back, ck);
  EXPECT_EQ(back.stage(), "shape");
  EXPECT_EQ(back.epoch(), 3);
  EXPECT_FALSE(std::filesystem::exists(dir.path / "sub" / "x.fgck.tmp"));
}

TEST(Checkpoint, CorruptFilesAreFormatErrors) {
  TempDir dir("ck_bad");
  std::ofstream(dir.path / "junk.fgck") << "not a checkpoint";
  try {
    load_checkpoint(dir.path / "junk.fgck");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Format);
  }
  Checkpoint ck;
  ck.arrays["w"] = {{100}, std::vector<float>(100, 1.0f)};
  save_checkpoint(ck, dir.path / "ok.fgck");
  std::filesystem::resize_file(dir.path / "ok.fgck", std::filesystem::file_size(dir.path / "ok.fgck") - 8);
  EXPECT_THROW(load_checkpoint(dir.path / "ok.fgck"), Error);
}

TEST(Checkpoint, RestoreChecksNamesAndShapes) {
  nn::Parameter<float> p(nn::Tensor<float>(2, 3));
  p.value[4] = 9.0f;
  nn::ParameterList<float> list{{"w", &p}};
  Checkpoint ck;
  store_parameters(ck, list);
  nn::Parameter<double> q(nn::Tensor<double>(2, 3));
  restore_parameters(ck, nn::ParameterList<double>{{"w", &q}});
  EXPECT_EQ(q.value[4], 9.0);
  nn::Parameter<double> wrong(nn::Tensor<double>(3, 2));
  EXPECT_THROW(restore_parameters(ck, nn::ParameterList<double>{{"w", &wrong}}), Error);
  EXPECT_THROW(restore_parameters(ck, nn::ParameterList<double>{{"v", &q}}), Error);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}
