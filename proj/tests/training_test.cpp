#include <gtest/gtest.h>

#include <cmath>

#include "fashion/checkpoint.hpp"
#include "fashion/preprocess.hpp"
#include "fashion/shape_gan.hpp"
#include "fashion/synth_data.hpp"
#include "fashion/training.hpp"
#include "test_support.hpp"

using namespace fashion;
using fashion::testing::Gen;
using fashion::testing::TempDir;

namespace {

TrainConfig tiny_config(StageKind stage, int epochs = 1) {
  TrainConfig c;
  c.stage = stage;
  c.epochs = epochs;
  c.batch_size = 4;
  c.gen_width = 2;
  c.disc_width = 2;
  c.seed = 5;
  return c;
}

const std::vector<PersonRecord>& tiny_data() {
  static const auto data = generate_records(12, 3, 32);
  return data;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::Io;
}

}  // namespace

TEST(GanLosses, ChanceLevelValues) {
  const std::vector<double> half(5, 0.5);
  const auto v = gan_losses(half, half);
  EXPECT_NEAR(v.loss_d, 2 * std::log(2.0), 1e-12);
  EXPECT_NEAR(v.loss_g, std::log(2.0), 1e-12);
}

TEST(GanLosses, MatchesScalarLoopOnRandomInputs) {
  Gen g(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> r(g.integer(1, 9)), f(g.integer(1, 9));
    for (auto& v : r) v = g.uniform(0.001, 0.999);
    for (auto& v : f) v = g.uniform(0.001, 0.999);
    double a = 0, b = 0, c = 0;
    for (double v : r) a += std::log(v);
    for (double v : f) {
      b += std::log(1 - v);
      c += std::log(v);
    }
    const auto out = gan_losses(r, f);
    EXPECT_NEAR(out.loss_d, -a / r.size() - b / f.size(), 1e-10);
    EXPECT_NEAR(out.loss_g, -c / f.size(), 1e-10);
  }
}

TEST(GanLosses, ClipsSaturatedProbabilities) {
  const std::vector<double> one{1.0}, zero{0.0};
  const auto v = gan_losses(one, zero);
  EXPECT_TRUE(std::isfinite(v.loss_d));
  EXPECT_NEAR(v.loss_g, -std::log(kProbabilityClip), 1e-9);
}

TEST(TrainConfig, ParseOverridesAndRejectsUnknownKeys) {
  const TrainConfig c = TrainConfig::parse("# comment\n stage = image\nepochs=3\n\nlearning_rate=0.001\n"
                                           "instance_noise=0.1\nmismatch_pairs=false\n");
  EXPECT_EQ(c.stage, StageKind::kImage);
  EXPECT_EQ(c.epochs, 3);
  EXPECT_DOUBLE_EQ(c.learning_rate, 0.001);
  EXPECT_DOUBLE_EQ(c.instance_noise, 0.1);
  EXPECT_FALSE(c.mismatch_pairs);
  EXPECT_EQ(c.batch_size, 16);
  EXPECT_EQ(code_of([] { TrainConfig::parse("colour=red"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { TrainConfig::parse("epochs=three"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { TrainConfig::parse("mismatch_pairs=maybe"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { TrainConfig::parse("just words"); }), ErrorCode::InvalidArgument);
}

TEST(TrainConfig, CanonicalRoundTripsAndHashTracksModelKeys) {
  TrainConfig c = tiny_config(StageKind::kOneStep84, 7);
  c.learning_rate = 3.5e-4;
  c.instance_noise = 0.05;
  const TrainConfig back = TrainConfig::parse(c.canonical());
  EXPECT_EQ(back.canonical(), c.canonical());
  EXPECT_EQ(back.hash(), c.hash());
  TrainConfig paths = c;
  paths.dataset = "/elsewhere";
  paths.checkpoint_dir = "/tmp/x";
  EXPECT_EQ(paths.hash(), c.hash());
  TrainConfig other = c;
  other.mismatch_pairs = !c.mismatch_pairs;
  EXPECT_NE(other.hash(), c.hash());
  for (const auto& [key, doc] : TrainConfig::documented_keys()) EXPECT_FALSE(doc.empty()) << key;
}

TEST(TrainConfig, ValidateRejectsBadValues) {
  TrainConfig c;
  c.batch_size = 1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.resolution = 48;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.instance_noise = -1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(TrainStage, ErrorsForEmptyAndMismatchedData) {
  EXPECT_EQ(code_of([] { train_stage(tiny_config(StageKind::kShape), {}); }), ErrorCode::DatasetEmpty);
  const auto big = generate_records(4, 1, 64);
  EXPECT_EQ(code_of([&] { train_stage(tiny_config(StageKind::kShape), big); }), ErrorCode::ShapeMismatch);
}

TEST(TrainStage, DeterministicAndFinite) {
  for (StageKind k : {StageKind::kShape, StageKind::kImage}) {
    const auto a = train_stage(tiny_config(k, 2), tiny_data());
    const auto b = train_stage(tiny_config(k, 2), tiny_data());
    ASSERT_EQ(a.trace.size(), 6u);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.discriminator_updates, a.generator_updates);
    for (const auto& e : a.epochs) {
      EXPECT_TRUE(e.invariants_ok);
      EXPECT_TRUE(std::isfinite(e.loss_d));
    }
  }
}

TEST(TrainStage, EarlyStopHook) {
  TrainHooks hooks;
  int calls = 0;
  hooks.on_epoch = [&](const EpochSummary&) { return ++calls < 1; };
  const auto r = train_stage(tiny_config(StageKind::kShape, 5), tiny_data(), hooks);
  EXPECT_EQ(r.epochs.size(), 1u);
}

TEST(StageModel, CheckpointRoundTripGivesIdenticalOutputs) {
  TempDir dir("train");
  TrainConfig cfg = tiny_config(StageKind::kShape, 1);
  cfg.checkpoint_dir = dir.path;
  const auto r = train_stage(cfg, tiny_data());
  ASSERT_TRUE(std::filesystem::exists(dir.path / "shape.fgck"));
  ASSERT_TRUE(std::filesystem::exists(dir.path / "shape_epoch_1.fgck"));
  const StageModel loaded = load_stage_model(dir.path / "shape.fgck", StageKind::kShape);
  EXPECT_EQ(loaded.vocabulary(), r.model.vocabulary());
  EXPECT_EQ(loaded.metadata.at("config_hash").get<std::uint64_t>(), cfg.hash());
  const Checkpoint ck = load_checkpoint(dir.path / "shape.fgck");
  EXPECT_EQ(ck.manifest.at("adam_steps").at("generator").get<long>(), 3);
  EXPECT_TRUE(ck.arrays.count("adam.generator.decoder.0.weight.m"));

  const auto& rec = tiny_data()[0];
  const std::string cap = tiny_data()[1].caption;
  EXPECT_EQ(loaded.encode_caption(cap), r.model.encode_caption(cap));
  const auto s1 = generate_shape(LatentNoise::sample(3), build_spatial_constraint(rec),
                                 r.model.design_coding(rec, cap), r.model.networks().generator());
  const auto s2 = generate_shape(LatentNoise::sample(3), build_spatial_constraint(rec),
                                 loaded.design_coding(rec, cap), loaded.networks().generator());
  EXPECT_EQ(s1, s2);
  EXPECT_EQ(code_of([&] { load_stage_model(dir.path / "shape.fgck", StageKind::kImage); }),
            ErrorCode::StageMismatch);
  EXPECT_EQ(code_of([&] { load_stage_model(dir.path / "missing.fgck"); }), ErrorCode::MissingCheckpoint);
}

TEST(Pipeline, DeterministicPerSeedAndKeepsHead) {
  const auto shape = train_stage(tiny_config(StageKind::kShape), tiny_data());
  const auto image = train_stage(tiny_config(StageKind::kImage), tiny_data());
  const auto& person = tiny_data()[2];
  const std::string cap = tiny_data()[3].caption;
  const auto a = infer_pipeline(person, cap, {1, 2}, shape.model, image.model);
  const auto b = infer_pipeline(person, cap, {1, 2}, shape.model, image.model);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.shape_map, b.shape_map);
  const LabelGrid l = argmax_labels(person.segmap);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (l(y, x) == kHair || l(y, x) == kFace)
        for (int k = 0; k < 3; ++k) ASSERT_EQ(a.image.pixels()(y, x, k), person.image.pixels()(y, x, k));
  EXPECT_EQ(code_of([&] { infer_pipeline(person, cap, {}, image.model, image.model); }), ErrorCode::StageMismatch);
  EXPECT_EQ(code_of([&] { infer_one_step(person, cap, 1, shape.model); }), ErrorCode::StageMismatch);
  const double acc = discriminator_accuracy(shape.model, tiny_data(), 1);
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
}
