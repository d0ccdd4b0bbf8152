#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fashion/evaluation.hpp"
#include "fashion/preprocess.hpp"
#include "fashion/synth_data.hpp"
#include "test_support.hpp"

using namespace fashion;
using fashion::testing::Gen;

namespace {

// AP from its pairwise definition: item j is ranked before i when its score
// is higher, or equal with a smaller index.
double ap_oracle(const std::vector<double>& s, const std::vector<int>& l) {
  double sum = 0;
  int pos = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!l[i]) continue;
    ++pos;
    int above = 0, above_pos = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] > s[i] || (s[j] == s[i] && j <= i)) {
        ++above;
        above_pos += l[j] != 0;
      }
    }
    sum += static_cast<double>(above_pos) / above;
  }
  return sum / pos;
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

TEST(AveragePrecision, WorkedExamples) {
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{0.9, 0.8, 0.7}, std::vector<int>{1, 0, 1}),
                   (1.0 + 2.0 / 3) / 2);
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}), 0.5);
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{0, 0, 1}), 1.0 / 3);
  EXPECT_EQ(code_of([] { average_precision(std::vector<double>{0.2}, std::vector<int>{0}); }), ErrorCode::NoPositives);
  EXPECT_EQ(code_of([] { average_precision(std::vector<double>{0.2}, std::vector<int>{0, 1}); }),
            ErrorCode::LengthMismatch);
}

// Property: the sort-based AP equals the quadratic definition, ties included.
TEST(AveragePrecision, MatchesQuadraticOracle) {
  Gen g(1);
  for (int t = 0; t < 1000; ++t) {
    const int n = g.integer(1, 40);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (int i = 0; i < n; ++i) {
      s[i] = g.integer(0, 6) / 6.0;  // coarse scores force ties
      l[i] = g.uniform() < 0.4;
    }
    l[g.integer(0, n - 1)] = 1;
    ASSERT_NEAR(average_precision(s, l), ap_oracle(s, l), 1e-12) << t;
  }
}

TEST(MeanAveragePrecision, FiveAttributeTableRow) {
  const std::vector<double> aps{0.632, 0.869, 0.900, 0.821, 0.907};
  EXPECT_EQ(percent_one_decimal(mean_average_precision(aps)), 82.6);
  EXPECT_THROW(mean_average_precision({}), Error);
}

TEST(SwapPairs, DerangementProperties) {
  for (std::size_t n : {2u, 3u, 10u, 101u}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto p = make_swap_pairs(n, seed);
      EXPECT_EQ(p, make_swap_pairs(n, seed));
      std::set<int> seen(p.begin(), p.end());
      EXPECT_EQ(seen.size(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_NE(p[i], static_cast<int>(i));
    }
  }
  EXPECT_EQ(code_of([] { make_swap_pairs(1, 0); }), ErrorCode::TooFewIds);
  const std::vector<std::string> ids{"a", "b"};
  EXPECT_EQ(make_swap_pairs(ids, 3), (std::vector<std::pair<std::string, std::string>>{{"a", "b"}, {"b", "a"}}));
}

TEST(Ranking, MeanStdAndFrequency) {
  const std::map<std::string, std::map<std::string, int>> r{
      {"i1", {{"A", 1}, {"B", 2}}}, {"i2", {{"A", 2}, {"B", 1}}}, {"i3", {{"A", 1}, {"B", 2}}}};
  const RankingStats st = ranking_stats(r);
  ASSERT_EQ(st.methods, (std::vector<std::string>{"A", "B"}));
  EXPECT_NEAR(st.mean[0], 4.0 / 3, 1e-12);
  EXPECT_NEAR(st.stddev[0], std::sqrt(2.0) / 3, 1e-12);
  EXPECT_NEAR(st.mean[1], 5.0 / 3, 1e-12);
  EXPECT_EQ(st.frequency[0], (std::vector<int>{2, 1}));
  EXPECT_EQ(st.items, 3);
}

TEST(Ranking, RejectsNonPermutations) {
  EXPECT_EQ(code_of([] { ranking_stats({{"i", {{"A", 1}, {"B", 1}}}}); }), ErrorCode::InvalidPermutation);
  EXPECT_EQ(code_of([] { ranking_stats({{"i", {{"A", 1}, {"B", 3}}}}); }), ErrorCode::InvalidPermutation);
  EXPECT_EQ(code_of([] { ranking_stats({{"i", {{"A", 1}, {"B", 2}}}, {"j", {{"A", 1}}}}); }),
            ErrorCode::InvalidPermutation);
}

TEST(Ranking, CsvParsing) {
  const auto r = read_ratings_csv("item_id,method,rank\r\nx,A,2\nx,B,1\n\ny,A,1\ny,B,2\n");
  EXPECT_EQ(r.at("x").at("A"), 2);
  EXPECT_EQ(ranking_stats(r).mean[0], 1.5);
  EXPECT_EQ(code_of([] { read_ratings_csv("x,A"); }), ErrorCode::Format);
  EXPECT_EQ(code_of([] { read_ratings_csv("x,A,one"); }), ErrorCode::Format);
  EXPECT_EQ(code_of([] { read_ratings_csv("x,A,1\nx,A,2"); }), ErrorCode::InvalidPermutation);
}

TEST(ConstraintIou, PerfectPartialAndEmpty) {
  // Constraint: top half hair, bottom half rest.
  Grid3f c(8, 8, kNumMergedLabels);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) c(y, x, y < 4 ? kMergedHair : kMergedRest) = 1;
  const SpatialConstraint con{c};
  LabelGrid l{16, 16, std::vector<int>(256)};
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) l(y, x) = y < 8 ? kHair : kUpperClothes;
  EXPECT_DOUBLE_EQ(constraint_iou(segmap_from_labels(l), con), 1.0);
  // Hair shrinks to the top quarter: hair IoU 1/2, background absent.
  for (int y = 4; y < 8; ++y)
    for (int x = 0; x < 16; ++x) l(y, x) = kArms;
  EXPECT_DOUBLE_EQ(constraint_iou(segmap_from_labels(l), con), 0.5);
  // Add a background column in the generated map only: bg IoU 0.
  for (int y = 0; y < 16; ++y) l(y, 15) = kBackground;
  const double hair = 60.0 / 128;  // rows 0..3, cols 0..14 over rows 0..7
  EXPECT_NEAR(constraint_iou(segmap_from_labels(l), con), (hair + 0.0) / 2, 1e-12);
  Grid3f rest(8, 8, kNumMergedLabels);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) rest(y, x, kMergedRest) = 1;
  EXPECT_DOUBLE_EQ(constraint_iou(segmap_from_labels({8, 8, std::vector<int>(64, kLegs)}), SpatialConstraint{rest}),
                   1.0);
  EXPECT_THROW(constraint_iou(segmap_from_labels({8, 16, std::vector<int>(128)}), SpatialConstraint{rest}), Error);
}

TEST(Interpolation, ModesAndEndpoints) {
  const std::vector<std::string> caps{"a man in a red top", "a lady in a blue skirt"};
  const Vocabulary v = Vocabulary::build(caps);
  const ArchConfig arch{32, 2, 2};
  const StageModel shape(StageKind::kShape, arch, v, 1), image(StageKind::kImage, arch, v, 2);
  const auto person = generate_records(1, 5, 32)[0];
  const WalkEndpoint a{caps[0], {3, 4}}, b{caps[1], {5, 6}};
  const auto both = interpolation_walk(person, a, b, InterpolationMode::kBoth, 4, shape, image);
  ASSERT_EQ(both.size(), 4u);
  const auto pa = infer_pipeline(person, a.caption, a.seeds, shape, image);
  const auto pb = infer_pipeline(person, b.caption, b.seeds, shape, image);
  EXPECT_EQ(both.front().image, pa.image);
  EXPECT_EQ(both.back().image, pb.image);
  EXPECT_EQ(both.back().shape_map, pb.shape_map);
  const auto tex = interpolation_walk(person, a, b, InterpolationMode::kTexture, 3, shape, image);
  for (const auto& f : tex) EXPECT_EQ(f.shape_map, pa.shape_map);
  const auto shp = interpolation_walk(person, a, b, InterpolationMode::kShape, 2, shape, image);
  EXPECT_EQ(shp.back().shape_map, pb.shape_map);
  EXPECT_THROW(interpolation_walk(person, a, b, InterpolationMode::kBoth, 1, shape, image), Error);
  EXPECT_EQ(parse_interpolation_mode("texture"), InterpolationMode::kTexture);
  EXPECT_THROW(parse_interpolation_mode("colour"), Error);
}

TEST(Interpolation, LerpIsExactAtEnds) {
  StageInputs a{LatentNoise::sample(1), {}}, b{LatentNoise::sample(2), {}};
  for (int i = 0; i < kTextDim; ++i) {
    a.text[i] = 0.1f * i;
    b.text[i] = -0.3f * i;
  }
  EXPECT_EQ(lerp_inputs(a, b, 0.0).z.values, a.z.values);
  EXPECT_EQ(lerp_inputs(a, b, 1.0).text, b.text);
  EXPECT_FLOAT_EQ(lerp_inputs(a, b, 0.5).text[10], 0.5f * (1.0f - 3.0f));
}

TEST(Detector, FitsPredictsAndRoundTrips) {
  const auto data = generate_records(64, 2, 32);
  AttributeDetector det(32, 1, 4);
  const auto rep = det.fit(data, 2, 16, 3);
  ASSERT_EQ(rep.epoch_loss.size(), 2u);
  EXPECT_TRUE(std::isfinite(rep.epoch_loss.back()));
  const AttributeDetector back = AttributeDetector::from_checkpoint(det.to_checkpoint());
  std::vector<ImageRGB> imgs{data[0].image, data[1].image};
  EXPECT_EQ(back.predict(imgs), det.predict(imgs));
  for (const auto& p : det.predict(imgs))
    for (double s : p) {
      EXPECT_GT(s, 0.0);
      EXPECT_LT(s, 1.0);
    }
  EXPECT_THROW(AttributeDetector(24), Error);
}

TEST(SwapProtocol, ConstantRowAndReports) {
  const auto data = generate_records(20, 4, 32);
  const auto c = run_swap_constant(data, 7);
  const auto perm = make_swap_pairs(data.size(), 7);
  for (int k = 0; k < kNumStructureAttributes; ++k) {
    std::vector<double> s(data.size(), 0.5);
    std::vector<int> l;
    for (std::size_t i = 0; i < data.size(); ++i) l.push_back((*data[perm[i]].structure)[k]);
    bool any = false;
    for (int v : l) any = any || v;
    if (any) EXPECT_DOUBLE_EQ(c.ap[k], ap_oracle(s, l));
  }
  AttributeDetector det(32, 1, 4);
  const auto self = run_swap_protocol("identity", [](const PersonRecord& p, std::string_view, std::uint64_t) {
    return p.image;
  }, data, det, 7);
  const auto up = run_swap_upper_bound(data, det, 7);
  EXPECT_EQ(self.pairs, up.pairs);
  // The upper bound scores B's real image; identity redress scores A's.
  // Batch size changes float summation order, so compare to 1e-6.
  const auto b_alone = det.predict(std::vector<ImageRGB>{data[perm[0]].image})[0];
  const auto a_alone = det.predict(std::vector<ImageRGB>{data[0].image})[0];
  for (int k = 0; k < kNumStructureAttributes; ++k) {
    EXPECT_NEAR(up.predictions[0].scores[k], b_alone[k], 1e-6);
    EXPECT_NEAR(self.predictions[0].scores[k], a_alone[k], 1e-6);
  }
  const std::vector<SwapProtocolResult> rows{up, c};
  const auto j = swap_report_json(rows);
  EXPECT_EQ(j["models"].size(), 2u);
  EXPECT_EQ(j["models"][1]["name"], "Constant 0.5");
  EXPECT_NE(swap_report_table(rows).find("mAP"), std::string::npos);
}
