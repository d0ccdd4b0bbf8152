#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fashion/core_types.hpp"
#include "fashion/nn/layers.hpp"
#include "fashion/training.hpp"

namespace fashion {

// ---------------------------------------------------------------- swap pairs

// Seeded random derangement: result[i] is the partner index of i, never i.
std::vector<int> make_swap_pairs(std::size_t count, std::uint64_t seed);
// Same, keyed by id. Throws TooFewIds for fewer than two ids.
std::vector<std::pair<std::string, std::string>> make_swap_pairs(std::span<const std::string> ids,
                                                                 std::uint64_t seed);

// ---------------------------------------------------------------- AP

// Non-interpolated AP: sum over positives of precision at that rank divided
// by the number of positives; descending scores with ties in input order.
// Throws NoPositives / LengthMismatch.
double average_precision(std::span<const double> scores, std::span<const int> labels);

// Mean of the per-attribute APs.
double mean_average_precision(std::span<const double> aps);
// Rounded to one decimal of a percentage, e.g. 0.8262 -> 82.6.
double percent_one_decimal(double value);

// ---------------------------------------------------------------- constraint adherence

// Mean IoU over {background, hair, face} between the argmax of a generated
// map and the argmax of the constraint upsampled (nearest) to its size.
// Classes absent from both are skipped; 1 when all three are absent.
double constraint_iou(const SegMap& generated, const SpatialConstraint& constraint);

// ---------------------------------------------------------------- detector

// Four convolution layers then a linear layer emitting one logit per
// structure attribute.
class AttributeDetector {
 public:
  explicit AttributeDetector(int resolution, std::uint64_t seed = 0, int width = 16);

  int resolution() const noexcept { return resolution_; }
  // Sigmoid scores, one array per image.
  std::vector<std::array<double, kNumStructureAttributes>> predict(std::span<const ImageRGB> images) const;

  struct FitReport {
    std::vector<double> epoch_loss;
    double train_accuracy = 0;
  };
  // Binary cross-entropy with Adam; records must carry structure labels.
  FitReport fit(std::span<const PersonRecord> records, int epochs, int batch_size, std::uint64_t seed);

  Checkpoint to_checkpoint() const;
  static AttributeDetector from_checkpoint(const Checkpoint& ck);

 private:
  nn::Tensor<float> batch_tensor(std::span<const ImageRGB> images) const;
  nn::ParameterList<float> parameters();

  int resolution_;
  int width_;
  nn::Sequential<float> net_;
  int feat_ = 0;
};

// ---------------------------------------------------------------- protocol

// Image of person A redressed with caption B under the given seed.
using RedressFn = std::function<ImageRGB(const PersonRecord& person, std::string_view caption, std::uint64_t seed)>;

RedressFn pipeline_redress(const StageModel& shape, const StageModel& image);
RedressFn one_step_redress(const StageModel& model);

struct SwapPrediction {
  std::string person_id;
  std::string caption_id;
  std::array<double, kNumStructureAttributes> scores{};
  StructureLabels truth{};
};

struct SwapProtocolResult {
  std::string model;
  std::array<double, kNumStructureAttributes> ap{};
  double map = 0;
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<SwapPrediction> predictions;
};

// For each pair (A, B): generate from (A, caption of B), detect, score
// against B's structure labels.
SwapProtocolResult run_swap_protocol(const std::string& name, const RedressFn& model,
                                     std::span<const PersonRecord> test, const AttributeDetector& detector,
                                     std::uint64_t seed);
// The detector applied to the real image of B: the upper bound row.
SwapProtocolResult run_swap_upper_bound(std::span<const PersonRecord> test, const AttributeDetector& detector,
                                        std::uint64_t seed);
// Every image scored 0.5.
SwapProtocolResult run_swap_constant(std::span<const PersonRecord> test, std::uint64_t seed);

nlohmann::ordered_json swap_report_json(std::span<const SwapProtocolResult> rows);
// Plain-text table: one row per model, one column per attribute plus mAP.
std::string swap_report_table(std::span<const SwapProtocolResult> rows);

// ---------------------------------------------------------------- ranking

struct RankingStats {
  std::vector<std::string> methods;
  std::vector<double> mean;
  std::vector<double> stddev;                    // population
  std::vector<std::vector<int>> frequency;       // [method][rank - 1]
  int items = 0;
};

// ratings: item -> (method -> rank). Every item must rank every method with
// a permutation of 1..#methods (InvalidPermutation otherwise).
RankingStats ranking_stats(const std::map<std::string, std::map<std::string, int>>& ratings);
// CSV with header item_id,method,rank.
std::map<std::string, std::map<std::string, int>> read_ratings_csv(std::string_view text);

// ---------------------------------------------------------------- interpolation

enum class InterpolationMode { kShape, kTexture, kBoth };
InterpolationMode parse_interpolation_mode(std::string_view name);

struct WalkEndpoint {
  std::string caption;
  PipelineSeeds seeds;
};

struct WalkFrame {
  SegMap shape_map;
  ImageRGB image;
};

// Linear interpolation of (z || text embedding) between two endpoints on the
// same person. Shape mode interpolates stage one only, texture mode stage two
// only; the other stage keeps endpoint A's inputs. `steps` >= 2.
std::vector<WalkFrame> interpolation_walk(const PersonRecord& person, const WalkEndpoint& a, const WalkEndpoint& b,
                                          InterpolationMode mode, int steps, const StageModel& shape,
                                          const StageModel& image);

// (1 - t) a + t b elementwise; exact at t = 0 and t = 1.
StageInputs lerp_inputs(const StageInputs& a, const StageInputs& b, double t);

}  // namespace fashion
