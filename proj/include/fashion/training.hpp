#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fashion/checkpoint.hpp"
#include "fashion/core_types.hpp"
#include "fashion/stage.hpp"
#include "fashion/text_encoder.hpp"

namespace fashion {

struct GanLossValues {
  double loss_d = 0;
  double loss_g = 0;
};

// Probabilities are clipped to [1e-7, 1 - 1e-7] before taking logs.
inline constexpr double kProbabilityClip = 1e-7;

// loss_D = -mean log d_real - mean log(1 - d_fake); loss_G = -mean log d_fake.
GanLossValues gan_losses(std::span<const double> d_real, std::span<const double> d_fake);

struct TrainConfig {
  StageKind stage = StageKind::kShape;
  int epochs = 20;
  int batch_size = 16;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int resolution = 32;
  int gen_width = 8;
  int disc_width = 16;
  std::uint64_t seed = 1;
  // Standard deviation of Gaussian noise added to every sample the
  // discriminator sees, real or generated.
  double instance_noise = 0.2;
  // Also show the discriminator real samples paired with another record's
  // caption, labelled fake.
  bool mismatch_pairs = true;
  std::filesystem::path dataset;
  std::filesystem::path checkpoint_dir;

  // Throws InvalidArgument (batch size < 2, bad resolution, epochs < 1, ...).
  void validate() const;
  ArchConfig arch() const { return {resolution, gen_width, disc_width}; }
  // Canonical key=value form, one per line; dataset and checkpoint paths are
  // excluded so that the hash only depends on what shapes the model.
  std::string canonical() const;
  std::uint64_t hash() const;

  // Flat key=value text ('#' comments, blank lines ignored). Unknown keys are
  // an InvalidArgument error.
  static TrainConfig parse(std::string_view text, TrainConfig base);
  static TrainConfig parse(std::string_view text);
  void set(std::string_view key, std::string_view value);
  static const std::vector<std::pair<std::string, std::string>>& documented_keys();
};

struct StepLoss {
  int epoch = 0;
  int step = 0;
  double loss_d = 0;
  double loss_g = 0;
  friend bool operator==(const StepLoss&, const StepLoss&) = default;
};

struct EpochSummary {
  int epoch = 0;
  double loss_d = 0;
  double loss_g = 0;
  double d_real = 0;  // mean D(real) over the epoch
  double d_fake = 0;  // mean D(fake) in the discriminator step
  bool invariants_ok = true;
};

// A trained (or freshly initialized) stage ready for inference.
class StageModel {
 public:
  StageModel(StageKind kind, const ArchConfig& arch, Vocabulary vocab, std::uint64_t seed);

  StageKind kind() const noexcept { return nets_->kind(); }
  const ArchConfig& arch() const noexcept { return nets_->arch(); }
  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  StageNetworks<float>& networks() noexcept { return *nets_; }
  const StageNetworks<float>& networks() const noexcept { return *nets_; }

  // Forty-dimensional caption embedding of this stage's encoder.
  std::array<float, kTextDim> encode_caption(std::string_view caption) const;
  DesignCoding design_coding(const PersonRecord& person, std::string_view caption) const;

  Checkpoint to_checkpoint() const;
  // StageMismatch when `expected` is given and differs from the stored stage.
  static StageModel from_checkpoint(const Checkpoint& ck, std::optional<StageKind> expected = std::nullopt);

  nlohmann::json metadata = nlohmann::json::object();

 private:
  Vocabulary vocab_;
  std::unique_ptr<StageNetworks<float>> nets_;
};

StageModel load_stage_model(const std::filesystem::path& path, std::optional<StageKind> expected = std::nullopt);

struct TrainResult {
  StageModel model;
  std::vector<StepLoss> trace;
  std::vector<EpochSummary> epochs;
  long discriminator_updates = 0;
  long generator_updates = 0;
};

struct TrainHooks {
  // Called after each epoch; return false to stop early.
  std::function<bool(const EpochSummary&)> on_epoch;
  // Overrides the vocabulary built from the dataset captions.
  std::optional<Vocabulary> vocabulary;
};

// Separate two-player training of one stage. Records must match the config
// resolution. Writes <stage>_epoch_<k>.fgck and <stage>.fgck when a
// checkpoint directory is configured.
TrainResult train_stage(const TrainConfig& config, std::span<const PersonRecord> dataset, TrainHooks hooks = {});

// Fraction of correct real/fake decisions of the evaluation-mode
// discriminator over the given records (fakes from the evaluation-mode
// generator).
double discriminator_accuracy(const StageModel& model, std::span<const PersonRecord> records, std::uint64_t seed);

struct PipelineSeeds {
  std::uint64_t shape = 0;
  std::uint64_t image = 1;
};

struct PipelineOutput {
  SegMap shape_map;
  ImageRGB image;
};

// Raw inputs of one stage: noise and the stage's caption embedding.
struct StageInputs {
  LatentNoise z;
  std::array<float, kTextDim> text{};
};

// Constraint -> S~ -> argmax -> textures -> compose -> replace_head. The
// second model may be the image stage or the non-compositional baseline.
PipelineOutput run_pipeline(const PersonRecord& person, const StageInputs& shape_in, const StageInputs& image_in,
                            const StageModel& shape, const StageModel& image);

PipelineOutput infer_pipeline(const PersonRecord& person, std::string_view caption, const PipelineSeeds& seeds,
                              const StageModel& shape, const StageModel& image);

// One-step baseline followed by replace_head.
ImageRGB infer_one_step(const PersonRecord& person, std::string_view caption, std::uint64_t seed,
                        const StageModel& model);

}  // namespace fashion
