#include "fashion/baselines.hpp"

#include <algorithm>

#include "fashion/bridge.hpp"

namespace fashion {
namespace {

ImageRGB to_image(const nn::Tensor<float>& t) {
  Grid3f g = to_grid<float>(t, 0);
  for (float& v : g.values()) v = std::clamp(v, -1.0f, 1.0f);
  return ImageRGB(std::move(g));
}

}  // namespace

ImageRGB one_step_generate(const LatentNoise& z, const Grid3f& prior, const DesignCoding& d,
                           const ConditionalGenerator<float>& generator, OneStepVariant variant) {
  const int want = variant == OneStepVariant::k87 ? kNumLabels : kNumMergedLabels;
  if (prior.height() != kConstraintSize || prior.width() != kConstraintSize || prior.channels() != want) {
    throw Error(ErrorCode::PriorShapeMismatch, variant == OneStepVariant::k87 ? "8-7 prior must be 8 x 8 x 7"
                                                                              : "8-4 prior must be 8 x 8 x 4");
  }
  const auto& layout = generator.layout();
  if (layout.cond_channels != want || layout.cond_resolution != kConstraintSize || layout.head_channels != 3) {
    throw Error(ErrorCode::StageMismatch, "generator is not a one-step model of this variant");
  }
  return to_image(generator.infer(to_tensor<float>(std::span<const float>(z.values)), to_tensor<float>(d.values()),
                                  to_tensor<float>(prior)));
}

ImageRGB noncomp_generate(const LatentNoise& z, const SegMap& map, const DesignCoding& d,
                          const ConditionalGenerator<float>& generator) {
  if (generator.layout().head_channels != 3 || generator.layout().cond_channels != kNumLabels) {
    throw Error(ErrorCode::StageMismatch, "generator is not a non-compositional model");
  }
  return to_image(generator.infer(to_tensor<float>(std::span<const float>(z.values)), to_tensor<float>(d.values()),
                                  to_tensor<float>(map.probs())));
}

}  // namespace fashion
