#include "fashion/shape_gan.hpp"

#include "fashion/bridge.hpp"

namespace fashion {

SegMap generate_shape(const LatentNoise& z, const SpatialConstraint& constraint, const DesignCoding& d,
                      const ConditionalGenerator<float>& generator) {
  const auto out = generator.infer(to_tensor<float>(std::span<const float>(z.values)),
                                   to_tensor<float>(d.values()), to_tensor<float>(constraint.probs()));
  return validate_segmap(to_grid<float>(out, 0));
}

double discriminate_shape(const SegMap& map, const SpatialConstraint& constraint, const DesignCoding& d,
                          const ConditionalDiscriminator<float>& discriminator) {
  const auto x = with_upsampled_condition(to_tensor<float>(map.probs()), to_tensor<float>(constraint.probs()));
  const auto logit = discriminator.infer(x, to_tensor<float>(d.values()));
  return sigmoid(static_cast<double>(logit[0]));
}

}  // namespace fashion
