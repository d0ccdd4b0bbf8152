#include "fashion/image_gan.hpp"

#include <algorithm>

#include "fashion/bridge.hpp"

namespace fashion {

ImageRGB compose(const TextureStack<float>& channels, const SegMap& masks, ComposeMode mode) {
  Grid3f out = compose(channels, masks.probs(), mode);
  for (float& v : out.values()) v = std::clamp(v, -1.0f, 1.0f);
  return ImageRGB(std::move(out));
}

TextureStack<float> generate_texture_channels(const LatentNoise& z, const SegMap& map, const DesignCoding& d,
                                              const ConditionalGenerator<float>& generator) {
  const auto out = generator.infer(to_tensor<float>(std::span<const float>(z.values)),
                                   to_tensor<float>(d.values()), to_tensor<float>(map.probs()));
  TextureStack<float> stack;
  stack.reserve(kNumLabels);
  for (int l = 0; l < kNumLabels; ++l) stack.push_back(to_grid<float>(out, 0, 3 * l, 3));
  return stack;
}

ImageRGB replace_head(const ImageRGB& generated, const ImageRGB& original, const SegMap& original_map) {
  if (!generated.pixels().same_extent(original.height(), original.width()) ||
      !original_map.probs().same_extent(original.height(), original.width())) {
    throw Error(ErrorCode::ShapeMismatch, "replace_head inputs differ in size");
  }
  const LabelGrid labels = argmax_labels(original_map);
  Grid3f out = generated.pixels();
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const int l = labels(y, x);
      if (l == kHair || l == kFace) {
        for (int k = 0; k < 3; ++k) out(y, x, k) = original.pixels()(y, x, k);
      }
    }
  return ImageRGB(std::move(out));
}

double discriminate_image(const ImageRGB& image, const SegMap& map, const DesignCoding& d,
                          const ConditionalDiscriminator<float>& discriminator) {
  if (!map.probs().same_extent(image.height(), image.width())) {
    throw Error(ErrorCode::ShapeMismatch, "image and map differ in size");
  }
  const auto x = nn::concat_channels(to_tensor<float>(image.pixels()), to_tensor<float>(map.probs()));
  const auto logit = discriminator.infer(x, to_tensor<float>(d.values()));
  return sigmoid(static_cast<double>(logit[0]));
}

}  // namespace fashion
