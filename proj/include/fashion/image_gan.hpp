#pragma once

#include <vector>

#include "fashion/core_types.hpp"
#include "fashion/error.hpp"
#include "fashion/networks.hpp"
#include "fashion/nn/tensor.hpp"

namespace fashion {

// One m x n x 3 texture per label, in label order.
template <typename T>
using TextureStack = std::vector<Grid3<T>>;

enum class ComposeMode { kHard, kSoft };

namespace detail {
template <typename T>
void check_compose(const TextureStack<T>& channels, const Grid3<T>& masks) {
  if (static_cast<int>(channels.size()) != masks.channels()) {
    throw Error(ErrorCode::ShapeMismatch, "one texture channel per mask channel is required");
  }
  for (const auto& ch : channels) {
    if (ch.channels() != 3 || !ch.same_extent(masks.height(), masks.width())) {
      throw Error(ErrorCode::ShapeMismatch, "texture channel extent differs from the masks");
    }
  }
}
}  // namespace detail

// hard: every mask pixel must be one-hot and the output copies the selected
// channel. soft: probability-weighted sum of the channels.
template <typename T>
Grid3<T> compose(const TextureStack<T>& channels, const Grid3<T>& masks, ComposeMode mode) {
  detail::check_compose(channels, masks);
  const int h = masks.height(), w = masks.width(), l = masks.channels();
  Grid3<T> out(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mode == ComposeMode::kHard) {
        int hot = -1;
        for (int c = 0; c < l; ++c) {
          const T m = masks(y, x, c);
          if (m == T(1) && hot < 0) {
            hot = c;
          } else if (m != T(0)) {
            throw Error(ErrorCode::NonOneHot, "hard composition needs one-hot masks");
          }
        }
        if (hot < 0) throw Error(ErrorCode::NonOneHot, "hard composition needs one-hot masks");
        for (int k = 0; k < 3; ++k) out(y, x, k) = channels[hot](y, x, k);
      } else {
        for (int k = 0; k < 3; ++k) {
          T s = 0;
          for (int c = 0; c < l; ++c) s += masks(y, x, c) * channels[c](y, x, k);
          out(y, x, k) = s;
        }
      }
    }
  }
  return out;
}

// d(loss)/d(channel l) = grad * mask_l.
template <typename T>
TextureStack<T> compose_backward(const Grid3<T>& grad, const Grid3<T>& masks) {
  TextureStack<T> out(masks.channels(), Grid3<T>(masks.height(), masks.width(), 3));
  for (int y = 0; y < masks.height(); ++y)
    for (int x = 0; x < masks.width(); ++x)
      for (int c = 0; c < masks.channels(); ++c)
        for (int k = 0; k < 3; ++k) out[c](y, x, k) = grad(y, x, k) * masks(y, x, c);
  return out;
}

ImageRGB compose(const TextureStack<float>& channels, const SegMap& masks, ComposeMode mode);

// Batched form used in training: channels {3L, N, H, W} laid out as
// (label, rgb), masks {L, N, H, W} -> {3, N, H, W}.
template <typename T>
nn::Tensor<T> compose_tensor(const nn::Tensor<T>& channels, const nn::Tensor<T>& masks) {
  const int l = masks.channels();
  if (channels.channels() != 3 * l || channels.batch() != masks.batch() || channels.plane() != masks.plane()) {
    throw Error(ErrorCode::ShapeMismatch, "texture tensor does not match masks");
  }
  nn::Tensor<T> out(3, masks.batch(), masks.height(), masks.width());
  const std::size_t cs = masks.channel_stride();
  for (int c = 0; c < l; ++c)
    for (int k = 0; k < 3; ++k) {
      const T* ch = channels.data() + (3 * c + k) * cs;
      const T* m = masks.data() + c * cs;
      T* o = out.data() + k * cs;
      for (std::size_t i = 0; i < cs; ++i) o[i] += m[i] * ch[i];
    }
  return out;
}

template <typename T>
nn::Tensor<T> compose_tensor_backward(const nn::Tensor<T>& grad, const nn::Tensor<T>& masks) {
  const int l = masks.channels();
  nn::Tensor<T> out(3 * l, masks.batch(), masks.height(), masks.width());
  const std::size_t cs = masks.channel_stride();
  for (int c = 0; c < l; ++c)
    for (int k = 0; k < 3; ++k) {
      const T* g = grad.data() + k * cs;
      const T* m = masks.data() + c * cs;
      T* o = out.data() + (3 * c + k) * cs;
      for (std::size_t i = 0; i < cs; ++i) o[i] = g[i] * m[i];
    }
  return out;
}

// Tanh texture channels of the stage-two generator.
TextureStack<float> generate_texture_channels(const LatentNoise& z, const SegMap& map, const DesignCoding& d,
                                              const ConditionalGenerator<float>& generator);

// Pixels whose original label is hair or face come from `original`.
ImageRGB replace_head(const ImageRGB& generated, const ImageRGB& original, const SegMap& original_map);

double discriminate_image(const ImageRGB& image, const SegMap& map, const DesignCoding& d,
                          const ConditionalDiscriminator<float>& discriminator);

}  // namespace fashion
