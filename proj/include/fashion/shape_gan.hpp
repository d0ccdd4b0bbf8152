#pragma once

#include "fashion/core_types.hpp"
#include "fashion/networks.hpp"
#include "fashion/nn/tensor.hpp"

namespace fashion {

// Stage one. The generator maps (z, constraint, d) to a softmax map over the
// seven labels; the discriminator sees the map next to the constraint
// upsampled to full resolution, plus the tiled design coding.

SegMap generate_shape(const LatentNoise& z, const SpatialConstraint& constraint, const DesignCoding& d,
                      const ConditionalGenerator<float>& generator);

double discriminate_shape(const SegMap& map, const SpatialConstraint& constraint, const DesignCoding& d,
                          const ConditionalDiscriminator<float>& discriminator);

// Discriminator input for a batch: map channels followed by the nearest
// upsampled condition channels.
template <typename T>
nn::Tensor<T> with_upsampled_condition(const nn::Tensor<T>& x, const nn::Tensor<T>& cond) {
  const int f = x.height() / cond.height();
  nn::Tensor<T> up(cond.channels(), cond.batch(), x.height(), x.width());
  for (int c = 0; c < cond.channels(); ++c)
    for (int n = 0; n < cond.batch(); ++n)
      for (int y = 0; y < x.height(); ++y)
        for (int xx = 0; xx < x.width(); ++xx) up.at(c, n, y, xx) = cond.at(c, n, y / f, xx / f);
  return nn::concat_channels(x, up);
}

}  // namespace fashion
