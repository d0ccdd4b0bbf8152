#pragma once

#include <array>
#include <span>
#include <vector>

#include "fashion/core_types.hpp"

namespace fashion {

// {background, hair, face} are copied; the four clothing/body classes are
// summed into "rest". Throws ShapeMismatch for non-7-channel input.
Grid3f merge_labels(const Grid3f& probs);
Grid3f merge_labels(const SegMap& map);

// One output sample of a separable resampling filter.
struct ResampleTap {
  std::vector<int> index;
  std::vector<double> weight;
};

// Antialiased cubic B-spline taps mapping `in` samples onto `out` samples,
// edge-replicated and normalized to unit sum; identity when in == out. All
// weights are non-negative, so a simplex map stays a simplex map and the
// filter commutes with merge_labels.
std::vector<ResampleTap> bicubic_taps(int in, int out);

// Linear bicubic resampling to out_size x out_size, without clamping.
Grid3f resample_bicubic(const Grid3f& map, int out_size);

// Bicubic downsampling to 8 x 8; entries clamped to [0, 1] and each pixel
// renormalized to sum 1. Throws TooSmall when m or n < 8.
Grid3f downsample_bicubic(const Grid3f& map);

SpatialConstraint build_spatial_constraint(const PersonRecord& record);
SpatialConstraint build_spatial_constraint(const SegMap& map);

// Down-sampled but not merged 8 x 8 x 7 prior used by the one-step baseline.
Grid3f downsampled_prior(const SegMap& map);

// Nearest-neighbour upsampling of an 8 x 8 map to size x size.
Grid3f upsample_nearest(const Grid3f& map, int size);

// [gender, long_hair, sunglasses, hat, skin_R, skin_G, skin_B, skin_Y,
//  height_frac, width_frac]. Skin = face, arms and legs pixels; if there are
// none the skin dims fall back to 0.5 and a warning is logged.
std::array<float, kAttributeDim> extract_attributes(const PersonRecord& record);

// Median of a list (mean of the two central values for even counts).
double median(std::vector<double> values);

DesignCoding build_design_coding(const PersonRecord& record, std::span<const float> text_vec);

}  // namespace fashion
