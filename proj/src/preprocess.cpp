#include "fashion/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "fashion/error.hpp"

namespace fashion {

Grid3f merge_labels(const Grid3f& probs) {
  if (probs.channels() != kNumLabels) throw Error(ErrorCode::ShapeMismatch, "merge_labels expects 7 channels");
  Grid3f out(probs.height(), probs.width(), kNumMergedLabels);
  for (int y = 0; y < probs.height(); ++y) {
    for (int x = 0; x < probs.width(); ++x) {
      auto in = probs.pixel(y, x);
      auto o = out.pixel(y, x);
      o[kMergedBackground] = in[kBackground];
      o[kMergedHair] = in[kHair];
      o[kMergedFace] = in[kFace];
      o[kMergedRest] = in[kUpperClothes] + in[kPantsShorts] + in[kLegs] + in[kArms];
    }
  }
  return out;
}

Grid3f merge_labels(const SegMap& map) { return merge_labels(map.probs()); }

namespace {

// Cubic B-spline: non-negative and a partition of unity.
double cubic(double x) {
  x = std::abs(x);
  if (x < 1.0) return (3.0 * x * x * x - 6.0 * x * x + 4.0) / 6.0;
  if (x < 2.0) return (2.0 - x) * (2.0 - x) * (2.0 - x) / 6.0;
  return 0.0;
}

}  // namespace

std::vector<ResampleTap> bicubic_taps(int in, int out) {
  const double scale = static_cast<double>(out) / in;
  // Downsampling widens the kernel by 1/scale so that every input sample
  // contributes (antialiasing); upsampling uses the plain kernel.
  const double kscale = std::min(scale, 1.0);
  const double support = 2.0 / kscale;
  std::vector<ResampleTap> taps(out);
  if (in == out) {
    for (int i = 0; i < out; ++i) taps[i] = {{i}, {1.0}};
    return taps;
  }
  for (int i = 0; i < out; ++i) {
    const double center = (i + 0.5) / scale - 0.5;
    const int lo = static_cast<int>(std::floor(center - support));
    const int hi = static_cast<int>(std::ceil(center + support));
    std::vector<double> acc(in, 0.0);
    for (int j = lo; j <= hi; ++j) {
      const double w = cubic((center - j) * kscale) * kscale;
      if (w == 0.0) continue;
      acc[std::clamp(j, 0, in - 1)] += w;
    }
    double sum = 0.0;
    for (double w : acc) sum += w;
    for (int j = 0; j < in; ++j) {
      if (acc[j] != 0.0) {
        taps[i].index.push_back(j);
        taps[i].weight.push_back(acc[j] / sum);
      }
    }
  }
  return taps;
}

Grid3f resample_bicubic(const Grid3f& map, int out_size) {
  const int h = map.height(), w = map.width(), c = map.channels();
  const auto ty = bicubic_taps(h, out_size);
  const auto tx = bicubic_taps(w, out_size);
  // Rows first, then columns; accumulate in double.
  std::vector<double> tmp(static_cast<std::size_t>(out_size) * w * c, 0.0);
  for (int i = 0; i < out_size; ++i) {
    for (std::size_t k = 0; k < ty[i].index.size(); ++k) {
      const int sy = ty[i].index[k];
      const double wy = ty[i].weight[k];
      for (int x = 0; x < w; ++x) {
        for (int ch = 0; ch < c; ++ch) tmp[(static_cast<std::size_t>(i) * w + x) * c + ch] += wy * map(sy, x, ch);
      }
    }
  }
  Grid3f out(out_size, out_size, c);
  for (int i = 0; i < out_size; ++i) {
    for (int j = 0; j < out_size; ++j) {
      for (int ch = 0; ch < c; ++ch) {
        double v = 0.0;
        for (std::size_t k = 0; k < tx[j].index.size(); ++k) {
          v += tx[j].weight[k] * tmp[(static_cast<std::size_t>(i) * w + tx[j].index[k]) * c + ch];
        }
        out(i, j, ch) = static_cast<float>(v);
      }
    }
  }
  return out;
}

Grid3f downsample_bicubic(const Grid3f& map) {
  if (map.height() < kConstraintSize || map.width() < kConstraintSize) {
    throw Error(ErrorCode::TooSmall, "downsampling needs at least 8 x 8 input");
  }
  Grid3f out = resample_bicubic(map, kConstraintSize);
  for (int y = 0; y < kConstraintSize; ++y) {
    for (int x = 0; x < kConstraintSize; ++x) {
      auto px = out.pixel(y, x);
      double sum = 0.0;
      for (float& v : px) {
        v = std::clamp(v, 0.0f, 1.0f);
        sum += v;
      }
      if (sum <= 0.0) {
        std::fill(px.begin(), px.end(), 1.0f / static_cast<float>(px.size()));
        continue;
      }
      for (float& v : px) v = static_cast<float>(v / sum);
    }
  }
  return out;
}

SpatialConstraint build_spatial_constraint(const SegMap& map) {
  return SpatialConstraint(downsample_bicubic(merge_labels(map)));
}

SpatialConstraint build_spatial_constraint(const PersonRecord& record) {
  record.validate();
  return build_spatial_constraint(record.segmap);
}

Grid3f downsampled_prior(const SegMap& map) { return downsample_bicubic(map.probs()); }

Grid3f upsample_nearest(const Grid3f& map, int size) {
  Grid3f out(size, size, map.channels());
  for (int y = 0; y < size; ++y) {
    const int sy = y * map.height() / size;
    for (int x = 0; x < size; ++x) {
      const int sx = x * map.width() / size;
      auto src = map.pixel(sy, sx);
      std::copy(src.begin(), src.end(), out.pixel(y, x).begin());
    }
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "median of an empty list");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::array<float, kAttributeDim> extract_attributes(const PersonRecord& record) {
  record.validate();
  std::array<float, kAttributeDim> a{};
  a[kAttrGender] = record.attributes.gender ? 1.0f : 0.0f;
  a[kAttrLongHair] = record.attributes.long_hair ? 1.0f : 0.0f;
  a[kAttrSunglasses] = record.attributes.sunglasses ? 1.0f : 0.0f;
  a[kAttrHat] = record.attributes.hat ? 1.0f : 0.0f;

  const LabelGrid labels = argmax_labels(record.segmap);
  const Grid3f& px = record.image.pixels();
  std::array<std::vector<double>, 3> skin;
  int top = labels.height, bottom = -1, left = labels.width, right = -1;
  for (int y = 0; y < labels.height; ++y) {
    for (int x = 0; x < labels.width; ++x) {
      const int l = labels(y, x);
      if (l == kFace || l == kArms || l == kLegs) {
        for (int c = 0; c < 3; ++c) skin[c].push_back((px(y, x, c) + 1.0) * 0.5);
      }
      if (l != kBackground) {
        top = std::min(top, y);
        bottom = std::max(bottom, y);
        left = std::min(left, x);
        right = std::max(right, x);
      }
    }
  }
  if (skin[0].empty()) {
    std::clog << "warning: " << to_string(ErrorCode::EmptySkinRegion) << ": record " << record.id
              << " has no skin pixels; skin dims set to 0.5\n";
    for (int d = kAttrSkinR; d <= kAttrSkinY; ++d) a[d] = 0.5f;
  } else {
    const double r = median(skin[0]), g = median(skin[1]), b = median(skin[2]);
    a[kAttrSkinR] = static_cast<float>(r);
    a[kAttrSkinG] = static_cast<float>(g);
    a[kAttrSkinB] = static_cast<float>(b);
    a[kAttrSkinY] = static_cast<float>(std::clamp(0.299 * r + 0.587 * g + 0.114 * b, 0.0, 1.0));
  }
  if (bottom >= 0) {
    a[kAttrHeight] = static_cast<float>(bottom - top + 1) / static_cast<float>(labels.height);
    a[kAttrWidth] = static_cast<float>(right - left + 1) / static_cast<float>(labels.width);
  }
  return a;
}

DesignCoding build_design_coding(const PersonRecord& record, std::span<const float> text_vec) {
  if (text_vec.size() != kTextDim) throw Error(ErrorCode::LengthMismatch, "text vector must have 40 dims");
  const auto attrs = extract_attributes(record);
  return DesignCoding::concat(attrs, text_vec);
}

}  // namespace fashion
