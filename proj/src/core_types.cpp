#include "fashion/core_types.hpp"

#include <cmath>
#include <sstream>

#include "fashion/error.hpp"
#include "fashion/rng.hpp"

namespace fashion {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSimplex: return "NonSimplex";
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::EmptySkinRegion: return "EmptySkinRegion";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyCaption: return "EmptyCaption";
    case ErrorCode::DatasetEmpty: return "DatasetEmpty";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorCode::StageMismatch: return "StageMismatch";
    case ErrorCode::MissingSegmentation: return "MissingSegmentation";
    case ErrorCode::CaptionMissing: return "CaptionMissing";
    case ErrorCode::PaletteViolation: return "PaletteViolation";
    case ErrorCode::PriorShapeMismatch: return "PriorShapeMismatch";
    case ErrorCode::NonOneHot: return "NonOneHot";
    case ErrorCode::TooFewIds: return "TooFewIds";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::InvalidPermutation: return "InvalidPermutation";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

const std::array<std::string_view, kNumLabels>& label_names() {
  static constexpr std::array<std::string_view, kNumLabels> names = {
      "background", "hair", "face", "upper-clothes", "pants/shorts", "legs", "arms"};
  return names;
}

const std::array<std::string_view, kNumMergedLabels>& merged_label_names() {
  static constexpr std::array<std::string_view, kNumMergedLabels> names = {"background", "hair", "face",
                                                                           "rest"};
  return names;
}

namespace {

std::string where(int y, int x) {
  std::ostringstream os;
  os << "pixel (" << y << ", " << x << ")";
  return os.str();
}

void check_simplex(const Grid3f& probs) {
  for (int y = 0; y < probs.height(); ++y) {
    for (int x = 0; x < probs.width(); ++x) {
      double sum = 0.0;
      for (float v : probs.pixel(y, x)) {
        if (!std::isfinite(v) || v < 0.0f) {
          throw Error(ErrorCode::NegativeEntry, where(y, x) + " has a negative or non-finite entry");
        }
        if (v > 1.0 + kSimplexTolerance) {
          throw Error(ErrorCode::NonSimplex, where(y, x) + " has an entry above 1");
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > kSimplexTolerance) {
        std::ostringstream os;
        os << where(y, x) << " sums to " << sum;
        throw Error(ErrorCode::NonSimplex, os.str());
      }
    }
  }
}

}  // namespace

ImageRGB::ImageRGB(Grid3f pixels) : pixels_(std::move(pixels)) {
  if (pixels_.channels() != 3 || pixels_.height() <= 0 || pixels_.width() <= 0) {
    throw Error(ErrorCode::ShapeMismatch, "image must be m x n x 3");
  }
  for (float v : pixels_.values()) {
    if (!std::isfinite(v) || v < -1.0f || v > 1.0f) {
      throw Error(ErrorCode::InvalidArgument, "image entries must be finite and within [-1, 1]");
    }
  }
}

ImageRGB ImageRGB::filled(int height, int width, float r, float g, float b) {
  Grid3f px(height, width, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      px(y, x, 0) = r;
      px(y, x, 1) = g;
      px(y, x, 2) = b;
    }
  }
  return ImageRGB(std::move(px));
}

ImageRGB ImageRGB::from_bytes(int height, int width, std::span<const std::uint8_t> rgb) {
  if (rgb.size() != static_cast<std::size_t>(height) * width * 3) {
    throw Error(ErrorCode::ShapeMismatch, "byte buffer does not match image extent");
  }
  std::vector<float> data(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) data[i] = static_cast<float>(rgb[i]) / 127.5f - 1.0f;
  return ImageRGB(Grid3f(height, width, 3, std::move(data)));
}

std::vector<std::uint8_t> ImageRGB::to_bytes() const {
  std::vector<std::uint8_t> out(pixels_.size());
  auto values = pixels_.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = std::lround((values[i] + 1.0f) * 127.5f);
    out[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f));
  }
  return out;
}

SegMap validate_segmap(Grid3f probs) {
  if (probs.channels() != kNumLabels || probs.height() <= 0 || probs.width() <= 0) {
    throw Error(ErrorCode::ShapeMismatch, "segmentation map must be m x n x 7");
  }
  check_simplex(probs);
  return SegMap(std::move(probs));
}

LabelGrid argmax_labels(const Grid3f& probs) {
  LabelGrid out{probs.height(), probs.width(), std::vector<int>(static_cast<std::size_t>(probs.height()) * probs.width())};
  for (int y = 0; y < probs.height(); ++y) {
    for (int x = 0; x < probs.width(); ++x) {
      auto px = probs.pixel(y, x);
      int best = 0;
      for (int c = 1; c < probs.channels(); ++c) {
        if (px[c] > px[best]) best = c;
      }
      out(y, x) = best;
    }
  }
  return out;
}

LabelGrid argmax_labels(const SegMap& map) { return argmax_labels(map.probs()); }

Grid3f one_hot(const LabelGrid& labels, int num_labels) {
  Grid3f out(labels.height, labels.width, num_labels);
  for (int y = 0; y < labels.height; ++y) {
    for (int x = 0; x < labels.width; ++x) {
      const int l = labels(y, x);
      if (l < 0 || l >= num_labels) throw Error(ErrorCode::PaletteViolation, "label index out of range");
      out(y, x, l) = 1.0f;
    }
  }
  return out;
}

SegMap segmap_from_labels(const LabelGrid& labels) { return validate_segmap(one_hot(labels)); }

SpatialConstraint::SpatialConstraint(Grid3f probs) : probs_(std::move(probs)) {
  if (probs_.height() != kConstraintSize || probs_.width() != kConstraintSize ||
      probs_.channels() != kNumMergedLabels) {
    throw Error(ErrorCode::ShapeMismatch, "spatial constraint must be 8 x 8 x 4");
  }
  check_simplex(probs_);
}

DesignCoding::DesignCoding(std::array<float, kDesignDim> values) : values_(values) {
  for (int i = 0; i < kDesignDim; ++i) {
    const float v = values_[i];
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "design coding must be finite");
    if (i < 4 && v != 0.0f && v != 1.0f) {
      throw Error(ErrorCode::InvalidArgument, "binary attribute dims must be 0 or 1");
    }
    if (i >= 4 && i < kAttributeDim && (v < 0.0f || v > 1.0f)) {
      throw Error(ErrorCode::InvalidArgument, "skin and size dims must lie in [0, 1]");
    }
  }
}

DesignCoding DesignCoding::concat(std::span<const float> attributes, std::span<const float> text) {
  if (attributes.size() != kAttributeDim || text.size() != kTextDim) {
    throw Error(ErrorCode::LengthMismatch, "design coding needs 10 attribute and 40 text dims");
  }
  std::array<float, kDesignDim> v{};
  std::copy(attributes.begin(), attributes.end(), v.begin());
  std::copy(text.begin(), text.end(), v.begin() + kAttributeDim);
  return DesignCoding(v);
}

LatentNoise LatentNoise::sample(std::uint64_t seed) {
  LatentNoise z;
  z.seed = seed;
  Rng rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (float& v : z.values) v = normal(rng);
  return z;
}

void PersonRecord::validate() const {
  if (!image.pixels().same_extent(segmap.height(), segmap.width())) {
    throw Error(ErrorCode::ShapeMismatch, "record " + id + ": image and segmentation extents differ");
  }
  if (caption.empty()) throw Error(ErrorCode::CaptionMissing, "record " + id + " has an empty caption");
}

}  // namespace fashion
