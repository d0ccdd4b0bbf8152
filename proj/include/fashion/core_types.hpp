#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fashion/grid.hpp"

namespace fashion {

inline constexpr int kNumLabels = 7;
inline constexpr int kNumMergedLabels = 4;
inline constexpr int kConstraintSize = 8;
inline constexpr int kDesignDim = 50;
inline constexpr int kAttributeDim = 10;
inline constexpr int kTextDim = 40;
inline constexpr int kNoiseDim = 100;
inline constexpr double kSimplexTolerance = 1e-5;

enum Label : int {
  kBackground = 0,
  kHair = 1,
  kFace = 2,
  kUpperClothes = 3,
  kPantsShorts = 4,
  kLegs = 5,
  kArms = 6,
};

enum MergedLabel : int { kMergedBackground = 0, kMergedHair = 1, kMergedFace = 2, kMergedRest = 3 };

const std::array<std::string_view, kNumLabels>& label_names();
const std::array<std::string_view, kNumMergedLabels>& merged_label_names();

class ImageRGB {
 public:
  ImageRGB() = default;
  // Throws ShapeMismatch unless pixels has 3 channels, InvalidArgument if any
  // entry is non-finite or outside [-1, 1].
  explicit ImageRGB(Grid3f pixels);

  static ImageRGB filled(int height, int width, float r, float g, float b);
  // 8-bit interleaved RGB -> [-1, 1].
  static ImageRGB from_bytes(int height, int width, std::span<const std::uint8_t> rgb);
  std::vector<std::uint8_t> to_bytes() const;

  int height() const noexcept { return pixels_.height(); }
  int width() const noexcept { return pixels_.width(); }
  const Grid3f& pixels() const noexcept { return pixels_; }

  friend bool operator==(const ImageRGB&, const ImageRGB&) = default;

 private:
  Grid3f pixels_;
};

class SegMap {
 public:
  SegMap() = default;

  int height() const noexcept { return probs_.height(); }
  int width() const noexcept { return probs_.width(); }
  const Grid3f& probs() const noexcept { return probs_; }

  friend bool operator==(const SegMap&, const SegMap&) = default;
  friend SegMap validate_segmap(Grid3f probs);

 private:
  explicit SegMap(Grid3f probs) : probs_(std::move(probs)) {}
  Grid3f probs_;
};

// Rejects arrays that are not m x n x 7 (ShapeMismatch), have a negative or
// non-finite entry (NegativeEntry) or a pixel whose channel sum is off by more
// than 1e-5 (NonSimplex).
SegMap validate_segmap(Grid3f probs);

// Per-pixel index of the largest channel; ties go to the lowest index.
LabelGrid argmax_labels(const SegMap& map);
LabelGrid argmax_labels(const Grid3f& probs);

Grid3f one_hot(const LabelGrid& labels, int num_labels = kNumLabels);
SegMap segmap_from_labels(const LabelGrid& labels);

class SpatialConstraint {
 public:
  SpatialConstraint() = default;
  // Requires 8 x 8 x 4 with simplex pixels.
  explicit SpatialConstraint(Grid3f probs);

  const Grid3f& probs() const noexcept { return probs_; }
  friend bool operator==(const SpatialConstraint&, const SpatialConstraint&) = default;

 private:
  Grid3f probs_;
};

// Attribute layout (dims 0-9); text embedding occupies dims 10-49.
enum AttributeDim : int {
  kAttrGender = 0,
  kAttrLongHair = 1,
  kAttrSunglasses = 2,
  kAttrHat = 3,
  kAttrSkinR = 4,
  kAttrSkinG = 5,
  kAttrSkinB = 6,
  kAttrSkinY = 7,
  kAttrHeight = 8,
  kAttrWidth = 9,
};

class DesignCoding {
 public:
  DesignCoding() = default;
  explicit DesignCoding(std::array<float, kDesignDim> values);

  static DesignCoding concat(std::span<const float> attributes, std::span<const float> text);

  std::span<const float> values() const noexcept { return values_; }
  std::span<const float> attributes() const noexcept { return std::span(values_).first<kAttributeDim>(); }
  std::span<const float> text() const noexcept { return std::span(values_).last<kTextDim>(); }

  friend bool operator==(const DesignCoding&, const DesignCoding&) = default;

 private:
  std::array<float, kDesignDim> values_{};
};

struct LatentNoise {
  std::array<float, kNoiseDim> values{};
  std::optional<std::uint64_t> seed;

  static LatentNoise sample(std::uint64_t seed);
  friend bool operator==(const LatentNoise&, const LatentNoise&) = default;
};

struct PersonAttributes {
  bool gender = false;  // true = female
  bool long_hair = false;
  bool sunglasses = false;
  bool hat = false;
  friend bool operator==(const PersonAttributes&, const PersonAttributes&) = default;
};

// Structure-relevant garment attributes used by the evaluation protocol.
inline constexpr int kNumStructureAttributes = 5;
using StructureLabels = std::array<bool, kNumStructureAttributes>;

struct PersonRecord {
  std::string id;
  ImageRGB image;
  SegMap segmap;
  std::string caption;
  PersonAttributes attributes;
  std::optional<StructureLabels> structure;

  // Checks that image and segmap share (m, n) and the caption is non-empty.
  void validate() const;
  friend bool operator==(const PersonRecord&, const PersonRecord&) = default;
};

}  // namespace fashion
