#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fashion/core_types.hpp"

namespace fashion {

enum class Sleeve { kShort, kLong };
enum class Bottom { kShorts, kPants, kSkirt };

inline constexpr int kNumColors = 6;
const std::array<std::string_view, kNumColors>& color_names();

// Garment part of a doll: what the caption describes.
struct GarmentSpec {
  Sleeve sleeve = Sleeve::kShort;
  Bottom bottom = Bottom::kPants;
  int top_color = 0;     // index into color_names()
  int bottom_color = 0;  // index into color_names()
  friend bool operator==(const GarmentSpec&, const GarmentSpec&) = default;
};

// Parameters of one paper-doll figure. Lengths are fractions of the body
// height (0.9 of the image height, top of the head at 0.05).
struct DollSpec {
  bool female = false;
  bool long_hair = false;
  bool sunglasses = false;
  bool hat = false;
  GarmentSpec garment;
  double center_x = 0.5;      // [0.45, 0.55], fraction of the image width
  double torso_half = 0.13;   // [0.11, 0.15]
  double arm_width = 0.085;   // [0.075, 0.095]
  double arm_tilt = 0.04;     // [0.0, 0.08], outward shift of the arm at the hip line
  double leg_width = 0.1;     // [0.09, 0.11]
  double leg_spread = 0.03;   // [0.0, 0.06], outward shift of each foot
  double skin_tone = 0.5;     // [0, 1], light to dark
  int hair_color = 0;         // [0, 3)
  std::uint64_t seed = 0;

  // Everything drawn from `seed`; skirts only for female dolls.
  static DollSpec sample(std::uint64_t seed);
  // Throws InvalidArgument when a parameter leaves its documented range.
  void validate() const;
  friend bool operator==(const DollSpec&, const DollSpec&) = default;
};

// "a {lady|man} in a {color} top with {long|short} sleeves and {color}
// {pants|shorts|skirt}"
std::string doll_caption(const DollSpec& spec);

struct ParsedCaption {
  bool female = false;
  GarmentSpec garment;
  friend bool operator==(const ParsedCaption&, const ParsedCaption&) = default;
};
// Inverse of doll_caption; nullopt for text outside the template.
std::optional<ParsedCaption> parse_doll_caption(std::string_view caption);

// [long sleeves, short sleeves, pants, shorts, skirt]
StructureLabels structure_labels(const GarmentSpec& garment);
const std::array<std::string_view, kNumStructureAttributes>& structure_attribute_names();

PersonRecord render_doll(const DollSpec& spec, int resolution, const std::string& id = "00000");

// Exact area (in pixels at `resolution`) of each label of the doll's
// primitives, computed from the geometry rather than by rasterizing.
std::array<double, kNumLabels> doll_label_areas(const DollSpec& spec, int resolution);

inline constexpr std::string_view kDatasetVersion = "1";

std::vector<PersonRecord> generate_records(int count, std::uint64_t seed, int resolution);
// Writes img_XXXXX.png, seg_XXXXX.png, captions.jsonl and DATASET_VERSION.
std::vector<PersonRecord> generate_dataset(int count, std::uint64_t seed, const std::filesystem::path& dir,
                                           int resolution = 32);
void write_dataset(std::span<const PersonRecord> records, const std::filesystem::path& dir);

// Throws MissingSegmentation, CaptionMissing or PaletteViolation naming the
// offending file.
std::vector<PersonRecord> load_dataset(const std::filesystem::path& dir);

// Record <-> file helpers shared with the CLI and service.
ImageRGB load_image(const std::filesystem::path& path);
SegMap load_segmap(const std::filesystem::path& path);
std::vector<std::uint8_t> image_png(const ImageRGB& image);
std::vector<std::uint8_t> segmap_png(const SegMap& map);  // argmax labels as palette indices
ImageRGB image_from_png(std::span<const std::uint8_t> png);
SegMap segmap_from_png(std::span<const std::uint8_t> png);

// A person from an uploaded photo and map. Attributes not given are read
// from the caption when it follows the doll template ("lady" -> female);
// otherwise everything defaults to false. Throws ShapeMismatch.
PersonRecord make_person(ImageRGB image, SegMap segmap, std::string caption,
                         std::optional<PersonAttributes> attributes = std::nullopt);

}  // namespace fashion
