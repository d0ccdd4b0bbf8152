#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fashion {

struct RgbBytes {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // interleaved, row-major
};

struct PaletteBytes {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> indices;
};

// Colours written into the palette of segmentation PNGs, in label order.
const std::array<std::array<std::uint8_t, 3>, 7>& label_palette();

std::vector<std::uint8_t> encode_png_rgb(const RgbBytes& image);
// Any 8-bit or 16-bit PNG is converted to RGB8. Throws Format.
RgbBytes decode_png_rgb(std::span<const std::uint8_t> png);

std::vector<std::uint8_t> encode_png_palette(const PaletteBytes& map);
// Requires an 8-bit palette PNG whose indices are all < max_index; throws
// PaletteViolation otherwise.
PaletteBytes decode_png_palette(std::span<const std::uint8_t> png, int max_index = 7);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace fashion
