#include "fashion/png_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <optional>
#include <string>

#include "fashion/error.hpp"

namespace fashion {
namespace {

struct ReadState {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
};

void read_fn(png_structp png, png_bytep out, png_size_t len) {
  auto* st = static_cast<ReadState*>(png_get_io_ptr(png));
  if (st->pos + len > st->data.size()) png_error(png, "truncated PNG");
  std::memcpy(out, st->data.data() + st->pos, len);
  st->pos += len;
}

void write_fn(png_structp png, png_bytep in, png_size_t len) {
  auto* buf = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  buf->insert(buf->end(), in, in + len);
}

void flush_fn(png_structp) {}

[[noreturn]] void error_fn(png_structp, png_const_charp msg) { throw Error(ErrorCode::Format, msg); }
void warning_fn(png_structp, png_const_charp) {}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : state_{bytes, 0} {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error(ErrorCode::Format, "not a PNG");
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_fn, warning_fn);
    info_ = png_create_info_struct(png_);
    png_set_read_fn(png_, &state_, read_fn);
    png_read_info(png_, info_);
  }
  ~Reader() { png_destroy_read_struct(&png_, &info_, nullptr); }
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  png_structp png() { return png_; }
  png_infop info() { return info_; }

  std::vector<std::uint8_t> rows(int height, std::size_t stride) {
    std::vector<std::uint8_t> out(stride * height);
    std::vector<png_bytep> ptrs(height);
    for (int y = 0; y < height; ++y) ptrs[y] = out.data() + stride * y;
    png_read_image(png_, ptrs.data());
    png_read_end(png_, nullptr);
    return out;
  }

 private:
  ReadState state_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

std::vector<std::uint8_t> write_png(int height, int width, int color_type, const std::uint8_t* data,
                                    std::size_t stride, const std::vector<png_color>* palette) {
  std::vector<std::uint8_t> buf;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_fn, warning_fn);
  png_infop info = png_create_info_struct(png);
  try {
    png_set_write_fn(png, &buf, write_fn, flush_fn);
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    if (palette) png_set_PLTE(png, info, palette->data(), static_cast<int>(palette->size()));
    png_set_compression_level(png, 9);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) png_write_row(png, const_cast<png_bytep>(data + stride * y));
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return buf;
}

}  // namespace

const std::array<std::array<std::uint8_t, 3>, 7>& label_palette() {
  static const std::array<std::array<std::uint8_t, 3>, 7> p = {{
      {0, 0, 0},        // background
      {128, 64, 0},     // hair
      {255, 200, 160},  // face
      {220, 20, 60},    // upper-clothes
      {30, 60, 200},    // pants/shorts
      {240, 220, 60},   // legs
      {40, 170, 80},    // arms
  }};
  return p;
}

std::vector<std::uint8_t> encode_png_rgb(const RgbBytes& image) {
  if (image.rgb.size() != static_cast<std::size_t>(image.height) * image.width * 3) {
    throw Error(ErrorCode::ShapeMismatch, "RGB buffer size does not match its extent");
  }
  return write_png(image.height, image.width, PNG_COLOR_TYPE_RGB, image.rgb.data(),
                   static_cast<std::size_t>(image.width) * 3, nullptr);
}

RgbBytes decode_png_rgb(std::span<const std::uint8_t> png) {
  Reader r(png);
  RgbBytes out;
  out.width = static_cast<int>(png_get_image_width(r.png(), r.info()));
  out.height = static_cast<int>(png_get_image_height(r.png(), r.info()));
  const int color = png_get_color_type(r.png(), r.info());
  if (png_get_bit_depth(r.png(), r.info()) == 16) png_set_strip_16(r.png());
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png());
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(r.png());
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(r.png(), r.info()) < 8) {
    png_set_expand_gray_1_2_4_to_8(r.png());
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png());
  if (png_get_valid(r.png(), r.info(), PNG_INFO_tRNS)) png_set_strip_alpha(r.png());
  png_read_update_info(r.png(), r.info());
  if (png_get_rowbytes(r.png(), r.info()) != static_cast<std::size_t>(out.width) * 3) {
    throw Error(ErrorCode::Format, "unsupported PNG pixel layout");
  }
  out.rgb = r.rows(out.height, static_cast<std::size_t>(out.width) * 3);
  return out;
}

std::vector<std::uint8_t> encode_png_palette(const PaletteBytes& map) {
  if (map.indices.size() != static_cast<std::size_t>(map.height) * map.width) {
    throw Error(ErrorCode::ShapeMismatch, "index buffer size does not match its extent");
  }
  std::vector<png_color> palette;
  for (const auto& c : label_palette()) palette.push_back({c[0], c[1], c[2]});
  for (auto v : map.indices) {
    if (v >= palette.size()) throw Error(ErrorCode::PaletteViolation, "label index out of range");
  }
  return write_png(map.height, map.width, PNG_COLOR_TYPE_PALETTE, map.indices.data(),
                   static_cast<std::size_t>(map.width), &palette);
}

PaletteBytes decode_png_palette(std::span<const std::uint8_t> png, int max_index) {
  std::optional<Reader> r;
  try {
    r.emplace(png);
  } catch (const Error& e) {
    throw Error(ErrorCode::PaletteViolation, e.what());
  }
  if (png_get_color_type(r->png(), r->info()) != PNG_COLOR_TYPE_PALETTE ||
      png_get_bit_depth(r->png(), r->info()) != 8) {
    throw Error(ErrorCode::PaletteViolation, "segmentation must be an 8-bit palette PNG");
  }
  PaletteBytes out;
  out.width = static_cast<int>(png_get_image_width(r->png(), r->info()));
  out.height = static_cast<int>(png_get_image_height(r->png(), r->info()));
  try {
    out.indices = r->rows(out.height, static_cast<std::size_t>(out.width));
  } catch (const Error& e) {
    throw Error(ErrorCode::PaletteViolation, e.what());
  }
  for (auto v : out.indices) {
    if (v >= max_index) {
      throw Error(ErrorCode::PaletteViolation, "palette index " + std::to_string(v) + " is not a label");
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace fashion
