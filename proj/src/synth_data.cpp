#include "fashion/synth_data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "fashion/error.hpp"
#include "fashion/png_io.hpp"
#include "fashion/rng.hpp"
#include "fashion/text_encoder.hpp"

namespace fashion {
namespace {

using Rgb = std::array<std::uint8_t, 3>;

constexpr double kBodyScale = 0.9;
constexpr double kTop = 0.05;

// Vertical landmarks in body units.
constexpr double kHairTop = 0.0;
constexpr double kFaceTop = 0.04;
constexpr double kChin = 0.15;
constexpr double kShoulder = 0.20;
constexpr double kHip = 0.52;
constexpr double kFeet = 1.0;
constexpr double kHatTop = -0.04;
constexpr double kCrotch = 0.05;
constexpr double kLegGap = 0.03;
constexpr double kShortSleeve = 0.45;
constexpr double kShortsLength = 0.35;
constexpr double kSkirtLength = 0.30;

constexpr std::array<Rgb, kNumColors> kGarmentColors = {{
    {215, 40, 40}, {50, 170, 70}, {40, 80, 215}, {240, 210, 50}, {25, 25, 25}, {140, 50, 175},
}};
constexpr std::array<Rgb, 3> kHairColors = {{{30, 22, 18}, {105, 62, 30}, {215, 180, 105}}};
constexpr Rgb kBackgroundColor = {236, 236, 228};
constexpr Rgb kHatColor = {70, 80, 105};
constexpr Rgb kGlassesColor = {12, 12, 12};

Rgb skin_color(double tone) {
  const Rgb light = {245, 205, 175}, dark = {110, 70, 45};
  Rgb out;
  for (int k = 0; k < 3; ++k) out[k] = static_cast<std::uint8_t>(std::lround(light[k] + tone * (dark[k] - light[k])));
  return out;
}

bool in(double v, double lo, double hi) { return v >= lo && v < hi; }

double arm_height() { return kHip - kShoulder; }
double leg_height() { return kFeet - kHip; }

double sleeve_end(const DollSpec& s) {
  return s.garment.sleeve == Sleeve::kLong ? kHip : kShoulder + kShortSleeve * arm_height();
}

// Extent of garment covering the legs, measured from the hip.
double bottom_cover(const DollSpec& s) {
  switch (s.garment.bottom) {
    case Bottom::kPants: return leg_height();
    case Bottom::kShorts: return kShortsLength * leg_height();
    case Bottom::kSkirt: return kSkirtLength * leg_height();
  }
  return 0;
}

double skirt_half(const DollSpec& s, double t) {
  const double len = kSkirtLength * leg_height();
  const double top = kLegGap / 2 + s.leg_width + 0.01;
  const double bottom = kLegGap / 2 + s.leg_width + s.leg_spread * len / leg_height() + 0.03;
  return top + (bottom - top) * (t - kHip) / len;
}

struct Pixel {
  int label;
  Rgb color;
};

// Label and colour at body coordinates (s horizontal from the centre, t down
// from the top of the head).
Pixel classify(const DollSpec& d, double s, double t) {
  const Rgb skin = skin_color(d.skin_tone);
  const Rgb hair = kHairColors[d.hair_color];
  const Rgb top = kGarmentColors[d.garment.top_color];
  const Rgb bottom = kGarmentColors[d.garment.bottom_color];
  const double as = std::abs(s);

  if (d.hat) {
    if (in(t, kHatTop, kFaceTop) && as < 0.09) return {kHair, kHatColor};
  } else if (in(t, kHairTop, kFaceTop) && as < 0.07) {
    return {kHair, hair};
  }
  if (in(t, kFaceTop, kChin) && as < 0.065) {
    if (d.sunglasses && in(t, 0.075, 0.095) && as < 0.06) return {kFace, kGlassesColor};
    return {kFace, skin};
  }
  if (d.long_hair && in(t, kFaceTop, kShoulder) && as >= 0.065 && as < 0.09) return {kHair, hair};
  if (in(t, kChin, kShoulder) && as < 0.03) return {kFace, skin};
  if (in(t, kShoulder, kHip)) {
    if (as < d.torso_half) return {kUpperClothes, top};
    const double shift = d.arm_tilt * (t - kShoulder) / arm_height();
    const double inner = d.torso_half + shift;
    if (as >= inner && as < inner + d.arm_width) {
      return t < sleeve_end(d) ? Pixel{kUpperClothes, top} : Pixel{kArms, skin};
    }
    return {kBackground, kBackgroundColor};
  }
  if (in(t, kHip, kFeet)) {
    const double cover = bottom_cover(d);
    if (d.garment.bottom == Bottom::kSkirt) {
      if (t < kHip + cover && as < skirt_half(d, t)) return {kPantsShorts, bottom};
    } else if (t < kHip + kCrotch && as < kLegGap / 2) {
      return {kPantsShorts, bottom};
    }
    const double shift = d.leg_spread * (t - kHip) / leg_height();
    const double inner = kLegGap / 2 + shift;
    if (as >= inner && as < inner + d.leg_width) {
      return t < kHip + cover ? Pixel{kPantsShorts, bottom} : Pixel{kLegs, skin};
    }
  }
  return {kBackground, kBackgroundColor};
}

void check_range(double v, double lo, double hi, const char* name) {
  if (!(v >= lo && v <= hi)) {
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " outside [" + std::to_string(lo) + ", " +
                                                std::to_string(hi) + "]");
  }
}

std::string record_name(const char* prefix, const std::string& id) { return std::string(prefix) + id + ".png"; }

}  // namespace

const std::array<std::string_view, kNumColors>& color_names() {
  static const std::array<std::string_view, kNumColors> names = {"red", "green", "blue", "yellow", "black", "purple"};
  return names;
}

DollSpec DollSpec::sample(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  auto pick = [&](int n) { return std::min(n - 1, static_cast<int>(u(rng) * n)); };
  DollSpec d;
  d.seed = seed;
  d.female = u(rng) < 0.5;
  d.long_hair = u(rng) < (d.female ? 0.7 : 0.15);
  d.sunglasses = u(rng) < 0.2;
  d.hat = u(rng) < 0.2;
  d.garment.sleeve = u(rng) < 0.5 ? Sleeve::kShort : Sleeve::kLong;
  d.garment.bottom = d.female ? static_cast<Bottom>(pick(3)) : (u(rng) < 0.5 ? Bottom::kShorts : Bottom::kPants);
  d.garment.top_color = pick(kNumColors);
  d.garment.bottom_color = pick(kNumColors);
  d.center_x = uniform(0.45, 0.55);
  d.torso_half = uniform(0.11, 0.15);
  d.arm_width = uniform(0.075, 0.095);
  d.arm_tilt = uniform(0.0, 0.08);
  d.leg_width = uniform(0.09, 0.11);
  d.leg_spread = uniform(0.0, 0.06);
  d.skin_tone = u(rng);
  d.hair_color = pick(3);
  return d;
}

void DollSpec::validate() const {
  check_range(center_x, 0.45, 0.55, "center_x");
  check_range(torso_half, 0.11, 0.15, "torso_half");
  check_range(arm_width, 0.075, 0.095, "arm_width");
  check_range(arm_tilt, 0.0, 0.08, "arm_tilt");
  check_range(leg_width, 0.09, 0.11, "leg_width");
  check_range(leg_spread, 0.0, 0.06, "leg_spread");
  check_range(skin_tone, 0.0, 1.0, "skin_tone");
  if (hair_color < 0 || hair_color >= 3) throw Error(ErrorCode::InvalidArgument, "hair_color outside [0, 3)");
  if (garment.top_color < 0 || garment.top_color >= kNumColors || garment.bottom_color < 0 ||
      garment.bottom_color >= kNumColors) {
    throw Error(ErrorCode::InvalidArgument, "garment colour outside the palette");
  }
  if (garment.bottom == Bottom::kSkirt && !female) throw Error(ErrorCode::InvalidArgument, "skirts are female only");
}

std::string doll_caption(const DollSpec& spec) {
  static constexpr std::array<std::string_view, 3> bottoms = {"shorts", "pants", "skirt"};
  std::ostringstream os;
  os << "a " << (spec.female ? "lady" : "man") << " in a " << color_names()[spec.garment.top_color]
     << " top with " << (spec.garment.sleeve == Sleeve::kLong ? "long" : "short") << " sleeves and "
     << color_names()[spec.garment.bottom_color] << ' ' << bottoms[static_cast<int>(spec.garment.bottom)];
  return os.str();
}

std::optional<ParsedCaption> parse_doll_caption(std::string_view caption) {
  const auto w = split_words(caption);
  if (w.size() != 12 || w[0] != "a" || w[2] != "in" || w[3] != "a" || w[5] != "top" || w[6] != "with" ||
      w[8] != "sleeves" || w[9] != "and") {
    return std::nullopt;
  }
  auto color = [](const std::string& s) -> int {
    const auto& n = color_names();
    auto it = std::find(n.begin(), n.end(), s);
    return it == n.end() ? -1 : static_cast<int>(it - n.begin());
  };
  ParsedCaption p;
  if (w[1] == "lady") p.female = true;
  else if (w[1] != "man") return std::nullopt;
  p.garment.top_color = color(w[4]);
  p.garment.bottom_color = color(w[10]);
  if (p.garment.top_color < 0 || p.garment.bottom_color < 0) return std::nullopt;
  if (w[7] == "long") p.garment.sleeve = Sleeve::kLong;
  else if (w[7] == "short") p.garment.sleeve = Sleeve::kShort;
  else return std::nullopt;
  if (w[11] == "shorts") p.garment.bottom = Bottom::kShorts;
  else if (w[11] == "pants") p.garment.bottom = Bottom::kPants;
  else if (w[11] == "skirt") p.garment.bottom = Bottom::kSkirt;
  else return std::nullopt;
  return p;
}

StructureLabels structure_labels(const GarmentSpec& g) {
  return {g.sleeve == Sleeve::kLong, g.sleeve == Sleeve::kShort, g.bottom == Bottom::kPants,
          g.bottom == Bottom::kShorts, g.bottom == Bottom::kSkirt};
}

const std::array<std::string_view, kNumStructureAttributes>& structure_attribute_names() {
  static const std::array<std::string_view, kNumStructureAttributes> names = {
      "long_sleeves", "short_sleeves", "pants", "shorts", "skirt"};
  return names;
}

PersonRecord render_doll(const DollSpec& spec, int resolution, const std::string& id) {
  spec.validate();
  if (resolution < 8) throw Error(ErrorCode::TooSmall, "resolution must be at least 8");
  LabelGrid labels{resolution, resolution, std::vector<int>(static_cast<std::size_t>(resolution) * resolution)};
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(resolution) * resolution * 3);
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const double u = (x + 0.5) / resolution, v = (y + 0.5) / resolution;
      const Pixel p = classify(spec, (u - spec.center_x) / kBodyScale, (v - kTop) / kBodyScale);
      labels(y, x) = p.label;
      std::copy(p.color.begin(), p.color.end(), rgb.begin() + (static_cast<std::size_t>(y) * resolution + x) * 3);
    }
  }
  PersonRecord r;
  r.id = id;
  r.image = ImageRGB::from_bytes(resolution, resolution, rgb);
  r.segmap = segmap_from_labels(labels);
  r.caption = doll_caption(spec);
  r.attributes = {spec.female, spec.long_hair, spec.sunglasses, spec.hat};
  r.structure = structure_labels(spec.garment);
  return r;
}

std::array<double, kNumLabels> doll_label_areas(const DollSpec& d, int resolution) {
  std::array<double, kNumLabels> a{};
  a[kHair] = d.hat ? 0.18 * (kFaceTop - kHatTop) : 0.14 * (kFaceTop - kHairTop);
  if (d.long_hair) a[kHair] += 2 * 0.025 * (kShoulder - kFaceTop);
  a[kFace] = 0.13 * (kChin - kFaceTop) + 0.06 * (kShoulder - kChin);
  const double sleeve = sleeve_end(d) - kShoulder;
  a[kUpperClothes] = 2 * d.torso_half * arm_height() + 2 * d.arm_width * sleeve;
  a[kArms] = 2 * d.arm_width * (arm_height() - sleeve);
  const double cover = bottom_cover(d);
  if (d.garment.bottom == Bottom::kSkirt) {
    a[kPantsShorts] = (skirt_half(d, kHip) + skirt_half(d, kHip + cover)) * cover;
  } else {
    a[kPantsShorts] = 2 * d.leg_width * cover + kLegGap * kCrotch;
  }
  a[kLegs] = 2 * d.leg_width * (leg_height() - cover);
  const double px = kBodyScale * resolution;
  double body = 0;
  for (int l = 1; l < kNumLabels; ++l) {
    a[l] *= px * px;
    body += a[l];
  }
  a[kBackground] = static_cast<double>(resolution) * resolution - body;
  return a;
}

std::vector<PersonRecord> generate_records(int count, std::uint64_t seed, int resolution) {
  if (count < 0) throw Error(ErrorCode::InvalidArgument, "count must be non-negative");
  std::vector<PersonRecord> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "%05d", i);
    out.push_back(render_doll(DollSpec::sample(derive_seed(seed, static_cast<std::uint64_t>(i))), resolution, id));
  }
  return out;
}

std::vector<std::uint8_t> image_png(const ImageRGB& image) {
  return encode_png_rgb({image.height(), image.width(), image.to_bytes()});
}

std::vector<std::uint8_t> segmap_png(const SegMap& map) {
  const LabelGrid labels = argmax_labels(map);
  PaletteBytes p{labels.height, labels.width, {}};
  p.indices.assign(labels.labels.begin(), labels.labels.end());
  return encode_png_palette(p);
}

ImageRGB image_from_png(std::span<const std::uint8_t> png) {
  const RgbBytes rgb = decode_png_rgb(png);
  return ImageRGB::from_bytes(rgb.height, rgb.width, rgb.rgb);
}

SegMap segmap_from_png(std::span<const std::uint8_t> png) {
  const PaletteBytes p = decode_png_palette(png, kNumLabels);
  LabelGrid labels{p.height, p.width, std::vector<int>(p.indices.begin(), p.indices.end())};
  return segmap_from_labels(labels);
}

PersonRecord make_person(ImageRGB image, SegMap segmap, std::string caption,
                         std::optional<PersonAttributes> attributes) {
  PersonRecord r;
  r.id = "input";
  r.image = std::move(image);
  r.segmap = std::move(segmap);
  r.caption = std::move(caption);
  if (attributes) {
    r.attributes = *attributes;
  } else if (const auto parsed = parse_doll_caption(r.caption)) {
    r.attributes.gender = parsed->female;
  }
  if (r.image.height() != r.segmap.height() || r.image.width() != r.segmap.width()) {
    throw Error(ErrorCode::ShapeMismatch, "photo and segmentation sizes differ");
  }
  return r;
}

ImageRGB load_image(const std::filesystem::path& path) {
  try {
    return image_from_png(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

SegMap load_segmap(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::MissingSegmentation, "missing segmentation " + path.string());
  }
  try {
    return segmap_from_png(read_file(path));
  } catch (const Error& e) {
    throw Error(ErrorCode::PaletteViolation, path.string() + ": " + e.what());
  }
}

void write_dataset(std::span<const PersonRecord> records, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream captions(dir / "captions.jsonl", std::ios::binary | std::ios::trunc);
  if (!captions) throw Error(ErrorCode::Io, "cannot write " + (dir / "captions.jsonl").string());
  for (const auto& r : records) {
    write_file(dir / record_name("img_", r.id), image_png(r.image));
    write_file(dir / record_name("seg_", r.id), segmap_png(r.segmap));
    nlohmann::ordered_json line;
    line["id"] = r.id;
    line["caption"] = r.caption;
    line["attributes"] = {{"gender", r.attributes.gender ? "female" : "male"},
                          {"long_hair", r.attributes.long_hair},
                          {"sunglasses", r.attributes.sunglasses},
                          {"hat", r.attributes.hat}};
    if (r.structure) line["structure"] = *r.structure;
    captions << line.dump() << '\n';
  }
  std::ofstream version(dir / "DATASET_VERSION", std::ios::binary | std::ios::trunc);
  version << kDatasetVersion << '\n';
}

std::vector<PersonRecord> generate_dataset(int count, std::uint64_t seed, const std::filesystem::path& dir,
                                           int resolution) {
  auto records = generate_records(count, seed, resolution);
  write_dataset(records, dir);
  return records;
}

std::vector<PersonRecord> load_dataset(const std::filesystem::path& dir) {
  const auto version_path = dir / "DATASET_VERSION";
  if (std::filesystem::exists(version_path)) {
    std::ifstream v(version_path);
    std::string text;
    std::getline(v, text);
    if (text != kDatasetVersion) {
      throw Error(ErrorCode::Format, version_path.string() + ": unsupported dataset version '" + text + "'");
    }
  }
  const auto captions_path = dir / "captions.jsonl";
  std::ifstream in(captions_path);
  if (!in) throw Error(ErrorCode::CaptionMissing, "missing " + captions_path.string());

  std::vector<PersonRecord> out;
  std::set<std::string> ids;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = captions_path.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Format, where + ": " + e.what());
    }
    PersonRecord r;
    r.id = j.value("id", std::string());
    if (r.id.empty()) throw Error(ErrorCode::Format, where + ": record without id");
    r.caption = j.value("caption", std::string());
    if (r.caption.empty()) {
      throw Error(ErrorCode::CaptionMissing, where + ": no caption for " + record_name("img_", r.id));
    }
    if (j.contains("attributes")) {
      const auto& a = j["attributes"];
      const auto g = a.value("gender", std::string("male"));
      if (g != "female" && g != "male") throw Error(ErrorCode::Format, where + ": gender must be female or male");
      r.attributes = {g == "female", a.value("long_hair", false), a.value("sunglasses", false), a.value("hat", false)};
    }
    if (j.contains("structure")) r.structure = j["structure"].get<StructureLabels>();
    r.image = load_image(dir / record_name("img_", r.id));
    r.segmap = load_segmap(dir / record_name("seg_", r.id));
    try {
      r.validate();
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
    ids.insert(r.id);
    out.push_back(std::move(r));
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("img_") && name.ends_with(".png")) {
      const auto id = name.substr(4, name.size() - 8);
      if (!ids.contains(id)) throw Error(ErrorCode::CaptionMissing, "no caption for " + entry.path().string());
    }
  }
  return out;
}

}  // namespace fashion
