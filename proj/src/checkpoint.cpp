#include "fashion/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fashion/error.hpp"

namespace fashion {
namespace {

constexpr char kMagic[4] = {'F', 'G', 'C', 'K'};

template <typename U>
void put(std::ostream& os, U v) {
  static_assert(std::endian::native == std::endian::little);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename U>
U get(std::istream& is) {
  U v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(ErrorCode::Format, "truncated checkpoint");
  return v;
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  nlohmann::json manifest = checkpoint.manifest;
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, a] : checkpoint.arrays) {
    index.push_back({{"name", name}, {"shape", a.shape}, {"offset", offset}, {"count", a.data.size()}});
    offset += a.data.size();
  }
  manifest["arrays"] = index;
  const std::string text = manifest.dump(1);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, a] : checkpoint.arrays) {
      os.write(reinterpret_cast<const char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * 4));
    }
    if (!os) throw Error(ErrorCode::Io, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingCheckpoint, "no checkpoint at " + path.string());
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::Format, path.string() + " is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::Format, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = get<std::uint64_t>(is);
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw Error(ErrorCode::Format, "truncated manifest");

  Checkpoint ck;
  try {
    ck.manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("bad manifest: ") + e.what());
  }
  const auto index = ck.manifest.at("arrays");
  ck.manifest.erase("arrays");
  const auto base = is.tellg();
  for (const auto& entry : index) {
    NamedArray a;
    a.shape = entry.at("shape").get<std::vector<int>>();
    a.data.resize(entry.at("count").get<std::size_t>());
    is.seekg(base + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>() * 4));
    if (!is.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * 4))) {
      throw Error(ErrorCode::Format, "truncated array " + entry.at("name").get<std::string>());
    }
    ck.arrays.emplace(entry.at("name").get<std::string>(), std::move(a));
  }
  return ck;
}

}  // namespace fashion
