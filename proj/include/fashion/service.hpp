#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "fashion/training.hpp"

namespace fashion {

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws Format on characters outside the standard alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

inline constexpr std::size_t kMaxPayloadBytes = 8u << 20;
inline constexpr int kMaxCaptionChars = 200;
inline constexpr int kMaxInterpolationSteps = 64;

// One stored generation. Inputs are kept so that interpolation can rerun the
// pipeline on the same person.
struct GenerationRecord {
  std::string generation_id;
  std::string session_id;
  std::uint64_t sequence = 0;
  std::int64_t created_ms = 0;
  std::string caption;
  std::uint64_t seed = 0;
  std::string inputs_hash;  // FNV-1a of the two input PNGs, hex
  std::string image_png;    // base64 input photo
  std::string segmap_png;   // base64 input palette map
  std::string shape_map;    // base64 palette PNG
  std::string output;       // base64 PNG

  nlohmann::json to_json() const;
  static GenerationRecord from_json(const nlohmann::json& j);
};

// Append-only JSON-lines file. A torn final line (crash mid-write) is
// ignored on load.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path path);

  // Assigns generation id and sequence number, then appends one line.
  GenerationRecord append(GenerationRecord record);
  std::optional<GenerationRecord> find(std::string_view generation_id) const;
  // Creation order; nullopt for a session that was never written.
  std::optional<std::vector<GenerationRecord>> session(std::string_view session_id) const;
  bool has_session(std::string_view session_id) const;
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::vector<GenerationRecord> records_;
};

struct HttpResult {
  int status = 200;
  nlohmann::json body;
};

struct LoadedModels {
  StageModel shape;
  StageModel image;
};

// Request handlers over read-only models; transport lives in serve().
class Service {
 public:
  Service(std::optional<LoadedModels> models, std::filesystem::path store_path);

  // Loads shape.fgck and image.fgck; nullopt (and the reason in `why`) when
  // either is missing or unreadable.
  static std::optional<LoadedModels> load_models(const std::filesystem::path& dir, std::string* why = nullptr);

  bool ready() const noexcept { return models_.has_value(); }

  HttpResult generate(std::string_view body);
  HttpResult interpolate(std::string_view body);
  HttpResult history(std::string_view session_id) const;

  // Blocks until stop(). Body limit kMaxPayloadBytes (413 above).
  void serve(const std::string& host, int port);
  void wait_until_ready() const;
  void stop();

 private:
  std::optional<LoadedModels> models_;
  SessionStore store_;
  struct Server;
  std::shared_ptr<Server> server_;
};

}  // namespace fashion
