#pragma once

#include <cstdint>
#include <filesystem>
#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "fashion/error.hpp"
#include "fashion/nn/layers.hpp"

namespace fashion {

// Named float32 array with its logical shape.
struct NamedArray {
  std::vector<int> shape;
  std::vector<float> data;
  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

// Single-file container: "FGCK", format version, JSON manifest, raw arrays.
// The manifest is free-form metadata (stage, epoch, config hash, loss
// history, vocabulary, ...); the loader adds nothing to it.
struct Checkpoint {
  nlohmann::json manifest = nlohmann::json::object();
  std::map<std::string, NamedArray> arrays;

  std::string stage() const { return manifest.value("stage", std::string()); }
  int epoch() const { return manifest.value("epoch", 0); }

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
// Throws MissingCheckpoint when the file does not exist, Format when it is
// not a readable container.
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
void store_parameters(Checkpoint& ck, const nn::ParameterList<T>& params) {
  for (const auto& p : params) {
    const auto& v = p.param->value;
    NamedArray a;
    a.shape.assign(v.shape().begin(), v.shape().end());
    a.data.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) a.data[i] = static_cast<float>(v[i]);
    ck.arrays[p.name] = std::move(a);
  }
}

// Copies every listed parameter out of the checkpoint; Format if one is
// absent or has another shape.
template <typename T>
void restore_parameters(const Checkpoint& ck, const nn::ParameterList<T>& params) {
  for (const auto& p : params) {
    auto it = ck.arrays.find(p.name);
    auto& v = p.param->value;
    if (it == ck.arrays.end()) throw Error(ErrorCode::Format, "checkpoint lacks array " + p.name);
    if (!std::equal(v.shape().begin(), v.shape().end(), it->second.shape.begin(), it->second.shape.end())) {
      throw Error(ErrorCode::Format, "checkpoint array " + p.name + " has the wrong shape");
    }
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(it->second.data[i]);
  }
}

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace fashion
