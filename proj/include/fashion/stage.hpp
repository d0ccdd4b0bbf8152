#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "fashion/networks.hpp"
#include "fashion/text_encoder.hpp"

namespace fashion {

enum class StageKind { kShape, kImage, kOneStep87, kOneStep84, kNonComp };

std::string_view stage_name(StageKind kind);
// Accepts shape | image | one-step-8-7 | one-step-8-4 | non-comp.
StageKind parse_stage(std::string_view name);

GeneratorLayout generator_layout(StageKind kind, const ArchConfig& arch);
DiscriminatorLayout discriminator_layout(StageKind kind, const ArchConfig& arch);

// Generator, discriminator and the stage's own text encoder.
template <typename T>
class StageNetworks {
 public:
  StageNetworks(StageKind kind, const ArchConfig& arch, int vocab_size, std::uint64_t seed)
      : kind_(kind), arch_(arch),
        generator_(make_generator(kind, arch, seed)),
        discriminator_(make_discriminator(kind, arch, seed)),
        text_(make_text(vocab_size, seed)) {}

  StageKind kind() const noexcept { return kind_; }
  const ArchConfig& arch() const noexcept { return arch_; }

  ConditionalGenerator<T>& generator() noexcept { return generator_; }
  const ConditionalGenerator<T>& generator() const noexcept { return generator_; }
  ConditionalDiscriminator<T>& discriminator() noexcept { return discriminator_; }
  const ConditionalDiscriminator<T>& discriminator() const noexcept { return discriminator_; }
  TextEncoder<T>& text() noexcept { return text_; }
  const TextEncoder<T>& text() const noexcept { return text_; }

  nn::ParameterList<T> generator_parameters() {
    nn::ParameterList<T> out;
    generator_.collect(out, "generator.");
    return out;
  }
  nn::ParameterList<T> discriminator_parameters() {
    nn::ParameterList<T> out;
    discriminator_.collect(out, "discriminator.");
    return out;
  }
  nn::ParameterList<T> text_parameters() {
    nn::ParameterList<T> out;
    text_.collect(out, "text_encoder.");
    return out;
  }
  nn::ParameterList<T> all_parameters() {
    auto out = generator_parameters();
    for (auto& p : discriminator_parameters()) out.push_back(p);
    for (auto& p : text_parameters()) out.push_back(p);
    return out;
  }

 private:
  static ConditionalGenerator<T> make_generator(StageKind kind, const ArchConfig& arch, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 1));
    return ConditionalGenerator<T>(generator_layout(kind, arch), rng);
  }
  static ConditionalDiscriminator<T> make_discriminator(StageKind kind, const ArchConfig& arch, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 2));
    return ConditionalDiscriminator<T>(discriminator_layout(kind, arch), rng);
  }
  static TextEncoder<T> make_text(int vocab_size, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 3));
    TextEncoderConfig cfg;
    cfg.vocab_size = vocab_size;
    return TextEncoder<T>(cfg, rng);
  }

  StageKind kind_;
  ArchConfig arch_;
  ConditionalGenerator<T> generator_;
  ConditionalDiscriminator<T> discriminator_;
  TextEncoder<T> text_;
};

}  // namespace fashion
