#pragma once

#include <array>
#include <bit>
#include <string>

#include "fashion/core_types.hpp"
#include "fashion/error.hpp"
#include "fashion/nn/layers.hpp"

namespace fashion {

inline constexpr int kNetworkLayers = 6;

// Sizes shared by every network of a run.
struct ArchConfig {
  int resolution = 32;
  int gen_width = 8;   // decoder widths are gen_width * {8, 8, 4, 2, 1, 1}
  int disc_width = 16; // discriminator widths are disc_width * {1, 2, 4, 4, 4}

  void validate() const {
    if (resolution != 32 && resolution != 64 && resolution != 128) {
      throw Error(ErrorCode::InvalidArgument, "resolution must be 32, 64 or 128");
    }
    if (gen_width < 1 || disc_width < 1) throw Error(ErrorCode::InvalidArgument, "widths must be positive");
  }
  // Number of stride-2 layers needed to go between 8 x 8 and the resolution.
  int upsampling_layers() const { return std::countr_zero(static_cast<unsigned>(resolution / kConstraintSize)); }
};

enum class HeadActivation { kSoftmax, kTanh };

struct GeneratorLayout {
  ArchConfig arch;
  int cond_channels = kNumMergedLabels;
  int cond_resolution = kConstraintSize;
  int head_channels = kNumLabels;
  HeadActivation head = HeadActivation::kSoftmax;
};

// Conditional decoder used by every generator in the project:
//   cond (cond_channels @ cond_resolution) -> conv encoder -> 4w @ 8x8
//   (z || d) -> linear -> 4w @ 8x8
//   concat (8w @ 8x8) -> 6 (de)convolution layers -> head activation.
// The stride-2 layers sit immediately before the head.
template <typename T>
class ConditionalGenerator {
 public:
  ConditionalGenerator(const GeneratorLayout& layout, Rng& rng) : layout_(layout) {
    layout.arch.validate();
    const int w = layout.arch.gen_width;
    build_condition_encoder(rng);
    proj_linear_.template add<nn::Linear<T>>(kNoiseDim + kDesignDim, 4 * w * kConstraintSize * kConstraintSize, rng);
    proj_post_.template add<nn::BatchNorm<T>>(4 * w, rng);
    proj_post_.template add<nn::ReLU<T>>();

    const std::array<int, kNetworkLayers + 1> widths = {8 * w, 8 * w, 4 * w, 2 * w, w, w, layout.head_channels};
    const int ups = layout.arch.upsampling_layers();
    for (int i = 0; i < kNetworkLayers; ++i) {
      const bool up = i >= kNetworkLayers - 1 - ups && i < kNetworkLayers - 1;
      auto& conv = decoder_.template add<nn::ConvTranspose2d<T>>(widths[i], widths[i + 1], up ? 4 : 3, up ? 2 : 1, 1, rng);
      if (i == kNetworkLayers - 1) {
        head_ = &conv;
      } else {
        decoder_.template add<nn::BatchNorm<T>>(widths[i + 1], rng);
        decoder_.template add<nn::ReLU<T>>();
      }
    }
    if (layout.head == HeadActivation::kSoftmax) {
      decoder_.template add<nn::ChannelSoftmax<T>>();
    } else {
      decoder_.template add<nn::Tanh<T>>();
    }
  }

  const GeneratorLayout& layout() const noexcept { return layout_; }

  // z {100, N}, d {50, N}, cond {cond_channels, N, r, r} -> {head, N, R, R}.
  nn::Tensor<T> forward(const nn::Tensor<T>& z, const nn::Tensor<T>& d, const nn::Tensor<T>& cond, bool train) {
    check(z, d, cond);
    nn::Tensor<T> enc = cond_encoder_.forward(cond, train);
    nn::Tensor<T> proj = proj_linear_.forward(nn::concat_channels(z, d), train);
    const int c = 4 * layout_.arch.gen_width;
    proj = proj_post_.forward(nn::dense_to_map(proj, c, kConstraintSize, kConstraintSize), train);
    return decoder_.forward(nn::concat_channels(enc, proj), train);
  }

  nn::Tensor<T> infer(const nn::Tensor<T>& z, const nn::Tensor<T>& d, const nn::Tensor<T>& cond) const {
    check(z, d, cond);
    nn::Tensor<T> enc = cond_encoder_.infer(cond);
    nn::Tensor<T> proj = proj_linear_.infer(nn::concat_channels(z, d));
    const int c = 4 * layout_.arch.gen_width;
    proj = proj_post_.infer(nn::dense_to_map(proj, c, kConstraintSize, kConstraintSize));
    return decoder_.infer(nn::concat_channels(enc, proj));
  }

  struct InputGrads {
    nn::Tensor<T> z, d, cond;
  };

  InputGrads backward(const nn::Tensor<T>& grad) {
    const int c = 4 * layout_.arch.gen_width;
    nn::Tensor<T> g = decoder_.backward(grad);
    nn::Tensor<T> g_enc = nn::slice_channels(g, 0, c);
    nn::Tensor<T> g_proj = proj_post_.backward(nn::slice_channels(g, c, c));
    nn::Tensor<T> g_zd = proj_linear_.backward(nn::map_to_dense(g_proj));
    InputGrads out;
    out.z = nn::slice_channels(g_zd, 0, kNoiseDim);
    out.d = nn::slice_channels(g_zd, kNoiseDim, kDesignDim);
    out.cond = cond_encoder_.backward(g_enc);
    return out;
  }

  void collect(nn::ParameterList<T>& out, const std::string& prefix) {
    cond_encoder_.collect(out, prefix + "cond_encoder.");
    proj_linear_.collect(out, prefix + "projection.");
    proj_post_.collect(out, prefix + "projection_bn.");
    decoder_.collect(out, prefix + "decoder.");
  }

  // Zeroes the final layer so that the head sees all-zero pre-activations.
  void zero_head() { head_->zero(); }

  void begin_bn_accumulation() {
    nn::begin_bn_accumulation(cond_encoder_);
    nn::begin_bn_accumulation(proj_post_);
    nn::begin_bn_accumulation(decoder_);
  }
  void end_bn_accumulation() {
    nn::end_bn_accumulation(cond_encoder_);
    nn::end_bn_accumulation(proj_post_);
    nn::end_bn_accumulation(decoder_);
  }

 private:
  void build_condition_encoder(Rng& rng) {
    const int w = layout_.arch.gen_width;
    const int cin = layout_.cond_channels;
    if (layout_.cond_resolution == kConstraintSize) {
      cond_encoder_.template add<nn::Conv2d<T>>(cin, 2 * w, 3, 1, 1, rng);
      cond_encoder_.template add<nn::ReLU<T>>(T(0.2));
      cond_encoder_.template add<nn::Conv2d<T>>(2 * w, 4 * w, 3, 1, 1, rng);
      cond_encoder_.template add<nn::BatchNorm<T>>(4 * w, rng);
      cond_encoder_.template add<nn::ReLU<T>>(T(0.2));
      return;
    }
    const int downs = std::countr_zero(static_cast<unsigned>(layout_.cond_resolution / kConstraintSize));
    int in = cin;
    for (int i = 0; i < downs; ++i) {
      const int out = std::max(w, (4 * w) >> (downs - 1 - i));
      cond_encoder_.template add<nn::Conv2d<T>>(in, out, 4, 2, 1, rng);
      if (i > 0) cond_encoder_.template add<nn::BatchNorm<T>>(out, rng);
      cond_encoder_.template add<nn::ReLU<T>>(T(0.2));
      in = out;
    }
  }

  void check(const nn::Tensor<T>& z, const nn::Tensor<T>& d, const nn::Tensor<T>& cond) const {
    if (z.channels() != kNoiseDim || d.channels() != kDesignDim || cond.channels() != layout_.cond_channels ||
        cond.height() != layout_.cond_resolution || z.batch() != d.batch() || z.batch() != cond.batch()) {
      throw Error(ErrorCode::ShapeMismatch, "generator inputs do not match its layout");
    }
  }

  GeneratorLayout layout_;
  nn::Sequential<T> cond_encoder_, proj_linear_, proj_post_, decoder_;
  nn::ConvTranspose2d<T>* head_ = nullptr;
};

struct DiscriminatorLayout {
  ArchConfig arch;
  int in_channels = kNumLabels + kNumMergedLabels;
};

// Six convolution layers; the design coding is tiled and concatenated onto
// the 8 x 8 feature map before the fifth layer. Emits one logit per sample.
template <typename T>
class ConditionalDiscriminator {
 public:
  ConditionalDiscriminator(const DiscriminatorLayout& layout, Rng& rng) : layout_(layout) {
    layout.arch.validate();
    const int w = layout.arch.disc_width;
    const int downs = layout.arch.upsampling_layers();
    const std::array<int, 4> widths = {w, 2 * w, 4 * w, 4 * w};
    int in = layout.in_channels;
    for (int i = 0; i < 4; ++i) {
      const bool down = i < downs;
      pre_.template add<nn::Conv2d<T>>(in, widths[i], down ? 4 : 3, down ? 2 : 1, 1, rng);
      if (i > 0) pre_.template add<nn::BatchNorm<T>>(widths[i], rng);
      pre_.template add<nn::ReLU<T>>(T(0.2));
      in = widths[i];
    }
    post_.template add<nn::Conv2d<T>>(in + kDesignDim, 4 * w, 4, 2, 1, rng);
    post_.template add<nn::BatchNorm<T>>(4 * w, rng);
    post_.template add<nn::ReLU<T>>(T(0.2));
    head_ = &post_.template add<nn::Conv2d<T>>(4 * w, 1, 4, 1, 0, rng);
  }

  const DiscriminatorLayout& layout() const noexcept { return layout_; }

  // x {in_channels, N, R, R}, d {50, N} -> logits {1, N, 1, 1}.
  nn::Tensor<T> forward(const nn::Tensor<T>& x, const nn::Tensor<T>& d, bool train) {
    check(x, d);
    nn::Tensor<T> h = pre_.forward(x, train);
    feat_channels_ = h.channels();
    return post_.forward(nn::concat_channels(h, nn::tile_spatial(d, h.height(), h.width())), train);
  }

  nn::Tensor<T> infer(const nn::Tensor<T>& x, const nn::Tensor<T>& d) const {
    check(x, d);
    nn::Tensor<T> h = pre_.infer(x);
    return post_.infer(nn::concat_channels(h, nn::tile_spatial(d, h.height(), h.width())));
  }

  struct InputGrads {
    nn::Tensor<T> x, d;
  };

  InputGrads backward(const nn::Tensor<T>& grad) {
    nn::Tensor<T> g = post_.backward(grad);
    InputGrads out;
    out.d = nn::sum_spatial(nn::slice_channels(g, feat_channels_, kDesignDim));
    out.x = pre_.backward(nn::slice_channels(g, 0, feat_channels_));
    return out;
  }

  void collect(nn::ParameterList<T>& out, const std::string& prefix) {
    pre_.collect(out, prefix + "features.");
    post_.collect(out, prefix + "conditioned.");
  }

  void zero_head() { head_->zero(); }

  void begin_bn_accumulation() {
    nn::begin_bn_accumulation(pre_);
    nn::begin_bn_accumulation(post_);
  }
  void end_bn_accumulation() {
    nn::end_bn_accumulation(pre_);
    nn::end_bn_accumulation(post_);
  }

 private:
  void check(const nn::Tensor<T>& x, const nn::Tensor<T>& d) const {
    if (x.channels() != layout_.in_channels || x.height() != layout_.arch.resolution ||
        x.width() != layout_.arch.resolution || d.channels() != kDesignDim || d.batch() != x.batch()) {
      throw Error(ErrorCode::ShapeMismatch, "discriminator inputs do not match its layout");
    }
  }

  DiscriminatorLayout layout_;
  nn::Sequential<T> pre_, post_;
  nn::Conv2d<T>* head_ = nullptr;
  int feat_channels_ = 0;
};

template <typename T>
std::size_t count_parameters(const nn::ParameterList<T>& params, bool trainable_only = true) {
  std::size_t n = 0;
  for (const auto& p : params) {
    if (!trainable_only || p.param->trainable) n += p.param->value.size();
  }
  return n;
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace fashion
