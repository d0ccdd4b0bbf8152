#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fashion/core_types.hpp"
#include "fashion/nn/layers.hpp"

namespace fashion {

inline constexpr int kMaxTokens = 24;

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();
  // PAD, UNK, then every distinct word of the captions in sorted order.
  static Vocabulary build(std::span<const std::string> captions);
  // Throws Format unless tokens start with PAD and UNK.
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  // Plain text, one token per line; line number is the index.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  int index(std::string_view token) const;
  int size() const noexcept { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  explicit Vocabulary(std::vector<std::string> tokens);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> lookup_;
};

// Lowercased, punctuation-stripped, whitespace-split words.
std::vector<std::string> split_words(std::string_view caption);

struct TokenSequence {
  std::array<int, kMaxTokens> ids{};  // PAD-filled after `length`
  int length = 0;
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Throws EmptyCaption when no word survives normalization.
TokenSequence tokenize(std::string_view caption, const Vocabulary& vocab);

struct TextEncoderConfig {
  int vocab_size = 2;
  int embed_dim = 64;
  int hidden_dim = 64;
  int out_dim = kTextDim;
};

// Word embeddings -> one GRU layer -> linear projection of the final state.
// The recurrence only runs over the first `length` tokens of each sequence.
template <typename T>
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(const TextEncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
    const int e = cfg.embed_dim, h = cfg.hidden_dim;
    embedding_ = nn::Parameter<T>(nn::uniform_tensor<T>(cfg.vocab_size, e, 0.5, rng));
    const double gb = 1.0 / std::sqrt(static_cast<double>(h));
    w_input_ = nn::Parameter<T>(nn::uniform_tensor<T>(3 * h, e, gb, rng));
    w_hidden_ = nn::Parameter<T>(nn::uniform_tensor<T>(3 * h, h, gb, rng));
    bias_ = nn::Parameter<T>(nn::uniform_tensor<T>(3 * h, 1, gb, rng));
    const double pb = std::sqrt(6.0 / static_cast<double>(h + cfg.out_dim));
    w_out_ = nn::Parameter<T>(nn::uniform_tensor<T>(cfg.out_dim, h, pb, rng));
    b_out_ = nn::Parameter<T>(nn::Tensor<T>(cfg.out_dim, 1));
  }

  const TextEncoderConfig& config() const noexcept { return cfg_; }

  // Returns {out_dim, batch}; caches what backward() needs.
  nn::Tensor<T> forward(std::span<const TokenSequence> batch) {
    batch_.assign(batch.begin(), batch.end());
    return encode(batch, &cache_, &final_state_);
  }

  nn::Tensor<T> infer(std::span<const TokenSequence> batch) const { return encode(batch, nullptr, nullptr); }

  // Accumulates parameter gradients for d(loss)/d(output) = grad.
  void backward(const nn::Tensor<T>& grad) {
    using Mat = nn::RowMatrix<T>;
    const int n = static_cast<int>(batch_.size()), h = cfg_.hidden_dim;
    const int steps = static_cast<int>(cache_.size());
    auto g = nn::as_matrix(grad);
    nn::as_matrix(w_out_.grad).noalias() += g * final_state_.transpose();
    for (int r = 0; r < cfg_.out_dim; ++r) b_out_.grad[r] += g.row(r).sum();
    Mat dh = nn::as_matrix(w_out_.value).transpose() * g;
    auto wx = nn::as_matrix(w_input_.value);
    auto wh = nn::as_matrix(w_hidden_.value);
    auto dwx = nn::as_matrix(w_input_.grad);
    auto dwh = nn::as_matrix(w_hidden_.grad);
    auto demb = nn::as_matrix(embedding_.grad);
    for (int t = steps - 1; t >= 0; --t) {
      const Step& st = cache_[t];
      Mat mask = Mat::Zero(1, n);
      for (int j = 0; j < n; ++j) mask(0, j) = st.active[j] ? T(1) : T(0);
      Mat dha = dh.array().rowwise() * mask.row(0).array();  // active part
      Mat dc = (dha.array() * st.u.array()).matrix();
      Mat du = (dha.array() * (st.c - st.h_prev).array()).matrix();
      Mat dpre_c = (dc.array() * (T(1) - st.c.array().square())).matrix();
      Mat dr = (dpre_c.array() * st.hh.bottomRows(h).array()).matrix();
      Mat dpre_r = (dr.array() * st.r.array() * (T(1) - st.r.array())).matrix();
      Mat dpre_u = (du.array() * st.u.array() * (T(1) - st.u.array())).matrix();
      Mat da(3 * h, n), dhh(3 * h, n);
      da << dpre_r, dpre_u, dpre_c;
      dhh << dpre_r, dpre_u, (dpre_c.array() * st.r.array()).matrix();
      dwx.noalias() += da * st.x.transpose();
      dwh.noalias() += dhh * st.h_prev.transpose();
      for (int r = 0; r < 3 * h; ++r) bias_.grad[r] += da.row(r).sum();
      Mat dx = wx.transpose() * da;
      for (int j = 0; j < n; ++j) {
        if (st.active[j]) demb.row(batch_[j].ids[t]) += dx.col(j).transpose();
      }
      // Inactive columns pass dh through unchanged.
      Mat carried = (dh.array().rowwise() * (T(1) - mask.row(0).array())).matrix();
      dh = carried + (dha.array() * (T(1) - st.u.array())).matrix() + wh.transpose() * dhh;
    }
  }

  void collect(nn::ParameterList<T>& out, const std::string& prefix) {
    out.push_back({prefix + "embedding", &embedding_});
    out.push_back({prefix + "gru.w_input", &w_input_});
    out.push_back({prefix + "gru.w_hidden", &w_hidden_});
    out.push_back({prefix + "gru.bias", &bias_});
    out.push_back({prefix + "proj.weight", &w_out_});
    out.push_back({prefix + "proj.bias", &b_out_});
  }

 private:
  struct Step {
    nn::RowMatrix<T> x, h_prev, hh, r, u, c;
    std::vector<bool> active;
  };

  nn::Tensor<T> encode(std::span<const TokenSequence> batch, std::vector<Step>* cache,
                       nn::RowMatrix<T>* final_state) const {
    using Mat = nn::RowMatrix<T>;
    const int n = static_cast<int>(batch.size()), e = cfg_.embed_dim, h = cfg_.hidden_dim;
    int steps = 0;
    for (const auto& s : batch) steps = std::max(steps, s.length);
    std::vector<Step> local;
    std::vector<Step>& st_cache = cache ? *cache : local;
    st_cache.assign(steps, {});
    Mat state = Mat::Zero(h, n);
    auto emb = nn::as_matrix(embedding_.value);
    auto wx = nn::as_matrix(w_input_.value);
    auto wh = nn::as_matrix(w_hidden_.value);
    for (int t = 0; t < steps; ++t) {
      Step& st = st_cache[t];
      st.x = Mat::Zero(e, n);
      st.active.assign(n, false);
      for (int j = 0; j < n; ++j) {
        if (t < batch[j].length) {
          st.active[j] = true;
          st.x.col(j) = emb.row(batch[j].ids[t]).transpose();
        }
      }
      st.h_prev = state;
      Mat a = wx * st.x;
      st.hh = wh * state;
      for (int r = 0; r < 3 * h; ++r) a.row(r).array() += bias_.value[r];
      st.r = sigmoid(a.topRows(h) + st.hh.topRows(h));
      st.u = sigmoid(a.middleRows(h, h) + st.hh.middleRows(h, h));
      st.c = (a.bottomRows(h).array() + st.r.array() * st.hh.bottomRows(h).array()).tanh().matrix();
      Mat next = ((T(1) - st.u.array()) * state.array() + st.u.array() * st.c.array()).matrix();
      for (int j = 0; j < n; ++j) {
        if (st.active[j]) state.col(j) = next.col(j);
      }
    }
    if (final_state) *final_state = state;
    nn::Tensor<T> out(cfg_.out_dim, n);
    auto om = nn::as_matrix(out);
    om.noalias() = nn::as_matrix(w_out_.value) * state;
    for (int r = 0; r < cfg_.out_dim; ++r) om.row(r).array() += b_out_.value[r];
    return out;
  }

  template <typename Expr>
  static nn::RowMatrix<T> sigmoid(const Expr& e) {
    return (T(1) / (T(1) + (-e.array()).exp())).matrix();
  }

  TextEncoderConfig cfg_{};
  nn::Parameter<T> embedding_, w_input_, w_hidden_, bias_, w_out_, b_out_;
  std::vector<TokenSequence> batch_;
  std::vector<Step> cache_;
  nn::RowMatrix<T> final_state_;
};

}  // namespace fashion
