#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fashion/nn/tensor.hpp"
#include "fashion/rng.hpp"

namespace fashion::nn {

template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(Tensor<T> v, bool train = true) : value(std::move(v)), grad(value), trainable(train) { grad.fill(T(0)); }
};

template <typename T>
struct NamedParameter {
  std::string name;
  Parameter<T>* param;
};

template <typename T>
using ParameterList = std::vector<NamedParameter<T>>;

template <typename T>
void zero_grad(const ParameterList<T>& params) {
  for (auto& p : params) p.param->grad.fill(T(0));
}

// Weights are drawn in double and rounded so that float and double networks
// built from the same seed start from the same point.
template <typename T>
Tensor<T> normal_tensor(int rows, int cols, double mean, double stddev, Rng& rng) {
  Tensor<T> t(rows, cols);
  std::normal_distribution<double> dist(mean, stddev);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Tensor<T> uniform_tensor(int rows, int cols, double bound, Rng& rng) {
  Tensor<T> t(rows, cols);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, bool train) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad) = 0;
  // Evaluation-mode forward that leaves no cached state behind; safe to call
  // concurrently on a shared layer.
  virtual Tensor<T> infer(const Tensor<T>& x) const = 0;
  virtual void collect(ParameterList<T>& /*out*/, const std::string& /*prefix*/) {}
};

struct ConvGeometry {
  int in_h, in_w, out_h, out_w, kernel, stride, pad;
};

// Patch matrix with rows (c, ky, kx) and columns (n, oy, ox).
template <typename T>
void im2col(const T* x, int channels, int batch, const ConvGeometry& g, T* col) {
  const std::size_t cols = static_cast<std::size_t>(batch) * g.out_h * g.out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* dst = col + ((static_cast<std::size_t>(c) * g.kernel + ky) * g.kernel + kx) * cols;
        for (int n = 0; n < batch; ++n) {
          const T* src = x + (static_cast<std::size_t>(c) * batch + n) * g.in_h * g.in_w;
          for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) {
              std::fill_n(dst, g.out_w, T(0));
              dst += g.out_w;
              continue;
            }
            const T* row = src + static_cast<std::size_t>(iy) * g.in_w;
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * g.stride - g.pad + kx;
              *dst++ = (ix >= 0 && ix < g.in_w) ? row[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add patches back into the image (x is not cleared).
template <typename T>
void col2im(const T* col, int channels, int batch, const ConvGeometry& g, T* x) {
  const std::size_t cols = static_cast<std::size_t>(batch) * g.out_h * g.out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* src = col + ((static_cast<std::size_t>(c) * g.kernel + ky) * g.kernel + kx) * cols;
        for (int n = 0; n < batch; ++n) {
          T* dst = x + (static_cast<std::size_t>(c) * batch + n) * g.in_h * g.in_w;
          for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) {
              src += g.out_w;
              continue;
            }
            T* row = dst + static_cast<std::size_t>(iy) * g.in_w;
            for (int ox = 0; ox < g.out_w; ++ox, ++src) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < g.in_w) row[ix] += *src;
            }
          }
        }
      }
    }
  }
}

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng, double init_std = 0.02)
      : in_(in_ch), out_(out_ch), k_(kernel), s_(stride), p_(pad),
        weight_(normal_tensor<T>(out_ch, in_ch * kernel * kernel, 0.0, init_std, rng)),
        bias_(Tensor<T>(out_ch, 1)) {}

  Tensor<T> forward(const Tensor<T>& x, bool /*train*/) override {
    geom_ = geometry(x);
    batch_ = x.batch();
    return run(x, geom_, col_);
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    AlignedVector<T> col;
    return run(x, geometry(x), col);
  }

  Tensor<T> backward(const Tensor<T>& grad) override {
    const int rows = in_ * k_ * k_;
    const Eigen::Index cols = static_cast<Eigen::Index>(batch_) * geom_.out_h * geom_.out_w;
    ConstMatrixMap<T> col(col_.data(), rows, cols);
    auto g = as_matrix(grad);
    as_matrix(weight_.grad).noalias() += g * col.transpose();
    for (int c = 0; c < out_; ++c) bias_.grad[c] += g.row(c).sum();
    AlignedVector<T> dcol(static_cast<std::size_t>(rows) * cols);
    MatrixMap<T>(dcol.data(), rows, cols).noalias() = as_matrix(weight_.value).transpose() * g;
    Tensor<T> dx(in_, batch_, geom_.in_h, geom_.in_w);
    col2im(dcol.data(), in_, batch_, geom_, dx.data());
    return dx;
  }

  void collect(ParameterList<T>& out, const std::string& prefix) override {
    out.push_back({prefix + "weight", &weight_});
    out.push_back({prefix + "bias", &bias_});
  }

  void zero() {
    weight_.value.fill(T(0));
    bias_.value.fill(T(0));
  }

  static std::size_t parameter_count(int in_ch, int out_ch, int kernel) {
    return static_cast<std::size_t>(out_ch) * in_ch * kernel * kernel + out_ch;
  }

 private:
  ConvGeometry geometry(const Tensor<T>& x) const {
    return {x.height(), x.width(), (x.height() + 2 * p_ - k_) / s_ + 1, (x.width() + 2 * p_ - k_) / s_ + 1, k_, s_, p_};
  }

  Tensor<T> run(const Tensor<T>& x, const ConvGeometry& g, AlignedVector<T>& col) const {
    const int rows = in_ * k_ * k_;
    const Eigen::Index cols = static_cast<Eigen::Index>(x.batch()) * g.out_h * g.out_w;
    col.resize(static_cast<std::size_t>(rows) * cols);
    im2col(x.data(), in_, x.batch(), g, col.data());
    Tensor<T> y(out_, x.batch(), g.out_h, g.out_w);
    auto ym = as_matrix(y);
    ym.noalias() = as_matrix(weight_.value) * ConstMatrixMap<T>(col.data(), rows, cols);
    for (int c = 0; c < out_; ++c) ym.row(c).array() += bias_.value[c];
    return y;
  }

  int in_, out_, k_, s_, p_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  ConvGeometry geom_{};
  int batch_ = 0;
  AlignedVector<T> col_;
};

// Fractionally strided convolution: the adjoint of a Conv2d that maps the
// output grid back onto the input grid.
template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng, double init_std = 0.02)
      : in_(in_ch), out_(out_ch), k_(kernel), s_(stride), p_(pad),
        weight_(normal_tensor<T>(in_ch, out_ch * kernel * kernel, 0.0, init_std, rng)),
        bias_(Tensor<T>(out_ch, 1)) {}

  Tensor<T> forward(const Tensor<T>& x, bool /*train*/) override {
    batch_ = x.batch();
    in_h_ = x.height();
    in_w_ = x.width();
    geom_ = geometry(x);
    input_ = x;
    return infer(x);
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    const ConvGeometry g = geometry(x);
    const int rows = out_ * k_ * k_;
    const Eigen::Index cols = static_cast<Eigen::Index>(x.batch()) * x.height() * x.width();
    AlignedVector<T> col(static_cast<std::size_t>(rows) * cols);
    MatrixMap<T>(col.data(), rows, cols).noalias() = as_matrix(weight_.value).transpose() * as_matrix(x);
    Tensor<T> y(out_, x.batch(), g.in_h, g.in_w);
    col2im(col.data(), out_, x.batch(), g, y.data());
    auto ym = as_matrix(y);
    for (int c = 0; c < out_; ++c) ym.row(c).array() += bias_.value[c];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad) override {
    const int rows = out_ * k_ * k_;
    const Eigen::Index cols = static_cast<Eigen::Index>(batch_) * in_h_ * in_w_;
    AlignedVector<T> dcol(static_cast<std::size_t>(rows) * cols);
    im2col(grad.data(), out_, batch_, geom_, dcol.data());
    ConstMatrixMap<T> dc(dcol.data(), rows, cols);
    as_matrix(weight_.grad).noalias() += as_matrix(input_) * dc.transpose();
    auto g = as_matrix(grad);
    for (int c = 0; c < out_; ++c) bias_.grad[c] += g.row(c).sum();
    Tensor<T> dx(in_, batch_, in_h_, in_w_);
    as_matrix(dx).noalias() = as_matrix(weight_.value) * dc;
    return dx;
  }

  void collect(ParameterList<T>& out, const std::string& prefix) override {
    out.push_back({prefix + "weight", &weight_});
    out.push_back({prefix + "bias", &bias_});
  }

  void zero() {
    weight_.value.fill(T(0));
    bias_.value.fill(T(0));
  }

  static std::size_t parameter_count(int in_ch, int out_ch, int kernel) {
    return static_cast<std::size_t>(in_ch) * out_ch * kernel * kernel + out_ch;
  }

 private:
  // Geometry of the adjoint convolution (output grid -> input grid).
  ConvGeometry geometry(const Tensor<T>& x) const {
    const int oh = (x.height() - 1) * s_ - 2 * p_ + k_;
    const int ow = (x.width() - 1) * s_ - 2 * p_ + k_;
    return {oh, ow, x.height(), x.width(), k_, s_, p_};
  }

  int in_, out_, k_, s_, p_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  ConvGeometry geom_{};
  int batch_ = 0, in_h_ = 0, in_w_ = 0;
  Tensor<T> input_;
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(int in_features, int out_features, Rng& rng, double init_std = 0.02)
      : in_(in_features), out_(out_features),
        weight_(normal_tensor<T>(out_features, in_features, 0.0, init_std, rng)),
        bias_(Tensor<T>(out_features, 1)) {}

  Tensor<T> forward(const Tensor<T>& x, bool /*train*/) override {
    input_ = x;
    return infer(x);
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    Tensor<T> y(out_, x.batch());
    auto ym = as_matrix(y);
    ym.noalias() = as_matrix(weight_.value) * as_matrix(x);
    for (int c = 0; c < out_; ++c) ym.row(c).array() += bias_.value[c];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad) override {
    auto g = as_matrix(grad);
    as_matrix(weight_.grad).noalias() += g * as_matrix(input_).transpose();
    for (int c = 0; c < out_; ++c) bias_.grad[c] += g.row(c).sum();
    Tensor<T> dx(in_, grad.batch());
    as_matrix(dx).noalias() = as_matrix(weight_.value).transpose() * g;
    return dx;
  }

  void collect(ParameterList<T>& out, const std::string& prefix) override {
    out.push_back({prefix + "weight", &weight_});
    out.push_back({prefix + "bias", &bias_});
  }

  static std::size_t parameter_count(int in_features, int out_features) {
    return static_cast<std::size_t>(in_features) * out_features + out_features;
  }

 private:
  int in_, out_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
};

// Per-channel batch normalization over (batch, height, width).
template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  BatchNorm(int channels, Rng& rng)
      : c_(channels),
        gamma_(normal_tensor<T>(channels, 1, 1.0, 0.02, rng)),
        beta_(Tensor<T>(channels, 1)),
        running_mean_(Tensor<T>(channels, 1), false),
        running_var_(Tensor<T>(channels, 1, 1, 1, T(1)), false) {}

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    train_ = train;
    const std::size_t m = x.channel_stride();
    xhat_ = Tensor<T>(x.channels(), x.batch(), x.height(), x.width());
    inv_std_.assign(c_, T(0));
    Tensor<T> y(x.channels(), x.batch(), x.height(), x.width());
    for (int c = 0; c < c_; ++c) {
      const T* src = x.data() + c * m;
      T mean, var;
      if (train) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += src[i];
        const double mu = s / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) s2 += (src[i] - mu) * (src[i] - mu);
        mean = static_cast<T>(mu);
        var = static_cast<T>(s2 / static_cast<double>(m));
        update_running(c, mu, m > 1 ? s2 / static_cast<double>(m - 1) : 0.0);
      } else {
        mean = running_mean_.value[c];
        var = running_var_.value[c];
      }
      const T inv = T(1) / std::sqrt(var + kEps);
      inv_std_[c] = inv;
      T* xh = xhat_.data() + c * m;
      T* dst = y.data() + c * m;
      const T g = gamma_.value[c], b = beta_.value[c];
      for (std::size_t i = 0; i < m; ++i) {
        xh[i] = (src[i] - mean) * inv;
        dst[i] = g * xh[i] + b;
      }
    }
    if (train && accumulate_) ++accumulated_;
    return y;
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    const std::size_t m = x.channel_stride();
    Tensor<T> y(x.channels(), x.batch(), x.height(), x.width());
    for (int c = 0; c < c_; ++c) {
      const T inv = T(1) / std::sqrt(running_var_.value[c] + kEps);
      const T mean = running_mean_.value[c], g = gamma_.value[c], b = beta_.value[c];
      const T* src = x.data() + c * m;
      T* dst = y.data() + c * m;
      for (std::size_t i = 0; i < m; ++i) dst[i] = g * ((src[i] - mean) * inv) + b;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad) override {
    const std::size_t m = grad.channel_stride();
    Tensor<T> dx(grad.channels(), grad.batch(), grad.height(), grad.width());
    for (int c = 0; c < c_; ++c) {
      const T* g = grad.data() + c * m;
      const T* xh = xhat_.data() + c * m;
      T* d = dx.data() + c * m;
      double sg = 0.0, sgx = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        sg += g[i];
        sgx += g[i] * xh[i];
      }
      gamma_.grad[c] += static_cast<T>(sgx);
      beta_.grad[c] += static_cast<T>(sg);
      const T scale = gamma_.value[c] * inv_std_[c];
      if (train_) {
        const T mg = static_cast<T>(sg / static_cast<double>(m));
        const T mgx = static_cast<T>(sgx / static_cast<double>(m));
        for (std::size_t i = 0; i < m; ++i) d[i] = scale * (g[i] - mg - xh[i] * mgx);
      } else {
        for (std::size_t i = 0; i < m; ++i) d[i] = scale * g[i];
      }
    }
    return dx;
  }

  void collect(ParameterList<T>& out, const std::string& prefix) override {
    out.push_back({prefix + "gamma", &gamma_});
    out.push_back({prefix + "beta", &beta_});
    out.push_back({prefix + "running_mean", &running_mean_});
    out.push_back({prefix + "running_var", &running_var_});
  }

  // While accumulating, running statistics become the exact average over
  // all subsequent training-mode batches (population statistics).
  void begin_accumulation() {
    accumulated_ = 0;
    accumulate_ = true;
    running_mean_.value.fill(T(0));
    running_var_.value.fill(T(0));
  }
  void end_accumulation() { accumulate_ = false; }

 private:
  void update_running(int c, double mean, double unbiased_var) {
    if (accumulate_) {
      const double w = 1.0 / (static_cast<double>(accumulated_) + 1.0);
      running_mean_.value[c] = static_cast<T>((1.0 - w) * running_mean_.value[c] + w * mean);
      running_var_.value[c] = static_cast<T>((1.0 - w) * running_var_.value[c] + w * unbiased_var);
      return;
    }
    running_mean_.value[c] = static_cast<T>((1.0 - kMomentum) * running_mean_.value[c] + kMomentum * mean);
    running_var_.value[c] = static_cast<T>((1.0 - kMomentum) * running_var_.value[c] + kMomentum * unbiased_var);
  }

  static constexpr T kEps = T(1e-5);
  static constexpr double kMomentum = 0.1;
  int c_;
  Parameter<T> gamma_, beta_, running_mean_, running_var_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
  bool train_ = false;
  bool accumulate_ = false;
  long accumulated_ = 0;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  explicit ReLU(T negative_slope = T(0)) : slope_(negative_slope) {}
  Tensor<T> forward(const Tensor<T>& x, bool /*train*/) override {
    input_ = x;
    return infer(x);
  }
  Tensor<T> infer(const Tensor<T>& x) const override {
    Tensor<T> y = x;
    for (auto& v : y.values()) v = v > T(0) ? v : slope_ * v;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& grad) override {
    Tensor<T> dx = grad;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = input_[i] > T(0) ? dx[i] : slope_ * dx[i];
    return dx;
  }

 private:
  T slope_;
  Tensor<T> input_;
};

template <typename T>
class Tanh final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool /*train*/) override {
    output_ = infer(x);
    return output_;
  }
  Tensor<T> infer(const Tensor<T>& x) const override {
    Tensor<T> y = x;
    for (auto& v : y.values()) v = std::tanh(v);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& grad) override {
    Tensor<T> dx = grad;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= T(1) - output_[i] * output_[i];
    return dx;
  }

 private:
  Tensor<T> output_;
};

// Softmax across channels at every (n, y, x).
template <typename T>
class ChannelSoftmax final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool /*train*/) override {
    output_ = infer(x);
    return output_;
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    Tensor<T> y = x;
    const std::size_t m = x.channel_stride();
    const int c = x.channels();
    for (std::size_t i = 0; i < m; ++i) {
      T mx = x[i];
      for (int k = 1; k < c; ++k) mx = std::max(mx, x[k * m + i]);
      T s = T(0);
      for (int k = 0; k < c; ++k) {
        const T e = std::exp(x[k * m + i] - mx);
        y[k * m + i] = e;
        s += e;
      }
      for (int k = 0; k < c; ++k) y[k * m + i] /= s;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad) override {
    Tensor<T> dx(grad.channels(), grad.batch(), grad.height(), grad.width());
    const std::size_t m = grad.channel_stride();
    const int c = grad.channels();
    for (std::size_t i = 0; i < m; ++i) {
      T dot = T(0);
      for (int k = 0; k < c; ++k) dot += grad[k * m + i] * output_[k * m + i];
      for (int k = 0; k < c; ++k) dx[k * m + i] = output_[k * m + i] * (grad[k * m + i] - dot);
    }
    return dx;
  }

 private:
  Tensor<T> output_;
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    Tensor<T> h = x;
    for (auto& l : layers_) h = l->forward(h, train);
    return h;
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    Tensor<T> h = x;
    for (const auto& l : layers_) h = l->infer(h);
    return h;
  }

  Tensor<T> backward(const Tensor<T>& grad) override {
    Tensor<T> g = grad;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  void collect(ParameterList<T>& out, const std::string& prefix) override {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect(out, prefix + std::to_string(i) + ".");
  }

  template <typename F>
  void for_each(F&& f) {
    for (auto& l : layers_) f(*l);
  }

  std::size_t size() const noexcept { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// Recompute BN population statistics over the batches fed between begin and end.
template <typename T>
void begin_bn_accumulation(Sequential<T>& s) {
  s.for_each([](Layer<T>& l) {
    if (auto* bn = dynamic_cast<BatchNorm<T>*>(&l)) bn->begin_accumulation();
  });
}
template <typename T>
void end_bn_accumulation(Sequential<T>& s) {
  s.for_each([](Layer<T>& l) {
    if (auto* bn = dynamic_cast<BatchNorm<T>*>(&l)) bn->end_accumulation();
  });
}

}  // namespace fashion::nn
