#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cassert>
#include <cstddef>
#include <new>
#include <span>
#include <vector>

namespace fashion::nn {

// 64-byte aligned storage. Eigen's vectorized kernels peel a different number
// of leading elements depending on alignment, which changes summation order;
// fixed alignment makes every result depend on shapes and values only.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

// Activations use channel-major layout {channels, batch, height, width}: every
// channel is one contiguous block of batch * height * width values, so
// channel concatenation is plain appending and a convolution is one GEMM over
// the whole batch. Dense activations are {features, batch, 1, 1}.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int c, int n, int h = 1, int w = 1, T fill = T(0))
      : shape_{c, n, h, w}, data_(static_cast<std::size_t>(c) * n * h * w, fill) {}

  int channels() const noexcept { return shape_[0]; }
  int batch() const noexcept { return shape_[1]; }
  int height() const noexcept { return shape_[2]; }
  int width() const noexcept { return shape_[3]; }
  const std::array<int, 4>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(shape_[2]) * shape_[3]; }
  std::size_t channel_stride() const noexcept { return plane() * shape_[1]; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(int c, int n, int y, int x) noexcept { return data_[offset(c, n, y, x)]; }
  const T& at(int c, int n, int y, int x) const noexcept { return data_[offset(c, n, y, x)]; }

  std::size_t offset(int c, int n, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(c) * shape_[1] + n) * shape_[2] + y) * shape_[3] + x;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Tensor& o) const noexcept { return shape_ == o.shape_; }

  Tensor& operator+=(const Tensor& o) {
    assert(same_shape(o));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator*=(T k) {
    for (auto& v : data_) v *= k;
    return *this;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_[0], shape_[1], shape_[2], shape_[3]);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::array<int, 4> shape_{0, 0, 0, 0};
  AlignedVector<T> data_;
};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// View as channels x (batch * height * width).
template <typename T>
MatrixMap<T> as_matrix(Tensor<T>& t) {
  return MatrixMap<T>(t.data(), t.channels(), static_cast<Eigen::Index>(t.channel_stride()));
}
template <typename T>
ConstMatrixMap<T> as_matrix(const Tensor<T>& t) {
  return ConstMatrixMap<T>(t.data(), t.channels(), static_cast<Eigen::Index>(t.channel_stride()));
}

// Channel concatenation / split (the layout makes both contiguous copies).
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  assert(a.batch() == b.batch() && a.height() == b.height() && a.width() == b.width());
  Tensor<T> out(a.channels() + b.channels(), a.batch(), a.height(), a.width());
  std::copy(a.values().begin(), a.values().end(), out.data());
  std::copy(b.values().begin(), b.values().end(), out.data() + a.size());
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, int begin, int count) {
  Tensor<T> out(count, t.batch(), t.height(), t.width());
  const auto* src = t.data() + static_cast<std::size_t>(begin) * t.channel_stride();
  std::copy(src, src + out.size(), out.data());
  return out;
}

// Samples [begin, begin + count) of every channel.
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& t, int begin, int count) {
  Tensor<T> out(t.channels(), count, t.height(), t.width());
  const std::size_t p = t.plane();
  for (int c = 0; c < t.channels(); ++c) {
    std::copy_n(t.data() + t.offset(c, begin, 0, 0), p * count, out.data() + out.offset(c, 0, 0, 0));
  }
  return out;
}

template <typename T>
Tensor<T> concat_batch(const Tensor<T>& a, const Tensor<T>& b) {
  assert(a.channels() == b.channels() && a.height() == b.height() && a.width() == b.width());
  Tensor<T> out(a.channels(), a.batch() + b.batch(), a.height(), a.width());
  const std::size_t p = a.plane();
  for (int c = 0; c < a.channels(); ++c) {
    std::copy_n(a.data() + a.offset(c, 0, 0, 0), p * a.batch(), out.data() + out.offset(c, 0, 0, 0));
    std::copy_n(b.data() + b.offset(c, 0, 0, 0), p * b.batch(), out.data() + out.offset(c, a.batch(), 0, 0));
  }
  return out;
}

// Broadcast {C, N, 1, 1} to {C, N, h, w}.
template <typename T>
Tensor<T> tile_spatial(const Tensor<T>& v, int h, int w) {
  Tensor<T> out(v.channels(), v.batch(), h, w);
  const std::size_t p = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < v.channels(); ++c) {
    for (int n = 0; n < v.batch(); ++n) {
      std::fill_n(out.data() + out.offset(c, n, 0, 0), p, v.at(c, n, 0, 0));
    }
  }
  return out;
}

// Adjoint of tile_spatial.
template <typename T>
Tensor<T> sum_spatial(const Tensor<T>& t) {
  Tensor<T> out(t.channels(), t.batch());
  const std::size_t p = t.plane();
  for (int c = 0; c < t.channels(); ++c) {
    for (int n = 0; n < t.batch(); ++n) {
      const T* src = t.data() + t.offset(c, n, 0, 0);
      T s = T(0);
      for (std::size_t i = 0; i < p; ++i) s += src[i];
      out.at(c, n, 0, 0) = s;
    }
  }
  return out;
}

// {C*h*w, N, 1, 1} (feature index = (c*h + y)*w + x) <-> {C, N, h, w}.
template <typename T>
Tensor<T> dense_to_map(const Tensor<T>& d, int c, int h, int w) {
  assert(d.channels() == c * h * w);
  Tensor<T> out(c, d.batch(), h, w);
  for (int ch = 0; ch < c; ++ch)
    for (int n = 0; n < d.batch(); ++n)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(ch, n, y, x) = d.at((ch * h + y) * w + x, n, 0, 0);
  return out;
}

template <typename T>
Tensor<T> map_to_dense(const Tensor<T>& m) {
  const int c = m.channels(), h = m.height(), w = m.width();
  Tensor<T> out(c * h * w, m.batch());
  for (int ch = 0; ch < c; ++ch)
    for (int n = 0; n < m.batch(); ++n)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at((ch * h + y) * w + x, n, 0, 0) = m.at(ch, n, y, x);
  return out;
}

}  // namespace fashion::nn
