#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fashion {

// Dense rank-3 array in height x width x channel order (channel fastest).
template <typename T>
class Grid3 {
 public:
  Grid3() = default;
  Grid3(int height, int width, int channels, T fill = T(0))
      : h_(height), w_(width), c_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {}
  Grid3(int height, int width, int channels, std::vector<T> data)
      : h_(height), w_(width), c_(channels), data_(std::move(data)) {}

  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }
  int channels() const noexcept { return c_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
  const T& operator()(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }

  std::span<T> pixel(int y, int x) noexcept { return {data_.data() + index(y, x, 0), static_cast<std::size_t>(c_)}; }
  std::span<const T> pixel(int y, int x) const noexcept {
    return {data_.data() + index(y, x, 0), static_cast<std::size_t>(c_)};
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  bool same_extent(int height, int width) const noexcept { return h_ == height && w_ == width; }

  friend bool operator==(const Grid3&, const Grid3&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * w_ + x) * c_ + c;
  }

  int h_ = 0;
  int w_ = 0;
  int c_ = 0;
  std::vector<T> data_;
};

using Grid3f = Grid3<float>;
using Grid3d = Grid3<double>;

// Integer label grid, row-major.
struct LabelGrid {
  int height = 0;
  int width = 0;
  std::vector<int> labels;

  int operator()(int y, int x) const noexcept { return labels[static_cast<std::size_t>(y) * width + x]; }
  int& operator()(int y, int x) noexcept { return labels[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const LabelGrid&, const LabelGrid&) = default;
};

}  // namespace fashion
