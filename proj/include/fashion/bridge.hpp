#pragma once

#include <span>
#include <vector>

#include "fashion/grid.hpp"
#include "fashion/nn/tensor.hpp"

// Conversions between domain arrays (height x width x channel) and network
// tensors ({channel, batch, height, width}).
namespace fashion {

template <typename T, typename S>
void write_sample(nn::Tensor<T>& t, int n, const Grid3<S>& g) {
  for (int c = 0; c < g.channels(); ++c)
    for (int y = 0; y < g.height(); ++y)
      for (int x = 0; x < g.width(); ++x) t.at(c, n, y, x) = static_cast<T>(g(y, x, c));
}

template <typename T, typename S>
nn::Tensor<T> to_tensor(const Grid3<S>& g) {
  nn::Tensor<T> t(g.channels(), 1, g.height(), g.width());
  write_sample(t, 0, g);
  return t;
}

template <typename T, typename S>
nn::Tensor<T> to_tensor(std::span<const S> v) {
  nn::Tensor<T> t(static_cast<int>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<T>(v[i]);
  return t;
}

template <typename S, typename T>
Grid3<S> to_grid(const nn::Tensor<T>& t, int n, int first_channel = 0, int channels = -1) {
  if (channels < 0) channels = t.channels() - first_channel;
  Grid3<S> g(t.height(), t.width(), channels);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x) g(y, x, c) = static_cast<S>(t.at(first_channel + c, n, y, x));
  return g;
}

}  // namespace fashion
