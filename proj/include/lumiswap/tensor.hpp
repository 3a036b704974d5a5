#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lumiswap {

// Single-sample activation map in CHW order.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const noexcept { return data.size(); }
  float* channel(int c) noexcept { return data.data() + c * plane(); }
  const float* channel(int c) const noexcept { return data.data() + c * plane(); }
  float& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  float at(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }

  bool same_shape(const Tensor& o) const noexcept {
    return channels == o.channels && height == o.height && width == o.width;
  }
  void reshape(int c, int h, int w) {
    channels = c;
    height = h;
    width = w;
    data.assign(static_cast<std::size_t>(c) * h * w, 0.0f);
  }
  void zero() { std::fill(data.begin(), data.end(), 0.0f); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace lumiswap
