#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lumiswap {

// H×W×3 image, interleaved, intensities nominally in [0,1].
//
// Values are stored as double so losses and their gradients can be checked
// against finite differences; network tensors use float.
class ImageRGB {
 public:
  ImageRGB() = default;
  ImageRGB(int height, int width, double fill = 0.0);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int y, int x, int c) { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
  double at(int y, int x, int c) const { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const ImageRGB& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const ImageRGB&, const ImageRGB&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Planar HSV; hue is a fraction of a full turn in [0,1).
struct ImageHSV {
  int height = 0;
  int width = 0;
  std::vector<double> h;
  std::vector<double> s;
  std::vector<double> v;
};

// Throws DimensionError unless both images share height and width.
void require_same_shape(const ImageRGB& a, const ImageRGB& b, const char* what);

// Copy of the rectangle [y0, y0+h) × [x0, x0+w).
ImageRGB crop(const ImageRGB& img, int y0, int x0, int h, int w);

ImageRGB flip_horizontal(const ImageRGB& img);
ImageRGB flip_vertical(const ImageRGB& img);

// Mean of max(r,g,b) over all pixels, i.e. the mean V channel.
double mean_value_channel(const ImageRGB& img);

}  // namespace lumiswap
