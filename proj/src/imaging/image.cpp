#include "lumiswap/image.hpp"

#include <algorithm>
#include <string>

#include "lumiswap/error.hpp"

namespace lumiswap {

ImageRGB::ImageRGB(int height, int width, double fill) : height_(height), width_(width) {
  if (height < 1 || width < 1) {
    throw DimensionError("image sides must be positive, got " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  data_.assign(static_cast<std::size_t>(height) * width * 3, fill);
}

void require_same_shape(const ImageRGB& a, const ImageRGB& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()));
  }
}

ImageRGB crop(const ImageRGB& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || h < 1 || w < 1 || y0 + h > img.height() || x0 + w > img.width()) {
    throw DimensionError("crop window outside image");
  }
  ImageRGB out(h, w);
  for (int y = 0; y < h; ++y) {
    const double* src = &img.values()[(static_cast<std::size_t>(y0 + y) * img.width() + x0) * 3];
    std::copy(src, src + static_cast<std::size_t>(w) * 3, &out.at(y, 0, 0));
  }
  return out;
}

ImageRGB flip_horizontal(const ImageRGB& img) {
  ImageRGB out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width() - 1 - x, c);
  return out;
}

ImageRGB flip_vertical(const ImageRGB& img) {
  ImageRGB out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(img.height() - 1 - y, x, c);
  return out;
}

double mean_value_channel(const ImageRGB& img) {
  if (img.empty()) return 0.0;
  const auto v = img.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); i += 3) sum += std::max({v[i], v[i + 1], v[i + 2]});
  return sum / static_cast<double>(img.pixel_count());
}

}  // namespace lumiswap
