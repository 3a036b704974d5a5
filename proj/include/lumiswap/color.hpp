#pragma once

#include <array>

#include "lumiswap/image.hpp"

namespace lumiswap {

struct Hsv {
  double h;
  double s;
  double v;
};

// Hexcone conversion. Hue in [0,1); pixels with zero chroma get h = 0.
Hsv rgb_to_hsv(double r, double g, double b);
std::array<double, 3> hsv_to_rgb(const Hsv& p);

ImageHSV rgb_to_hsv(const ImageRGB& img);
ImageRGB hsv_to_rgb(const ImageHSV& img);

// Jacobian rows of (h, s) with respect to (r, g, b) at one pixel.
//
// The branch (which channel is the max, which the min) is held fixed, so this
// is the derivative almost everywhere. Zero-chroma pixels and black pixels
// get zero rows.
struct HsJacobian {
  std::array<double, 3> dh;
  std::array<double, 3> ds;
};
HsJacobian hs_jacobian(double r, double g, double b);

}  // namespace lumiswap
