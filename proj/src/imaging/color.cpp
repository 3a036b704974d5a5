#include "lumiswap/color.hpp"

#include <algorithm>
#include <cmath>

namespace lumiswap {

namespace {

// Channel holding the maximum, ties resolved r > g > b.
int argmax3(double r, double g, double b) {
  if (r >= g && r >= b) return 0;
  if (g >= b) return 1;
  return 2;
}

int argmin3(double r, double g, double b) {
  if (r <= g && r <= b) return 0;
  if (g <= b) return 1;
  return 2;
}

}  // namespace

Hsv rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  Hsv out{0.0, mx > 0.0 ? d / mx : 0.0, mx};
  if (d <= 0.0) return out;
  double h;
  switch (argmax3(r, g, b)) {
    case 0: h = (g - b) / d; break;
    case 1: h = (b - r) / d + 2.0; break;
    default: h = (r - g) / d + 4.0; break;
  }
  h /= 6.0;
  if (h < 0.0) h += 1.0;
  if (h >= 1.0) h = 0.0;
  out.h = h;
  return out;
}

std::array<double, 3> hsv_to_rgb(const Hsv& p) {
  const double v = p.v;
  const double s = p.s;
  if (s <= 0.0) return {v, v, v};
  const double h6 = p.h * 6.0;
  const double sector = std::floor(h6);
  const double f = h6 - sector;
  const double a = v * (1.0 - s);
  const double b = v * (1.0 - s * f);
  const double c = v * (1.0 - s * (1.0 - f));
  switch (static_cast<int>(sector) % 6) {
    case 0: return {v, c, a};
    case 1: return {b, v, a};
    case 2: return {a, v, c};
    case 3: return {a, b, v};
    case 4: return {c, a, v};
    default: return {v, a, b};
  }
}

ImageHSV rgb_to_hsv(const ImageRGB& img) {
  ImageHSV out;
  out.height = img.height();
  out.width = img.width();
  const std::size_t n = img.pixel_count();
  out.h.resize(n);
  out.s.resize(n);
  out.v.resize(n);
  const auto px = img.values();
  for (std::size_t i = 0; i < n; ++i) {
    const Hsv p = rgb_to_hsv(px[3 * i], px[3 * i + 1], px[3 * i + 2]);
    out.h[i] = p.h;
    out.s[i] = p.s;
    out.v[i] = p.v;
  }
  return out;
}

ImageRGB hsv_to_rgb(const ImageHSV& img) {
  ImageRGB out(img.height, img.width);
  auto px = out.values();
  const std::size_t n = out.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const auto rgb = hsv_to_rgb(Hsv{img.h[i], img.s[i], img.v[i]});
    px[3 * i] = rgb[0];
    px[3 * i + 1] = rgb[1];
    px[3 * i + 2] = rgb[2];
  }
  return out;
}

HsJacobian hs_jacobian(double r, double g, double b) {
  HsJacobian jac{{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
  const std::array<double, 3> x{r, g, b};
  const int imax = argmax3(r, g, b);
  const int imin = argmin3(r, g, b);
  const double mx = x[imax];
  const double d = mx - x[imin];
  if (mx <= 0.0 || d <= 0.0) return jac;

  std::array<double, 3> dd{0.0, 0.0, 0.0};
  dd[imax] += 1.0;
  dd[imin] -= 1.0;

  // s = d / mx
  for (int k = 0; k < 3; ++k) {
    const double dmx = k == imax ? 1.0 : 0.0;
    jac.ds[k] = (dd[k] * mx - d * dmx) / (mx * mx);
  }

  // h = (numerator / d + offset) / 6, numerator is a difference of the other two channels.
  std::array<double, 3> dnum{0.0, 0.0, 0.0};
  double num;
  switch (imax) {
    case 0: num = g - b; dnum = {0.0, 1.0, -1.0}; break;
    case 1: num = b - r; dnum = {-1.0, 0.0, 1.0}; break;
    default: num = r - g; dnum = {1.0, -1.0, 0.0}; break;
  }
  for (int k = 0; k < 3; ++k) jac.dh[k] = (dnum[k] * d - num * dd[k]) / (6.0 * d * d);
  return jac;
}

}  // namespace lumiswap
