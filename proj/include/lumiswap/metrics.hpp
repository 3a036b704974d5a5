#pragma once

#include <span>

#include "lumiswap/image.hpp"

namespace lumiswap {

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
};

inline constexpr double kMseFloor = 1e-10;

// 10·log10(1/MSE) with peak 1.0; MSE floored so identical images give 100 dB.
double psnr(const ImageRGB& a, const ImageRGB& b);

// Mean SSIM over valid 11×11 Gaussian windows (σ = 1.5, K1 = 0.01, K2 = 0.03,
// L = 1), computed per channel and averaged. Both sides must be ≥ 11 px.
double ssim(const ImageRGB& a, const ImageRGB& b);

MetricReport compare(const ImageRGB& a, const ImageRGB& b);

// u·v / (‖u‖‖v‖), denominator floored at 1e-8, clamped to [-1, 1].
double cosine_similarity(std::span<const double> u, std::span<const double> v);

inline constexpr double kCosineFloor = 1e-8;

}  // namespace lumiswap
