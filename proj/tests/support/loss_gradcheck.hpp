#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lumiswap/image.hpp"
#include "lumiswap/losses.hpp"

// Central finite-difference checks of the analytic loss gradients on random
// 8×8 images and length-16 vectors, sampled away from the |·| and [·]₊ kinks
// and from the max/min channel switches of the HSV formulas.
namespace lumiswap::testing {

inline constexpr double kFdStep = 1e-4;
inline constexpr int kGradSide = 8;
inline constexpr int kGradVector = 16;

template <class F>
std::vector<double> central_difference(std::span<double> x, F&& f, double h = kFdStep) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ‖a − b‖ / max(‖a‖, ‖b‖).
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

// Every pixel has three channels separated by at least 0.05 and kept inside [0.05, 0.95].
inline ImageRGB separated_image(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> gap(0.05, 0.3);
  ImageRGB img(kGradSide, kGradSide);
  auto v = img.values();
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    double tri[3];
    tri[0] = gap(rng);
    tri[1] = tri[0] + gap(rng);
    tri[2] = tri[1] + gap(rng);
    std::shuffle(tri, tri + 3, rng);
    for (int c = 0; c < 3; ++c) v[3 * p + c] = tri[c];
  }
  return img;
}

// Differs from `base` by at least 0.01 in every value.
inline ImageRGB offset_image(const ImageRGB& base, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.01, 0.2);
  std::bernoulli_distribution sign(0.5);
  ImageRGB out = base;
  for (double& x : out.values()) x += sign(rng) ? mag(rng) : -mag(rng);
  return out;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, int n = kGradVector) {
  std::normal_distribution<double> d(0.0, 0.5);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline double check_reconstruction(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ImageRGB pred = separated_image(rng);
  const ImageRGB ref = offset_image(pred, rng);
  std::vector<double> analytic(pred.size(), 0.0);
  reconstruction_loss_grad(pred, ref, 1.0, analytic);
  const auto fd = central_difference(pred.values(), [&] { return reconstruction_loss(pred, ref); });
  return relative_error(analytic, fd);
}

inline double check_content_feature(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto c_p = random_vector(rng);
  auto c_i = random_vector(rng);
  std::vector<double> dp(c_p.size(), 0.0), di(c_i.size(), 0.0);
  content_feature_loss_grad(c_p, c_i, 1.0, dp, di);
  const auto f = [&] { return content_feature_loss(c_p, c_i); };
  const auto fp = central_difference(c_p, f);
  const auto fi = central_difference(c_i, f);
  return std::max(relative_error(dp, fp), relative_error(di, fi));
}

// The margin is chosen so the rectifier is active with slack ≥ 0.5.
inline double check_luminance_feature(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto l_p = random_vector(rng);
  auto l_r = random_vector(rng);
  auto l_i = random_vector(rng);
  const double alpha = std::max(0.08, squared_distance(l_p, l_i) - squared_distance(l_p, l_r) + 0.5);
  std::vector<double> dp(kGradVector, 0.0), dr(kGradVector, 0.0), di(kGradVector, 0.0);
  luminance_feature_loss_grad(l_p, l_r, l_i, alpha, 1.0, dp, dr, di);
  const auto f = [&] { return luminance_feature_loss(l_p, l_r, l_i, alpha); };
  const auto fp = central_difference(l_p, f);
  const auto fr = central_difference(l_r, f);
  const auto fi = central_difference(l_i, f);
  return std::max({relative_error(dp, fp), relative_error(dr, fr), relative_error(di, fi)});
}

inline double check_content_consistency(std::uint64_t seed, bool hue) {
  std::mt19937_64 rng(seed);
  ImageRGB pred = separated_image(rng);
  const ImageRGB low = separated_image(rng);
  std::vector<double> analytic(pred.size(), 0.0);
  content_consistency_loss_grad(pred, low, hue ? 1.0 : 0.0, hue ? 0.0 : 1.0, analytic);
  const auto fd = central_difference(pred.values(), [&] {
    const auto cc = content_consistency_loss(pred, low);
    return hue ? cc.l_c_h : cc.l_c_s;
  });
  return relative_error(analytic, fd);
}

// Total objective with λ = 2, differentiated jointly in the prediction and all five feature vectors.
inline double check_total(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ImageRGB pred = separated_image(rng);
  const ImageRGB low = separated_image(rng);
  const ImageRGB ref = offset_image(pred, rng);
  auto c_p = random_vector(rng);
  auto c_i = random_vector(rng);
  auto l_p = random_vector(rng);
  auto l_r = random_vector(rng);
  auto l_i = random_vector(rng);
  LossConfig cfg;
  cfg.lambda_f = 2.0;
  cfg.alpha_margin = std::max(0.08, squared_distance(l_p, l_i) - squared_distance(l_p, l_r) + 0.5);
  const auto eval = [&](LossGradients* g) {
    const LossInputs in{pred, low, ref, c_p, c_i, l_p, l_r, l_i};
    return evaluate_losses(in, cfg, g).total;
  };
  LossGradients grads;
  eval(&grads);
  const auto f = [&] { return eval(nullptr); };
  std::vector<double> analytic, fd;
  const auto append = [&](const std::vector<double>& a, const std::vector<double>& b) {
    analytic.insert(analytic.end(), a.begin(), a.end());
    fd.insert(fd.end(), b.begin(), b.end());
  };
  append(grads.pred, central_difference(pred.values(), f));
  append(grads.c_p, central_difference(c_p, f));
  append(grads.c_i, central_difference(c_i, f));
  append(grads.l_p, central_difference(l_p, f));
  append(grads.l_r, central_difference(l_r, f));
  append(grads.l_i, central_difference(l_i, f));
  return relative_error(analytic, fd);
}

}  // namespace lumiswap::testing
