#include "lumiswap/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "lumiswap/color.hpp"
#include "lumiswap/error.hpp"
#include "lumiswap/image_io.hpp"

namespace lumiswap::synthetic {

namespace fs = std::filesystem;

namespace {

double quantize(double v) { return to_byte(v) / 255.0; }

std::array<double, 3> random_color(Rng& rng, double v_lo, double v_hi) {
  return hsv_to_rgb(Hsv{rng.uniform(), rng.uniform(0.2, 0.9), rng.uniform(v_lo, v_hi)});
}

double smoothstep(double edge, double d) {
  const double t = std::clamp(0.5 - d / edge, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

ImageRGB make_scene(Rng& rng, int height, int width) {
  ImageRGB img(height, width);
  const auto c0 = random_color(rng, 0.35, 0.8);
  const auto c1 = random_color(rng, 0.35, 0.8);
  const double angle = rng.uniform(0.0, 6.283185307179586);
  const double dx = std::cos(angle), dy = std::sin(angle);
  const double span = std::abs(dx) * width + std::abs(dy) * height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double t = std::clamp(0.5 + (dx * (x - width / 2.0) + dy * (y - height / 2.0)) / span, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = (1 - t) * c0[c] + t * c1[c];
    }

  const int shapes = 6 + static_cast<int>(rng.below(7));
  const double side = std::min(height, width);
  for (int s = 0; s < shapes; ++s) {
    const auto color = random_color(rng, 0.25, 0.95);
    const double cy = rng.uniform(0.0, height), cx = rng.uniform(0.0, width);
    const double ry = rng.uniform(0.06, 0.25) * side, rx = rng.uniform(0.06, 0.25) * side;
    const bool round = rng.bernoulli(0.5);
    const bool striped = rng.bernoulli(0.3);
    const double freq = rng.uniform(0.15, 0.5);
    const double edge = rng.uniform(1.0, 3.0);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double u = (x - cx) / rx, v = (y - cy) / ry;
        // signed distance in pixels, approximately
        const double d = round ? (std::sqrt(u * u + v * v) - 1.0) * std::min(rx, ry)
                               : std::max(std::abs(x - cx) - rx, std::abs(y - cy) - ry);
        double a = smoothstep(edge, d);
        if (a == 0.0) continue;
        const double shade = striped ? 0.75 + 0.25 * std::sin(freq * (x + y)) : 1.0;
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = (1 - a) * img.at(y, x, c) + a * color[c] * shade;
      }
  }
  for (double& v : img.values()) v = quantize(v);
  return img;
}

ImageRGB darken(const ImageRGB& gt, Rng& rng, const SceneOptions& opts) {
  const double scale = rng.uniform(opts.min_scale, opts.max_scale);
  const double gamma = rng.uniform(opts.min_gamma, opts.max_gamma);
  double gain[3];
  for (double& g : gain) g = rng.uniform(0.9, 1.1);
  ImageRGB low(gt.height(), gt.width());
  auto src = gt.values();
  auto dst = low.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double v = scale * std::pow(src[i], gamma) * gain[i % 3] + opts.noise_sigma * rng.normal();
    dst[i] = quantize(v);
  }
  return low;
}

ImagePair make_pair(std::uint64_t seed, const SceneOptions& opts) {
  Rng rng(mix_seed(seed, 0x5ce4e));
  ImageRGB gt = make_scene(rng, opts.height, opts.width);
  ImageRGB low = darken(gt, rng, opts);
  return {std::move(low), std::move(gt), "synthetic-" + std::to_string(seed)};
}

void write_dataset(const fs::path& root, int count, std::uint64_t seed, const SceneOptions& opts) {
  if (count < 1) throw ArgumentError("synthetic dataset needs at least one pair");
  fs::create_directories(root / "low");
  fs::create_directories(root / "high");
  for (int i = 1; i <= count; ++i) {
    const auto pair = make_pair(mix_seed(seed, static_cast<std::uint64_t>(i)), opts);
    const std::string name = std::to_string(i) + ".png";
    save_image(pair.low, root / "low" / name);
    save_image(pair.ref, root / "high" / name);
  }
}

}  // namespace lumiswap::synthetic
