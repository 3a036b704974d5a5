#pragma once

#include <cstdint>
#include <filesystem>

#include "lumiswap/data.hpp"

// Procedural stand-in for LoL-style pairs: a bright scene of shapes and
// gradients, and a dark, noisy, gamma-compressed version of it.
namespace lumiswap::synthetic {

struct SceneOptions {
  int height = 128;
  int width = 128;
  double noise_sigma = 0.003;
  double min_scale = 0.10;  // low = scale · gt^gamma · gain_c + noise
  double max_scale = 0.30;
  double min_gamma = 1.5;
  double max_gamma = 2.5;
};

// Both images quantized to 8 bits, as if read back from PNG.
ImagePair make_pair(std::uint64_t seed, const SceneOptions& opts = {});
ImageRGB make_scene(Rng& rng, int height, int width);
ImageRGB darken(const ImageRGB& gt, Rng& rng, const SceneOptions& opts);

// Writes `<root>/low/<i>.png` and `<root>/high/<i>.png` for i = 1..count.
void write_dataset(const std::filesystem::path& root, int count, std::uint64_t seed, const SceneOptions& opts = {});

}  // namespace lumiswap::synthetic
