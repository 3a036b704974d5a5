#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lumiswap/image.hpp"
#include "lumiswap/rng.hpp"

namespace lumiswap {

struct ImagePair {
  ImageRGB low;
  ImageRGB ref;
  std::string id;
};

// Throws DimensionError unless low and ref share a shape.
ImagePair make_image_pair(ImageRGB low, ImageRGB ref, std::string id);

struct DatasetSplit {
  std::vector<ImagePair> train;
  std::vector<ImagePair> test;
};

// Files of one pair on disk; id is the shared filename.
struct PairFiles {
  std::string id;
  std::filesystem::path low;
  std::filesystem::path ref;
};

struct DatasetIndex {
  std::vector<PairFiles> train;
  std::vector<PairFiles> test;
};

inline constexpr int kDefaultTrainCount = 485;

// Image files (by extension) directly inside `dir`, sorted by file name.
// Throws NotFoundError if `dir` is not a directory.
std::vector<std::filesystem::path> list_image_files(const std::filesystem::path& dir);

// Pairs `<root>/low/X` with `<root>/high/X`, ordered by the number leading the
// filename (non-numeric names last, by name). The first `train_count` pairs
// (default 485, capped at the pair count) are the training split.
//
// Throws NotFoundError for a missing directory, IntegrityError naming the first
// unmatched file, ArgumentError for a train_count outside [0, pairs].
DatasetIndex index_lol(const std::filesystem::path& root, std::optional<int> train_count = std::nullopt);
std::vector<ImagePair> load_pairs(std::span<const PairFiles> files);
DatasetSplit load_lol(const std::filesystem::path& root, std::optional<int> train_count = std::nullopt);

enum class Flip { kNone, kHorizontal, kVertical };

Flip draw_flip(Rng& rng);
ImagePair apply_flip(const ImagePair& pair, Flip flip);
// No flip with probability ½, otherwise a horizontal or vertical flip of both images.
ImagePair augment_flip(const ImagePair& pair, Rng& rng);

struct PatchSwapOptions {
  int size = 100;
  double probability = 0.5;
};

struct PatchSwapRecord {
  bool applied = false;
  int y = 0;
  int x = 0;
  std::string warning;  // non-empty when skipped for size
};

// With the given probability, copies a size×size window of ref into low at the
// same position. Pairs smaller than the window are returned unchanged with a warning.
ImagePair augment_patch_swap(const ImagePair& pair, Rng& rng, const PatchSwapOptions& opts = {},
                             PatchSwapRecord* record = nullptr);

// Same square window in both images. Throws DimensionError if the pair is smaller.
ImagePair random_crop(const ImagePair& pair, int size, Rng& rng);

// Indices of every batch of one epoch. A fresh permutation per (seed, epoch);
// the last batch may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, int batch_size, std::uint64_t seed,
                                                    std::int64_t epoch);
std::size_t batches_per_epoch(std::size_t count, int batch_size);

struct AugmentOptions {
  std::optional<int> crop;
  bool flip = false;
  bool patch_swap = false;
  PatchSwapOptions swap;
};

// Crop, then flip, then patch swap, each per pair, in that order.
std::vector<ImagePair> prepare_batch(std::span<const ImagePair> pairs, const AugmentOptions& opts, Rng& rng,
                                     std::vector<std::string>* warnings = nullptr);

// One epoch of shuffled, optionally cropped batches.
std::vector<std::vector<ImagePair>> make_batches(std::span<const ImagePair> split, int batch_size,
                                                 std::optional<int> crop, std::uint64_t seed,
                                                 std::int64_t epoch = 0);

}  // namespace lumiswap
