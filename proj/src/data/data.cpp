#include "lumiswap/data.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>

#include "lumiswap/error.hpp"
#include "lumiswap/image_io.hpp"

namespace lumiswap {

namespace fs = std::filesystem;

namespace {

std::map<std::string, fs::path> list_images(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw NotFoundError("dataset directory not found: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !has_image_extension(entry.path())) continue;
    out.emplace(entry.path().filename().string(), entry.path());
  }
  return out;
}

// (has number, number, name)
struct SortKey {
  bool numeric;
  unsigned long long number;
  std::string name;
};

SortKey sort_key(const std::string& name) {
  std::size_t digits = 0;
  while (digits < name.size() && std::isdigit(static_cast<unsigned char>(name[digits]))) ++digits;
  if (digits == 0 || digits > 18) return {false, 0, name};
  return {true, std::stoull(name.substr(0, digits)), name};
}

bool numeric_less(const std::string& a, const std::string& b) {
  const SortKey ka = sort_key(a), kb = sort_key(b);
  if (ka.numeric != kb.numeric) return ka.numeric;
  if (ka.number != kb.number) return ka.number < kb.number;
  return ka.name < kb.name;
}

void write_window(ImageRGB& dst, const ImageRGB& src, int y0, int x0, int size) {
  for (int y = y0; y < y0 + size; ++y) {
    const double* from = &src.values()[(static_cast<std::size_t>(y) * src.width() + x0) * 3];
    std::copy(from, from + static_cast<std::size_t>(size) * 3, &dst.at(y, x0, 0));
  }
}

}  // namespace

std::vector<fs::path> list_image_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& [name, path] : list_images(dir)) out.push_back(path);
  return out;
}

ImagePair make_image_pair(ImageRGB low, ImageRGB ref, std::string id) {
  require_same_shape(low, ref, ("pair " + id).c_str());
  return {std::move(low), std::move(ref), std::move(id)};
}

DatasetIndex index_lol(const fs::path& root, std::optional<int> train_count) {
  const auto low = list_images(root / "low");
  const auto high = list_images(root / "high");
  for (const auto& [name, path] : low) {
    if (!high.contains(name)) throw IntegrityError("unmatched file " + path.string() + ": no counterpart in high/");
  }
  for (const auto& [name, path] : high) {
    if (!low.contains(name)) throw IntegrityError("unmatched file " + path.string() + ": no counterpart in low/");
  }
  std::vector<PairFiles> all;
  all.reserve(low.size());
  for (const auto& [name, path] : low) all.push_back({name, path, high.at(name)});
  std::sort(all.begin(), all.end(), [](const PairFiles& a, const PairFiles& b) { return numeric_less(a.id, b.id); });

  const int total = static_cast<int>(all.size());
  const int n_train = train_count.value_or(std::min(kDefaultTrainCount, total));
  if (n_train < 0 || n_train > total) {
    throw ArgumentError("train count " + std::to_string(n_train) + " outside [0, " + std::to_string(total) + "]");
  }
  DatasetIndex index;
  index.train.assign(all.begin(), all.begin() + n_train);
  index.test.assign(all.begin() + n_train, all.end());
  return index;
}

std::vector<ImagePair> load_pairs(std::span<const PairFiles> files) {
  std::vector<ImagePair> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(make_image_pair(load_image(f.low), load_image(f.ref), f.id));
  return out;
}

DatasetSplit load_lol(const fs::path& root, std::optional<int> train_count) {
  const auto index = index_lol(root, train_count);
  return {load_pairs(index.train), load_pairs(index.test)};
}

Flip draw_flip(Rng& rng) {
  if (!rng.bernoulli(0.5)) return Flip::kNone;
  return rng.bernoulli(0.5) ? Flip::kHorizontal : Flip::kVertical;
}

ImagePair apply_flip(const ImagePair& pair, Flip flip) {
  switch (flip) {
    case Flip::kHorizontal:
      return {flip_horizontal(pair.low), flip_horizontal(pair.ref), pair.id};
    case Flip::kVertical:
      return {flip_vertical(pair.low), flip_vertical(pair.ref), pair.id};
    case Flip::kNone:
      break;
  }
  return pair;
}

ImagePair augment_flip(const ImagePair& pair, Rng& rng) { return apply_flip(pair, draw_flip(rng)); }

ImagePair augment_patch_swap(const ImagePair& pair, Rng& rng, const PatchSwapOptions& opts, PatchSwapRecord* record) {
  if (opts.size < 1) throw ArgumentError("patch size must be >= 1");
  if (!(opts.probability >= 0.0 && opts.probability <= 1.0)) throw ArgumentError("patch probability must be in [0,1]");
  require_same_shape(pair.low, pair.ref, "augment_patch_swap");
  PatchSwapRecord local;
  PatchSwapRecord& rec = record ? *record : local;
  rec = {};
  if (!rng.bernoulli(opts.probability)) return pair;
  const int h = pair.low.height(), w = pair.low.width();
  if (h < opts.size || w < opts.size) {
    rec.warning = "patch swap skipped for " + pair.id + ": " + std::to_string(h) + "x" + std::to_string(w) +
                  " smaller than " + std::to_string(opts.size);
    return pair;
  }
  rec.applied = true;
  rec.y = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - opts.size + 1)));
  rec.x = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - opts.size + 1)));
  ImagePair out = pair;
  write_window(out.low, pair.ref, rec.y, rec.x, opts.size);
  return out;
}

ImagePair random_crop(const ImagePair& pair, int size, Rng& rng) {
  const int h = pair.low.height(), w = pair.low.width();
  if (size < 1 || h < size || w < size) {
    throw DimensionError("cannot crop " + std::to_string(size) + " px from " + pair.id + " (" + std::to_string(h) +
                         "x" + std::to_string(w) + ")");
  }
  const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - size + 1)));
  const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - size + 1)));
  return {crop(pair.low, y, x, size, size), crop(pair.ref, y, x, size, size), pair.id};
}

std::size_t batches_per_epoch(std::size_t count, int batch_size) {
  if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
  return (count + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, int batch_size, std::uint64_t seed,
                                                    std::int64_t epoch) {
  if (count == 0) throw ArgumentError("cannot batch an empty split");
  const std::size_t n_batches = batches_per_epoch(count, batch_size);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out(n_batches);
  for (std::size_t i = 0; i < count; ++i) out[i / static_cast<std::size_t>(batch_size)].push_back(order[i]);
  return out;
}

std::vector<ImagePair> prepare_batch(std::span<const ImagePair> pairs, const AugmentOptions& opts, Rng& rng,
                                     std::vector<std::string>* warnings) {
  std::vector<ImagePair> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    ImagePair p = opts.crop ? random_crop(pair, *opts.crop, rng) : pair;
    if (opts.flip) p = augment_flip(p, rng);
    if (opts.patch_swap) {
      PatchSwapRecord rec;
      p = augment_patch_swap(p, rng, opts.swap, &rec);
      if (!rec.warning.empty() && warnings) warnings->push_back(rec.warning);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::vector<ImagePair>> make_batches(std::span<const ImagePair> split, int batch_size,
                                                 std::optional<int> crop, std::uint64_t seed, std::int64_t epoch) {
  const auto plan = epoch_batches(split.size(), batch_size, seed, epoch);
  AugmentOptions opts;
  opts.crop = crop;
  std::vector<std::vector<ImagePair>> out;
  out.reserve(plan.size());
  for (std::size_t b = 0; b < plan.size(); ++b) {
    std::vector<ImagePair> members;
    for (std::size_t i : plan[b]) members.push_back(split[i]);
    Rng rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(epoch)), b));
    out.push_back(prepare_batch(members, opts, rng));
  }
  return out;
}

}  // namespace lumiswap
