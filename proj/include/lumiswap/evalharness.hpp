#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lumiswap/data.hpp"
#include "lumiswap/metrics.hpp"
#include "lumiswap/model.hpp"

namespace lumiswap {

struct ImageScore {
  std::string id;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<ImageScore> rows;  // dataset order
  MetricReport mean;
};

using Enhancer = std::function<ImageRGB(const ImagePair&)>;

// Scores enhancer(pair) against pair.ref for every pair. Throws ArgumentError on an empty split.
EvalReport evaluate_with(std::span<const ImagePair> split, const Enhancer& enhancer);
// pred = enhance(low, ref, params): the ground truth doubles as the reference.
EvalReport evaluate(const ModelParams& params, std::span<const ImagePair> split);
EvalReport evaluate(const std::filesystem::path& checkpoint, std::span<const ImagePair> split);

// "id,psnr_db,ssim" rows with round-trip precision, then a "mean" row.
std::string to_csv(const EvalReport& report);
// Fixed-width table for terminals.
std::string to_table(const EvalReport& report);

// Image with low's hue and saturation and gt's value channel.
ImageRGB recombine_hsv(const ImageRGB& low, const ImageRGB& gt);

struct RecombinationRow {
  std::string id;
  double recombined_db = 0.0;
  double raw_low_db = 0.0;
};

struct RecombinationReport {
  std::vector<RecombinationRow> rows;
  double median_recombined_db = 0.0;
  double median_raw_low_db = 0.0;
};

RecombinationReport hsv_recombination_check(std::span<const ImagePair> split);
std::string to_table(const RecombinationReport& report);

double median(std::vector<double> values);

struct NamedImage {
  std::string id;
  ImageRGB image;
};

struct MultilevelRow {
  std::string ref_id;
  ImageRGB output;
  double output_mean_v = 0.0;
  double ref_mean_v = 0.0;
};

// One enhancement of `low` per reference, in the given order.
std::vector<MultilevelRow> enhance_each(const ModelParams& params, const ImageRGB& low,
                                       std::span<const NamedImage> refs);
// Same, but needs at least two references.
std::vector<MultilevelRow> multilevel_report(const ModelParams& params, const ImageRGB& low,
                                             std::span<const NamedImage> refs);
std::string to_table(std::span<const MultilevelRow> rows);

}  // namespace lumiswap
