#include "lumiswap/evalharness.hpp"

#include <algorithm>
#include <cstdio>

#include "lumiswap/checkpoint.hpp"
#include "lumiswap/color.hpp"
#include "lumiswap/error.hpp"

namespace lumiswap {

namespace {

std::string format(const char* fmt, auto... args) {
  const int n = std::snprintf(nullptr, 0, fmt, args...);
  std::string out(static_cast<std::size_t>(n), '\0');
  std::snprintf(out.data(), out.size() + 1, fmt, args...);
  return out;
}

// Quotes ids holding CSV metacharacters.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

EvalReport evaluate_with(std::span<const ImagePair> split, const Enhancer& enhancer) {
  if (split.empty()) throw ArgumentError("evaluate: empty split");
  EvalReport report;
  report.rows.reserve(split.size());
  double sum_psnr = 0.0, sum_ssim = 0.0;
  for (const auto& pair : split) {
    const ImageRGB pred = enhancer(pair);
    const MetricReport m = compare(pred, pair.ref);
    report.rows.push_back({pair.id, m.psnr_db, m.ssim});
    sum_psnr += m.psnr_db;
    sum_ssim += m.ssim;
  }
  const double n = static_cast<double>(split.size());
  report.mean = {sum_psnr / n, sum_ssim / n};
  return report;
}

EvalReport evaluate(const ModelParams& params, std::span<const ImagePair> split) {
  return evaluate_with(split, [&params](const ImagePair& p) { return enhance(p.low, p.ref, params); });
}

EvalReport evaluate(const std::filesystem::path& checkpoint, std::span<const ImagePair> split) {
  if (split.empty()) throw ArgumentError("evaluate: empty split");
  return evaluate(load_model(checkpoint), split);
}

std::string to_csv(const EvalReport& report) {
  std::string out = "id,psnr_db,ssim\n";
  for (const auto& r : report.rows) out += csv_field(r.id) + format(",%.17g,%.17g\n", r.psnr_db, r.ssim);
  out += format("mean,%.17g,%.17g\n", report.mean.psnr_db, report.mean.ssim);
  return out;
}

std::string to_table(const EvalReport& report) {
  std::size_t width = 4;
  for (const auto& r : report.rows) width = std::max(width, r.id.size());
  const int w = static_cast<int>(width);
  std::string out = format("%-*s  %9s  %7s\n", w, "id", "PSNR(dB)", "SSIM");
  for (const auto& r : report.rows) out += format("%-*s  %9.3f  %7.4f\n", w, r.id.c_str(), r.psnr_db, r.ssim);
  out += format("%-*s  %9.3f  %7.4f\n", w, "mean", report.mean.psnr_db, report.mean.ssim);
  return out;
}

ImageRGB recombine_hsv(const ImageRGB& low, const ImageRGB& gt) {
  require_same_shape(low, gt, "recombine_hsv");
  ImageHSV a = rgb_to_hsv(low);
  const ImageHSV b = rgb_to_hsv(gt);
  a.v = b.v;
  return hsv_to_rgb(a);
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

RecombinationReport hsv_recombination_check(std::span<const ImagePair> split) {
  if (split.empty()) throw ArgumentError("hsv_recombination_check: empty split");
  RecombinationReport report;
  std::vector<double> rec, raw;
  for (const auto& pair : split) {
    const double r = psnr(recombine_hsv(pair.low, pair.ref), pair.ref);
    const double l = psnr(pair.low, pair.ref);
    report.rows.push_back({pair.id, r, l});
    rec.push_back(r);
    raw.push_back(l);
  }
  report.median_recombined_db = median(rec);
  report.median_raw_low_db = median(raw);
  return report;
}

std::string to_table(const RecombinationReport& report) {
  std::size_t width = 6;
  for (const auto& r : report.rows) width = std::max(width, r.id.size());
  const int w = static_cast<int>(width);
  std::string out = format("%-*s  %13s  %11s\n", w, "id", "recombined", "raw_low");
  for (const auto& r : report.rows) {
    out += format("%-*s  %13.3f  %11.3f\n", w, r.id.c_str(), r.recombined_db, r.raw_low_db);
  }
  out += format("%-*s  %13.3f  %11.3f\n", w, "median", report.median_recombined_db, report.median_raw_low_db);
  return out;
}

std::vector<MultilevelRow> multilevel_report(const ModelParams& params, const ImageRGB& low,
                                             std::span<const NamedImage> refs) {
  if (refs.size() < 2) throw ArgumentError("multilevel_report needs at least two references");
  return enhance_each(params, low, refs);
}

std::vector<MultilevelRow> enhance_each(const ModelParams& params, const ImageRGB& low,
                                       std::span<const NamedImage> refs) {
  std::vector<MultilevelRow> rows;
  rows.reserve(refs.size());
  for (const auto& ref : refs) {
    ImageRGB out = enhance(low, ref.image, params);
    const double v = mean_value_channel(out);
    rows.push_back({ref.id, std::move(out), v, mean_value_channel(ref.image)});
  }
  return rows;
}

std::string to_table(std::span<const MultilevelRow> rows) {
  std::size_t width = 3;
  for (const auto& r : rows) width = std::max(width, r.ref_id.size());
  const int w = static_cast<int>(width);
  std::string out = format("%-*s  %10s  %13s\n", w, "ref", "ref_mean_v", "output_mean_v");
  for (const auto& r : rows) {
    out += format("%-*s  %10.4f  %13.4f\n", w, r.ref_id.c_str(), r.ref_mean_v, r.output_mean_v);
  }
  return out;
}

}  // namespace lumiswap
