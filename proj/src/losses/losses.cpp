#include "lumiswap/losses.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "lumiswap/color.hpp"
#include "lumiswap/error.hpp"
#include "lumiswap/metrics.hpp"
#include "lumiswap/model.hpp"

namespace lumiswap {

namespace {

void require_equal_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw DimensionError(std::string(what) + ": lengths " + std::to_string(a) + " and " + std::to_string(b));
}

struct HsChannels {
  std::vector<double> h;
  std::vector<double> s;
};

HsChannels hs_channels(const ImageRGB& img) {
  HsChannels out;
  out.h.resize(img.pixel_count());
  out.s.resize(img.pixel_count());
  const auto px = img.values();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const Hsv p = rgb_to_hsv(px[3 * i], px[3 * i + 1], px[3 * i + 2]);
    out.h[i] = p.h;
    out.s[i] = p.s;
  }
  return out;
}

}  // namespace

void LossConfig::validate() const {
  if (!(lambda_f > 0.0) || !std::isfinite(lambda_f)) throw ConfigurationError("lambda must be finite and > 0");
  if (!(alpha_margin >= 0.0) || !std::isfinite(alpha_margin)) throw ConfigurationError("alpha must be finite and >= 0");
}

std::string to_json_line(std::int64_t step, const LossReport& r) {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["l_r"] = r.l_r;
  j["l_f_c"] = r.l_f_c;
  j["l_f_l"] = r.l_f_l;
  j["l_c_h"] = r.l_c_h;
  j["l_c_s"] = r.l_c_s;
  j["total"] = r.total;
  return j.dump();
}

double reconstruction_loss(const ImageRGB& pred, const ImageRGB& ref) {
  return reconstruction_loss_grad(pred, ref, 0.0, {});
}

double reconstruction_loss_grad(const ImageRGB& pred, const ImageRGB& ref, double weight, std::span<double> dpred) {
  require_same_shape(pred, ref, "reconstruction_loss");
  const auto p = pred.values();
  const auto r = ref.values();
  const double n = static_cast<double>(p.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - r[i]);
  if (!dpred.empty()) {
    const double scale = weight / n;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = p[i] - r[i];
      dpred[i] += d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
    }
  }
  return sum / n;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  require_equal_lengths(a.size(), b.size(), "squared_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double content_feature_loss(std::span<const double> c_p, std::span<const double> c_i) {
  return content_feature_loss_grad(c_p, c_i, 0.0, {}, {});
}

double content_feature_loss_grad(std::span<const double> c_p, std::span<const double> c_i, double weight,
                                 std::span<double> dc_p, std::span<double> dc_i) {
  const double dist = std::sqrt(squared_distance(c_p, c_i));
  if (dist > 0.0) {
    for (std::size_t k = 0; k < c_p.size(); ++k) {
      const double g = weight * (c_p[k] - c_i[k]) / dist;
      if (!dc_p.empty()) dc_p[k] += g;
      if (!dc_i.empty()) dc_i[k] -= g;
    }
  }
  return dist;
}

double luminance_feature_loss(std::span<const double> l_p, std::span<const double> l_r,
                              std::span<const double> l_i, double alpha) {
  return luminance_feature_loss_grad(l_p, l_r, l_i, alpha, 0.0, {}, {}, {});
}

double luminance_feature_loss_grad(std::span<const double> l_p, std::span<const double> l_r,
                                   std::span<const double> l_i, double alpha, double weight, std::span<double> dl_p,
                                   std::span<double> dl_r, std::span<double> dl_i) {
  if (alpha < 0.0) throw ArgumentError("luminance_feature_loss: alpha must be >= 0");
  const double inner = squared_distance(l_p, l_r) - squared_distance(l_p, l_i) + alpha;
  if (inner <= 0.0) return 0.0;  // rectifier; subgradient 0 at the kink
  for (std::size_t k = 0; k < l_p.size(); ++k) {
    // d/dl_p [ |l_p - l_r|² - |l_p - l_i|² ] = 2(l_i - l_r)
    if (!dl_p.empty()) dl_p[k] += weight * 2.0 * (l_i[k] - l_r[k]);
    if (!dl_r.empty()) dl_r[k] += weight * -2.0 * (l_p[k] - l_r[k]);
    if (!dl_i.empty()) dl_i[k] += weight * 2.0 * (l_p[k] - l_i[k]);
  }
  return inner;
}

double feature_loss(std::span<const double> c_p, std::span<const double> c_i, std::span<const double> l_p,
                    std::span<const double> l_r, std::span<const double> l_i, double alpha) {
  return content_feature_loss(c_p, c_i) + luminance_feature_loss(l_p, l_r, l_i, alpha);
}

double cosine_similarity_grad(std::span<const double> u, std::span<const double> v, double weight,
                              std::span<double> du) {
  require_equal_lengths(u.size(), v.size(), "cosine_similarity");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  const double nu = std::sqrt(uu);
  const double nv = std::sqrt(vv);
  const double denom = nu * nv;
  if (denom < kCosineFloor) {
    for (std::size_t i = 0; i < u.size(); ++i) du[i] += weight * v[i] / kCosineFloor;
    return std::clamp(dot / kCosineFloor, -1.0, 1.0);
  }
  const double cos = dot / denom;
  for (std::size_t i = 0; i < u.size(); ++i) du[i] += weight * (v[i] / denom - cos * u[i] / uu);
  return std::clamp(cos, -1.0, 1.0);
}

ContentConsistency content_consistency_loss(const ImageRGB& pred, const ImageRGB& low) {
  require_same_shape(pred, low, "content_consistency_loss");
  const auto p = hs_channels(pred);
  const auto i = hs_channels(low);
  return {1.0 - cosine_similarity(p.h, i.h), 1.0 - cosine_similarity(p.s, i.s)};
}

ContentConsistency content_consistency_loss_grad(const ImageRGB& pred, const ImageRGB& low, double weight_h,
                                                 double weight_s, std::span<double> dpred) {
  require_same_shape(pred, low, "content_consistency_loss");
  const auto p = hs_channels(pred);
  const auto i = hs_channels(low);
  const std::size_t n = pred.pixel_count();
  std::vector<double> dh(n, 0.0), ds(n, 0.0);
  // L = 1 − cos, so dL/dH_p = −dcos/dH_p
  const double cos_h = cosine_similarity_grad(p.h, i.h, -weight_h, dh);
  const double cos_s = cosine_similarity_grad(p.s, i.s, -weight_s, ds);
  const auto px = pred.values();
  for (std::size_t k = 0; k < n; ++k) {
    if (dh[k] == 0.0 && ds[k] == 0.0) continue;
    const HsJacobian jac = hs_jacobian(px[3 * k], px[3 * k + 1], px[3 * k + 2]);
    for (int c = 0; c < 3; ++c) dpred[3 * k + c] += dh[k] * jac.dh[c] + ds[k] * jac.ds[c];
  }
  return {1.0 - cos_h, 1.0 - cos_s};
}

double total_loss(const LossReport& parts, const LossConfig& cfg) {
  const std::pair<const char*, double> terms[] = {{"l_r", parts.l_r},     {"l_f_c", parts.l_f_c},
                                                  {"l_f_l", parts.l_f_l}, {"l_c_h", parts.l_c_h},
                                                  {"l_c_s", parts.l_c_s}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) throw NumericError(std::string("non-finite loss term ") + name);
  }
  return parts.l_r + cfg.lambda_f * (parts.l_f_c + parts.l_f_l) + parts.l_c_h + parts.l_c_s;
}

LossReport evaluate_losses(const LossInputs& in, const LossConfig& cfg, LossGradients* grads) {
  LossReport r;
  if (grads == nullptr) {
    r.l_r = reconstruction_loss(in.pred, in.ref);
    r.l_f_c = content_feature_loss(in.c_p, in.c_i);
    r.l_f_l = luminance_feature_loss(in.l_p, in.l_r, in.l_i, cfg.alpha_margin);
    const auto cc = content_consistency_loss(in.pred, in.low);
    r.l_c_h = cc.l_c_h;
    r.l_c_s = cc.l_c_s;
    r.total = total_loss(r, cfg);
    return r;
  }
  grads->pred.assign(in.pred.size(), 0.0);
  grads->c_p.assign(in.c_p.size(), 0.0);
  grads->c_i.assign(in.c_i.size(), 0.0);
  grads->l_p.assign(in.l_p.size(), 0.0);
  grads->l_r.assign(in.l_r.size(), 0.0);
  grads->l_i.assign(in.l_i.size(), 0.0);
  r.l_r = reconstruction_loss_grad(in.pred, in.ref, 1.0, grads->pred);
  r.l_f_c = content_feature_loss_grad(in.c_p, in.c_i, cfg.lambda_f, grads->c_p, grads->c_i);
  r.l_f_l = luminance_feature_loss_grad(in.l_p, in.l_r, in.l_i, cfg.alpha_margin, cfg.lambda_f, grads->l_p,
                                        grads->l_r, grads->l_i);
  const auto cc = content_consistency_loss_grad(in.pred, in.low, 1.0, 1.0, grads->pred);
  r.l_c_h = cc.l_c_h;
  r.l_c_s = cc.l_c_s;
  r.total = total_loss(r, cfg);
  return r;
}

double calibrate_margin(std::span<const std::pair<ImageRGB, ImageRGB>> pairs, const ModelParams& params) {
  if (pairs.empty()) throw ArgumentError("calibrate_margin: need at least one pair");
  double sum = 0.0;
  for (const auto& [low, ref] : pairs) {
    const auto a = luminance_of(low, params);
    const auto b = luminance_of(ref, params);
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d += (static_cast<double>(a[k]) - b[k]) * (static_cast<double>(a[k]) - b[k]);
    sum += d;
  }
  return sum / static_cast<double>(pairs.size());
}

}  // namespace lumiswap
