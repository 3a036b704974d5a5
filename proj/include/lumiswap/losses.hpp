#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lumiswap/image.hpp"

namespace lumiswap {

class ModelParams;

struct LossConfig {
  double lambda_f = 2.0;       // weight of the feature loss
  double alpha_margin = 0.08;  // triplet margin of the luminance feature loss

  void validate() const;
};

struct LossReport {
  double l_r = 0.0;
  double l_f_c = 0.0;
  double l_f_l = 0.0;
  double l_c_h = 0.0;
  double l_c_s = 0.0;
  double total = 0.0;
};

// {"step":…,"l_r":…,"l_f_c":…,"l_f_l":…,"l_c_h":…,"l_c_s":…,"total":…}
std::string to_json_line(std::int64_t step, const LossReport& report);

// Mean absolute error over every pixel and channel.
double reconstruction_loss(const ImageRGB& pred, const ImageRGB& ref);
// Euclidean distance ‖c_p − c_i‖₂.
double content_feature_loss(std::span<const double> c_p, std::span<const double> c_i);
double squared_distance(std::span<const double> a, std::span<const double> b);
// [D(l_p, l_r) − D(l_p, l_i) + α]₊ with D the squared Euclidean distance.
double luminance_feature_loss(std::span<const double> l_p, std::span<const double> l_r,
                              std::span<const double> l_i, double alpha);
double feature_loss(std::span<const double> c_p, std::span<const double> c_i, std::span<const double> l_p,
                    std::span<const double> l_r, std::span<const double> l_i, double alpha);

struct ContentConsistency {
  double l_c_h = 0.0;
  double l_c_s = 0.0;
};
// 1 − cos(H_pred, H_low) and 1 − cos(S_pred, S_low) over whole-image channel vectors.
ContentConsistency content_consistency_loss(const ImageRGB& pred, const ImageRGB& low);

// L_r + λ(L_f_c + L_f_l) + L_c_H + L_c_S. Throws NumericError naming the
// first non-finite term.
double total_loss(const LossReport& parts, const LossConfig& cfg);

// Gradient variants: each returns the loss value and accumulates ∂L/∂input,
// scaled by `weight`, into the given spans (which may be empty to skip an input).
double reconstruction_loss_grad(const ImageRGB& pred, const ImageRGB& ref, double weight, std::span<double> dpred);
double content_feature_loss_grad(std::span<const double> c_p, std::span<const double> c_i, double weight,
                                 std::span<double> dc_p, std::span<double> dc_i);
double luminance_feature_loss_grad(std::span<const double> l_p, std::span<const double> l_r,
                                   std::span<const double> l_i, double alpha, double weight, std::span<double> dl_p,
                                   std::span<double> dl_r, std::span<double> dl_i);
ContentConsistency content_consistency_loss_grad(const ImageRGB& pred, const ImageRGB& low, double weight_h,
                                                 double weight_s, std::span<double> dpred);
// ∂cos(u,v)/∂u accumulated (scaled) into du.
double cosine_similarity_grad(std::span<const double> u, std::span<const double> v, double weight,
                              std::span<double> du);

// Everything one training sample contributes.
struct LossInputs {
  const ImageRGB& pred;
  const ImageRGB& low;  // the network input, after augmentation
  const ImageRGB& ref;
  std::span<const double> c_p, c_i;
  std::span<const double> l_p, l_r, l_i;
};

struct LossGradients {
  std::vector<double> pred;
  std::vector<double> c_p, c_i, l_p, l_r, l_i;
};

// Evaluates every term and the total; fills `grads` (d total / d input) when given.
LossReport evaluate_losses(const LossInputs& in, const LossConfig& cfg, LossGradients* grads);

// Mean over pairs of D(l_low, l_ref) under the given model.
double calibrate_margin(std::span<const std::pair<ImageRGB, ImageRGB>> pairs, const ModelParams& params);

}  // namespace lumiswap
