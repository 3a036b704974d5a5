#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "lumiswap/color.hpp"
#include "lumiswap/error.hpp"
#include "lumiswap/losses.hpp"
#include "lumiswap/model.hpp"
#include "support/lcg_images.hpp"
#include "support/loss_gradcheck.hpp"

using namespace lumiswap;

namespace {

std::vector<double> v(std::initializer_list<double> xs) { return xs; }

ImageRGB filled(int h, int w, double value) { return ImageRGB(h, w, value); }

}  // namespace

TEST_CASE("reconstruction loss") {
  const auto [a, b] = testing::lcg_pair(5, 6, 7);
  CHECK(reconstruction_loss(a, a) == 0.0);

  ImageRGB shifted = a;
  for (double& x : shifted.values()) x += 0.1;
  CHECK(reconstruction_loss(shifted, a) == doctest::Approx(0.1).epsilon(1e-12));

  CHECK(reconstruction_loss(filled(4, 4, 0.0), filled(4, 4, 1.0)) == 1.0);
  CHECK(reconstruction_loss(a, b) == reconstruction_loss(b, a));
  CHECK_THROWS_AS(reconstruction_loss(filled(4, 4, 0.0), filled(4, 5, 0.0)), DimensionError);
}

TEST_CASE("content feature loss") {
  CHECK(content_feature_loss(v({1, 2}), v({1, 2})) == 0.0);
  CHECK(content_feature_loss(v({3, 4}), v({0, 0})) == 5.0);
  CHECK(content_feature_loss(v({1, 0}), v({0, 1})) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(content_feature_loss(v({1, 0}), v({1})), DimensionError);
}

TEST_CASE("luminance feature loss") {
  // l_p = l_r, D(l_p, l_i) = 0.5
  CHECK(luminance_feature_loss(v({0, 0}), v({0, 0}), v({0.5, 0.5}), 0.08) == 0.0);
  CHECK(luminance_feature_loss(v({0.3, -1}), v({0.3, -1}), v({0.3, -1}), 0.08) == doctest::Approx(0.08));
  CHECK(luminance_feature_loss(v({0, 0}), v({1, 0}), v({0, 0}), 0.08) == doctest::Approx(1.08));
  CHECK_THROWS_AS(luminance_feature_loss(v({0, 0}), v({1}), v({0, 0}), 0.08), DimensionError);
  CHECK_THROWS_AS(luminance_feature_loss(v({0}), v({1}), v({0}), -0.1), ArgumentError);

  SUBCASE("exactly zero once the negative is far enough") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 50; ++k) {
      const auto p = testing::random_vector(rng);
      const auto r = testing::random_vector(rng);
      const auto i = testing::random_vector(rng);
      const double dr = squared_distance(p, r);
      const double di = squared_distance(p, i);
      const double value = luminance_feature_loss(p, r, i, 0.08);
      if (dr + 0.08 <= di) {
        CHECK(value == 0.0);
      } else {
        CHECK(value == doctest::Approx(dr - di + 0.08).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("feature loss is the sum of its terms") {
  CHECK(feature_loss(v({1}), v({1}), v({0}), v({0}), v({1}), 0.08) == 0.0);
  CHECK(feature_loss(v({3, 4}), v({0, 0}), v({0, 0}), v({1, 0}), v({0, 0}), 0.08) == doctest::Approx(6.08));
  std::mt19937_64 rng(11);
  for (int k = 0; k < 10; ++k) {
    const auto c_p = testing::random_vector(rng, 20), c_i = testing::random_vector(rng, 20);
    const auto l_p = testing::random_vector(rng), l_r = testing::random_vector(rng), l_i = testing::random_vector(rng);
    double d = 0.0;
    for (int j = 0; j < 20; ++j) d += (c_p[j] - c_i[j]) * (c_p[j] - c_i[j]);
    double a = 0.0, b = 0.0;
    for (int j = 0; j < 16; ++j) {
      a += (l_p[j] - l_r[j]) * (l_p[j] - l_r[j]);
      b += (l_p[j] - l_i[j]) * (l_p[j] - l_i[j]);
    }
    const double expected = std::sqrt(d) + std::max(0.0, a - b + 0.08);
    CHECK(feature_loss(c_p, c_i, l_p, l_r, l_i, 0.08) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("content consistency loss") {
  const auto [low, other] = testing::lcg_pair(9, 8, 8);
  const auto same = content_consistency_loss(low, low);
  CHECK(std::abs(same.l_c_h) < 1e-12);
  CHECK(std::abs(same.l_c_s) < 1e-12);

  SUBCASE("V-only edits leave it unchanged") {
    auto hsv = rgb_to_hsv(low);
    for (double& x : hsv.v) x *= 0.37;
    const auto darker = hsv_to_rgb(hsv);
    const auto cc = content_consistency_loss(darker, low);
    CHECK(std::abs(cc.l_c_h) < 1e-9);
    CHECK(std::abs(cc.l_c_s) < 1e-9);
  }

  SUBCASE("orthogonal hue vectors") {
    // Left half red (h=0) in pred, right half green (h=1/3); low the other way round.
    ImageRGB pred(2, 2), lo(2, 2);
    for (int y = 0; y < 2; ++y) {
      pred.at(y, 0, 0) = 1.0;
      pred.at(y, 1, 1) = 1.0;
      lo.at(y, 1, 0) = 1.0;
      lo.at(y, 0, 1) = 1.0;
    }
    const auto cc = content_consistency_loss(pred, lo);
    CHECK(cc.l_c_h == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(cc.l_c_s) < 1e-12);
  }

  SUBCASE("range") {
    const auto cc = content_consistency_loss(other, low);
    CHECK(cc.l_c_h >= 0.0);
    CHECK(cc.l_c_h <= 2.0);
    CHECK(cc.l_c_s >= 0.0);
    CHECK(cc.l_c_s <= 2.0);
  }

  CHECK_THROWS_AS(content_consistency_loss(filled(4, 4, 0.2), filled(5, 4, 0.2)), DimensionError);
}

TEST_CASE("total loss") {
  LossConfig cfg;
  CHECK(cfg.lambda_f == 2.0);
  CHECK(cfg.alpha_margin == 0.08);
  CHECK(total_loss(LossReport{}, cfg) == 0.0);

  LossReport parts;
  parts.l_r = 1.0;
  parts.l_f_c = 0.25;
  parts.l_f_l = 0.75;
  parts.l_c_h = 0.5;
  parts.l_c_s = 0.5;
  CHECK(total_loss(parts, cfg) == 4.0);

  cfg.lambda_f = 0.0;
  CHECK(total_loss(parts, cfg) == 2.0);

  SUBCASE("linear in lambda with slope L_f") {
    LossConfig a, b;
    a.lambda_f = 1.5;
    b.lambda_f = 3.5;
    CHECK((total_loss(parts, b) - total_loss(parts, a)) / 2.0 == doctest::Approx(1.0));
  }

  SUBCASE("non-finite parts") {
    LossReport bad = parts;
    bad.l_f_l = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(total_loss(bad, LossConfig{}), NumericError);
    bad = parts;
    bad.l_c_s = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(total_loss(bad, LossConfig{}), doctest::Contains("l_c_s"), NumericError);
  }
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(LossConfig{}.validate());
  CHECK_THROWS_AS((LossConfig{0.0, 0.08}.validate()), ConfigurationError);
  CHECK_THROWS_AS((LossConfig{2.0, -0.01}.validate()), ConfigurationError);
  CHECK_THROWS_AS((LossConfig{std::nan(""), 0.08}.validate()), ConfigurationError);
}

TEST_CASE("json log line") {
  LossReport r{0.5, 0.25, 0.0, 0.125, 1.0, 2.0};
  CHECK(to_json_line(7, r) ==
        R"({"step":7,"l_r":0.5,"l_f_c":0.25,"l_f_l":0.0,"l_c_h":0.125,"l_c_s":1.0,"total":2.0})");
}

TEST_CASE("evaluate_losses agrees with the individual terms") {
  std::mt19937_64 rng(21);
  const ImageRGB pred = testing::separated_image(rng);
  const ImageRGB low = testing::separated_image(rng);
  const ImageRGB ref = testing::offset_image(pred, rng);
  const auto c_p = testing::random_vector(rng), c_i = testing::random_vector(rng);
  const auto l_p = testing::random_vector(rng), l_r = testing::random_vector(rng), l_i = testing::random_vector(rng);
  const LossConfig cfg;
  const LossInputs in{pred, low, ref, c_p, c_i, l_p, l_r, l_i};
  LossGradients grads;
  const auto with = evaluate_losses(in, cfg, &grads);
  const auto without = evaluate_losses(in, cfg, nullptr);
  CHECK(with.l_r == reconstruction_loss(pred, ref));
  CHECK(with.l_f_c == content_feature_loss(c_p, c_i));
  CHECK(with.l_f_l == luminance_feature_loss(l_p, l_r, l_i, 0.08));
  CHECK(with.l_c_h == doctest::Approx(content_consistency_loss(pred, low).l_c_h).epsilon(1e-12));
  CHECK(with.total == doctest::Approx(without.total).epsilon(1e-12));
  CHECK(grads.pred.size() == pred.size());
  CHECK(grads.l_r.size() == 16);
}

TEST_CASE("rectifier subgradient is zero at and below the kink") {
  const auto p = v({0, 0}), r = v({1, 0}), i = v({0, 2});
  // D(p,r) = 1, D(p,i) = 4: inner = 1 − 4 + 3 = 0 exactly
  std::vector<double> dp(2, 0.0), dr(2, 0.0), di(2, 0.0);
  CHECK(luminance_feature_loss_grad(p, r, i, 3.0, 1.0, dp, dr, di) == 0.0);
  CHECK(dp == v({0, 0}));
  CHECK(dr == v({0, 0}));
  CHECK(di == v({0, 0}));
}

TEST_CASE("analytic gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    CHECK(testing::check_reconstruction(seed) < 1e-3);
    CHECK(testing::check_content_feature(seed) < 1e-3);
    CHECK(testing::check_luminance_feature(seed) < 1e-3);
    CHECK(testing::check_content_consistency(seed, true) < 1e-3);
    CHECK(testing::check_content_consistency(seed, false) < 1e-3);
    CHECK(testing::check_total(seed) < 1e-3);
  }
}

TEST_CASE("calibrate_margin") {
  const ArchSpec arch{2, 4, 16, 4};
  const auto params = init_params(arch, 1);
  const auto [a, b] = testing::lcg_pair(4, 20, 24);
  const std::vector<std::pair<ImageRGB, ImageRGB>> same{{a, a}, {b, b}};
  CHECK(calibrate_margin(same, params) == 0.0);

  const std::vector<std::pair<ImageRGB, ImageRGB>> one{{a, b}};
  const auto la = luminance_of(a, params);
  const auto lb = luminance_of(b, params);
  double d = 0.0;
  for (std::size_t k = 0; k < la.size(); ++k) d += (double(la[k]) - lb[k]) * (double(la[k]) - lb[k]);
  CHECK(calibrate_margin(one, params) == doctest::Approx(d).epsilon(1e-12));

  const std::vector<std::pair<ImageRGB, ImageRGB>> two{{a, b}, {a, a}};
  CHECK(calibrate_margin(two, params) == doctest::Approx(d / 2).epsilon(1e-12));
  CHECK_THROWS_AS(calibrate_margin(std::vector<std::pair<ImageRGB, ImageRGB>>{}, params), ArgumentError);
}
