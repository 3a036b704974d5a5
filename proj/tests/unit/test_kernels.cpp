#include <cmath>
#include <random>
#include <tuple>

#include "doctest.h"
#include "lumiswap/kernels.hpp"

using namespace lumiswap;
namespace k = lumiswap::kernels;

namespace {

Tensor random_tensor(int c, int h, int w, std::mt19937& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  Tensor t(c, h, w);
  for (auto& v : t.data) v = n(rng);
  return t;
}

std::vector<float> random_vec(std::size_t n, std::mt19937& rng) {
  std::normal_distribution<float> d(0.0f, 0.3f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a.data[i]) * b.data[i];
  return s;
}

void check_close(std::span<const float> a, std::span<const float> b, double tol) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]) / (1.0 + std::abs(b[i])));
  CHECK(worst < tol);
}

struct ConvCase {
  int cin, cout, h, w, ksize;
};

}  // namespace

TEST_CASE("conv2d forward/backward agree with the direct-loop reference") {
  std::mt19937 rng(1);
  // The last shapes span several row chunks.
  for (const ConvCase& cc : {ConvCase{3, 8, 9, 7, 3}, ConvCase{5, 4, 6, 6, 1}, ConvCase{2, 3, 40, 300, 3},
                             ConvCase{4, 40, 20, 9000, 1}}) {
    CAPTURE(cc.h);
    CAPTURE(cc.w);
    const Tensor in = random_tensor(cc.cin, cc.h, cc.w, rng);
    const auto weight = random_vec(static_cast<std::size_t>(cc.cout) * cc.cin * cc.ksize * cc.ksize, rng);
    const auto bias = random_vec(cc.cout, rng);
    Tensor fast, ref;
    k::conv2d_forward(in, weight, bias, cc.cout, cc.ksize, fast);
    k::reference::conv2d_forward(in, weight, bias, cc.cout, cc.ksize, ref);
    CHECK(fast.same_shape(ref));
    check_close(fast.data, ref.data, 1e-4);

    const Tensor dout = random_tensor(cc.cout, cc.h, cc.w, rng);
    std::vector<float> dw_fast(weight.size(), 0.5f), db_fast(bias.size(), 0.25f);
    std::vector<float> dw_ref(weight.size(), 0.5f), db_ref(bias.size(), 0.25f);
    Tensor din_fast, din_ref;
    k::conv2d_backward(in, weight, cc.ksize, dout, &din_fast, dw_fast, db_fast);
    k::reference::conv2d_backward(in, weight, cc.ksize, dout, &din_ref, dw_ref, db_ref);
    check_close(din_fast.data, din_ref.data, 1e-4);
    check_close(dw_fast, dw_ref, 1e-3);
    check_close(db_fast, db_ref, 1e-3);
  }
}

TEST_CASE("reference conv backward is the adjoint of its forward") {
  std::mt19937 rng(2);
  const Tensor x = random_tensor(3, 6, 5, rng);
  const auto weight = random_vec(4 * 3 * 9, rng);
  const std::vector<float> zero_bias(4, 0.0f);
  Tensor y;
  k::reference::conv2d_forward(x, weight, zero_bias, 4, 3, y);
  const Tensor g = random_tensor(4, 6, 5, rng);
  std::vector<float> dw(weight.size(), 0.0f), db(4, 0.0f);
  Tensor dx;
  k::reference::conv2d_backward(x, weight, 3, g, &dx, dw, db);
  // <conv(x), g> = <x, conv^T(g)> and, by linearity in the weights, = <w, dw>
  const double lhs = dot(y, g);
  CHECK(dot(x, dx) == doctest::Approx(lhs).epsilon(1e-4));
  double wdw = 0.0;
  for (std::size_t i = 0; i < weight.size(); ++i) wdw += static_cast<double>(weight[i]) * dw[i];
  CHECK(wdw == doctest::Approx(lhs).epsilon(1e-4));
}

TEST_CASE("kernel results do not depend on the thread count") {
  std::mt19937 rng(3);
  const Tensor in = random_tensor(6, 64, 96, rng);
  const auto weight = random_vec(10 * 6 * 9, rng);
  const auto bias = random_vec(10, rng);
  const Tensor dout = random_tensor(10, 64, 96, rng);
  const int saved = k::max_threads();

  auto run = [&](int threads) {
    k::set_threads(threads);
    Tensor out, din;
    std::vector<float> dw(weight.size(), 0.0f), db(10, 0.0f);
    k::conv2d_forward(in, weight, bias, 10, 3, out);
    k::conv2d_backward(in, weight, 3, dout, &din, dw, db);
    return std::make_tuple(out, din, dw, db);
  };
  const auto one = run(1);
  const auto four = run(4);
  k::set_threads(saved);
  CHECK(std::get<0>(one) == std::get<0>(four));
  CHECK(std::get<1>(one) == std::get<1>(four));
  CHECK(std::get<2>(one) == std::get<2>(four));
  CHECK(std::get<3>(one) == std::get<3>(four));
}

TEST_CASE("pooling and upsampling") {
  std::mt19937 rng(4);
  const Tensor x = random_tensor(3, 8, 6, rng);
  Tensor pooled, ref;
  std::vector<std::int32_t> argmax;
  k::maxpool2_forward(x, pooled, argmax);
  k::reference::maxpool2_forward(x, ref);
  CHECK(pooled == ref);

  const Tensor g = random_tensor(3, 4, 3, rng);
  Tensor dx;
  k::maxpool2_backward(g, argmax, 8, 6, dx);
  // gradient lands on the winners only and sums are preserved
  double gs = 0.0, dxs = 0.0;
  for (float v : g.data) gs += v;
  for (float v : dx.data) dxs += v;
  CHECK(dxs == doctest::Approx(gs));
  for (std::size_t i = 0; i < argmax.size(); ++i) CHECK(dx.data[argmax[i]] == g.data[i]);

  Tensor up, up_ref;
  k::upsample2_forward(x, up);
  k::reference::upsample2_forward(x, up_ref);
  CHECK(up == up_ref);
  const Tensor gu = random_tensor(3, 16, 12, rng);
  Tensor dxu;
  k::upsample2_backward(gu, dxu);
  CHECK(dot(up, gu) == doctest::Approx(dot(x, dxu)).epsilon(1e-5));

  Tensor odd(1, 3, 4);
  CHECK_THROWS(k::maxpool2_forward(odd, pooled, argmax));
}

TEST_CASE("linear, pooling, broadcast and activations") {
  std::mt19937 rng(5);
  const auto x = random_vec(7, rng);
  const auto w = random_vec(5 * 7, rng);
  const auto b = random_vec(5, rng);
  std::vector<float> y(5), y_ref(5);
  k::linear_forward(x, w, b, y);
  k::reference::linear_forward(x, w, b, y_ref);
  check_close(y, y_ref, 1e-6);

  const auto dy = random_vec(5, rng);
  std::vector<float> dx(7), dw(w.size(), 0.0f), db(5, 0.0f);
  k::linear_backward(x, w, dy, dx, dw, db);
  double lhs = 0.0, rhs = 0.0;
  for (int o = 0; o < 5; ++o) lhs += static_cast<double>(y[o] - b[o]) * dy[o];
  for (int i = 0; i < 7; ++i) rhs += static_cast<double>(x[i]) * dx[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5));

  const Tensor t = random_tensor(4, 5, 3, rng);
  const auto pooled = k::global_avg_pool_forward(t);
  for (int c = 0; c < 4; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.plane(); ++i) s += t.channel(c)[i];
    CHECK(pooled[c] == doctest::Approx(s / 15.0).epsilon(1e-6));
  }

  Tensor map;
  k::broadcast_forward(pooled, 2, 3, map);
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 6; ++i) CHECK(map.channel(c)[i] == pooled[c]);
  std::vector<float> dvec(4);
  Tensor ones(4, 2, 3, 1.0f);
  k::broadcast_backward(ones, dvec);
  for (float v : dvec) CHECK(v == 6.0f);

  Tensor act = random_tensor(2, 3, 3, rng);
  const Tensor pre = act;
  k::leaky_relu_forward(act);
  Tensor grad(2, 3, 3, 1.0f);
  k::leaky_relu_backward(act, grad);
  for (std::size_t i = 0; i < pre.size(); ++i) {
    CHECK(act.data[i] == (pre.data[i] > 0 ? pre.data[i] : k::kLeakySlope * pre.data[i]));
    CHECK(grad.data[i] == (pre.data[i] > 0 ? 1.0f : k::kLeakySlope));
  }

  Tensor s = pre;
  k::sigmoid_forward(s);
  Tensor sg(2, 3, 3, 1.0f);
  k::sigmoid_backward(s, sg);
  for (std::size_t i = 0; i < pre.size(); ++i) {
    const double e = 1e-3;
    const double fd = (1.0 / (1.0 + std::exp(-(pre.data[i] + e))) - 1.0 / (1.0 + std::exp(-(pre.data[i] - e)))) / (2 * e);
    CHECK(sg.data[i] == doctest::Approx(fd).epsilon(1e-4));
  }

  Tensor a = random_tensor(2, 3, 3, rng), c2 = random_tensor(3, 3, 3, rng), cat, da, dc;
  k::concat_channels(a, c2, cat);
  k::split_channels(cat, 2, da, dc);
  CHECK(da == a);
  CHECK(dc == c2);
}
