#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lumiswap/tensor.hpp"

// Network building blocks. Everything here works on one sample at a time.
//
// Backward functions accumulate into parameter gradients (dweight, dbias) and
// overwrite input gradients. The kernels in this namespace are the production
// path (im2col + Eigen GEMM, OpenMP over fixed-size chunks so results do not
// depend on the thread count); lumiswap::kernels::reference holds plain loops
// used only to check them.
namespace lumiswap::kernels {

inline constexpr float kLeakySlope = 0.2f;

// Same-padded k×k convolution, stride 1. weight is [out][in][k][k].
void conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias,
                    int out_channels, int ksize, Tensor& out);
void conv2d_backward(const Tensor& in, std::span<const float> weight, int ksize, const Tensor& dout,
                     Tensor* din, std::span<float> dweight, std::span<float> dbias);

void leaky_relu_forward(Tensor& x);
// Uses the forward output: its sign equals the input's.
void leaky_relu_backward(const Tensor& out, Tensor& grad);

void sigmoid_forward(Tensor& x);
void sigmoid_backward(const Tensor& out, Tensor& grad);

// 2×2 max pool, stride 2. argmax stores the flat input index of each winner.
void maxpool2_forward(const Tensor& in, Tensor& out, std::vector<std::int32_t>& argmax);
void maxpool2_backward(const Tensor& dout, const std::vector<std::int32_t>& argmax, int in_h, int in_w,
                       Tensor& din);

void upsample2_forward(const Tensor& in, Tensor& out);
void upsample2_backward(const Tensor& dout, Tensor& din);

std::vector<float> global_avg_pool_forward(const Tensor& in);
void global_avg_pool_backward(std::span<const float> dout, int h, int w, Tensor& din);

// y = W x + b, W is [out][in].
void linear_forward(std::span<const float> x, std::span<const float> weight, std::span<const float> bias,
                    std::span<float> y);
void linear_backward(std::span<const float> x, std::span<const float> weight, std::span<const float> dy,
                     std::span<float> dx, std::span<float> dweight, std::span<float> dbias);

// Tiles a per-channel vector over an h×w grid, and the matching reduction.
void broadcast_forward(std::span<const float> vec, int h, int w, Tensor& out);
void broadcast_backward(const Tensor& dout, std::span<float> dvec);

void concat_channels(const Tensor& a, const Tensor& b, Tensor& out);
void split_channels(const Tensor& grad, int first_channels, Tensor& da, Tensor& db);

namespace reference {

void conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias,
                    int out_channels, int ksize, Tensor& out);
void conv2d_backward(const Tensor& in, std::span<const float> weight, int ksize, const Tensor& dout,
                     Tensor* din, std::span<float> dweight, std::span<float> dbias);
void maxpool2_forward(const Tensor& in, Tensor& out);
void upsample2_forward(const Tensor& in, Tensor& out);
void linear_forward(std::span<const float> x, std::span<const float> weight, std::span<const float> bias,
                    std::span<float> y);

}  // namespace reference

// Threads used by the OpenMP kernels (1 when built without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace lumiswap::kernels
