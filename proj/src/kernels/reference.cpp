// Direct-loop versions of the kernels with no blocking, no BLAS and no
// threads. Slow; only the tests and the benchmark use them.
#include <algorithm>

#include "lumiswap/error.hpp"
#include "lumiswap/kernels.hpp"

namespace lumiswap::kernels::reference {

void conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias,
                    int out_channels, int ksize, Tensor& out) {
  if (weight.size() != static_cast<std::size_t>(out_channels) * in.channels * ksize * ksize) {
    throw DimensionError("reference conv2d: weight size");
  }
  const int pad = ksize / 2;
  out.reshape(out_channels, in.height, in.width);
  for (int co = 0; co < out_channels; ++co)
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < in.width; ++x) {
        double acc = bias[co];
        for (int ci = 0; ci < in.channels; ++ci)
          for (int ky = 0; ky < ksize; ++ky)
            for (int kx = 0; kx < ksize; ++kx) {
              const int sy = y + ky - pad;
              const int sx = x + kx - pad;
              if (sy < 0 || sy >= in.height || sx < 0 || sx >= in.width) continue;
              acc += static_cast<double>(weight[((co * in.channels + ci) * ksize + ky) * ksize + kx]) *
                     in.at(ci, sy, sx);
            }
        out.at(co, y, x) = static_cast<float>(acc);
      }
}

void conv2d_backward(const Tensor& in, std::span<const float> weight, int ksize, const Tensor& dout,
                     Tensor* din, std::span<float> dweight, std::span<float> dbias) {
  const int pad = ksize / 2;
  if (din != nullptr) din->reshape(in.channels, in.height, in.width);
  for (int co = 0; co < dout.channels; ++co) {
    double bacc = 0.0;
    for (int y = 0; y < dout.height; ++y)
      for (int x = 0; x < dout.width; ++x) bacc += dout.at(co, y, x);
    dbias[co] += static_cast<float>(bacc);
    for (int ci = 0; ci < in.channels; ++ci)
      for (int ky = 0; ky < ksize; ++ky)
        for (int kx = 0; kx < ksize; ++kx) {
          double acc = 0.0;
          const std::size_t widx = ((static_cast<std::size_t>(co) * in.channels + ci) * ksize + ky) * ksize + kx;
          for (int y = 0; y < in.height; ++y)
            for (int x = 0; x < in.width; ++x) {
              const int sy = y + ky - pad;
              const int sx = x + kx - pad;
              if (sy < 0 || sy >= in.height || sx < 0 || sx >= in.width) continue;
              const float g = dout.at(co, y, x);
              acc += static_cast<double>(g) * in.at(ci, sy, sx);
              if (din != nullptr) din->at(ci, sy, sx) += g * weight[widx];
            }
          dweight[widx] += static_cast<float>(acc);
        }
  }
}

void maxpool2_forward(const Tensor& in, Tensor& out) {
  out.reshape(in.channels, in.height / 2, in.width / 2);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        out.at(c, y, x) = std::max({in.at(c, 2 * y, 2 * x), in.at(c, 2 * y, 2 * x + 1), in.at(c, 2 * y + 1, 2 * x),
                                    in.at(c, 2 * y + 1, 2 * x + 1)});
}

void upsample2_forward(const Tensor& in, Tensor& out) {
  out.reshape(in.channels, in.height * 2, in.width * 2);
  for (int c = 0; c < out.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
}

void linear_forward(std::span<const float> x, std::span<const float> weight, std::span<const float> bias,
                    std::span<float> y) {
  for (std::size_t o = 0; o < y.size(); ++o) {
    double acc = bias[o];
    for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(weight[o * x.size() + i]) * x[i];
    y[o] = static_cast<float>(acc);
  }
}

}  // namespace lumiswap::kernels::reference
