#include "lumiswap/kernels.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lumiswap/error.hpp"

namespace lumiswap::kernels {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Column/row chunk sizes are fixed so the floating-point summation order never
// depends on how many threads run.
constexpr long kColumnChunk = 4096;
constexpr long kRowChunk = 32;

long chunk_count(long n, long chunk) { return (n + chunk - 1) / chunk; }

void require(bool ok, const char* what) {
  if (!ok) throw DimensionError(what);
}

// Output pixels are processed in chunks of whole rows. The chunking depends
// only on the image width, never on the thread count.
struct RowChunks {
  int rows_per_chunk;
  int count;
};

RowChunks row_chunks(int h, int w) {
  const int rpc = std::max(1, static_cast<int>(kColumnChunk / std::max(1, w)));
  return {rpc, (h + rpc - 1) / rpc};
}

// Lays out every k×k neighbourhood of output rows [y0, y1) as a column: rows
// of `cols` are (ci, ky, kx), columns are output pixels.
void im2col_rows(const Tensor& in, int ksize, int y0, int y1, float* cols) {
  const int pad = ksize / 2;
  const int h = in.height;
  const int w = in.width;
  const long n = static_cast<long>(y1 - y0) * w;
  const long rows = static_cast<long>(in.channels) * ksize * ksize;
  for (long r = 0; r < rows; ++r) {
    const int ci = static_cast<int>(r / (ksize * ksize));
    const int ky = static_cast<int>((r / ksize) % ksize) - pad;
    const int kx = static_cast<int>(r % ksize) - pad;
    const float* src = in.channel(ci);
    float* dst = cols + r * n;
    for (int y = y0; y < y1; ++y) {
      const int sy = y + ky;
      float* drow = dst + static_cast<long>(y - y0) * w;
      if (sy < 0 || sy >= h) {
        std::fill(drow, drow + w, 0.0f);
        continue;
      }
      const float* srow = src + static_cast<long>(sy) * w;
      const int x0 = std::max(0, -kx);
      const int x1 = std::min(w, w - kx);
      std::fill(drow, drow + x0, 0.0f);
      std::copy(srow + x0 + kx, srow + x1 + kx, drow + x0);
      std::fill(drow + x1, drow + w, 0.0f);
    }
  }
}

// Adjoint of im2col_rows, accumulating into din. Each input channel is owned
// by one iteration of the parallel loop.
void col2im_rows(const float* cols, int ksize, int y0, int y1, Tensor& din) {
  const int pad = ksize / 2;
  const int h = din.height;
  const int w = din.width;
  const long n = static_cast<long>(y1 - y0) * w;
  const int kk = ksize * ksize;
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < din.channels; ++ci) {
    float* dst = din.channel(ci);
    for (int k = 0; k < kk; ++k) {
      const int ky = k / ksize - pad;
      const int kx = k % ksize - pad;
      const float* src = cols + (static_cast<long>(ci) * kk + k) * n;
      for (int y = y0; y < y1; ++y) {
        const int sy = y + ky;
        if (sy < 0 || sy >= h) continue;
        const int x0 = std::max(0, -kx);
        const int x1 = std::min(w, w - kx);
        float* drow = dst + static_cast<long>(sy) * w;
        const float* srow = src + static_cast<long>(y - y0) * w;
        for (int x = x0; x < x1; ++x) drow[x + kx] += srow[x];
      }
    }
  }
}

thread_local std::vector<float> t_cols;
thread_local std::vector<float> t_dcols;

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

void conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias,
                    int out_channels, int ksize, Tensor& out) {
  const long k_rows = static_cast<long>(in.channels) * ksize * ksize;
  require(weight.size() == static_cast<std::size_t>(out_channels * k_rows), "conv2d: weight size");
  require(bias.size() == static_cast<std::size_t>(out_channels), "conv2d: bias size");
  const long hw = static_cast<long>(in.height) * in.width;
  const int w = in.width;
  out.reshape(out_channels, in.height, in.width);

  ConstMatMap wm(weight.data(), out_channels, k_rows);
  ConstMatMap input(in.data.data(), in.channels, hw);
  MatMap om(out.data.data(), out_channels, hw);
  const RowChunks chunks = row_chunks(in.height, w);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < chunks.count; ++j) {
    const int y0 = j * chunks.rows_per_chunk;
    const int y1 = std::min(in.height, y0 + chunks.rows_per_chunk);
    const long c0 = static_cast<long>(y0) * w;
    const long n = static_cast<long>(y1 - y0) * w;
    if (ksize == 1) {
      om.middleCols(c0, n).noalias() = wm * input.middleCols(c0, n);
    } else {
      t_cols.resize(static_cast<std::size_t>(k_rows * n));
      im2col_rows(in, ksize, y0, y1, t_cols.data());
      om.middleCols(c0, n).noalias() = wm * ConstMatMap(t_cols.data(), k_rows, n);
    }
    for (int co = 0; co < out_channels; ++co) {
      float* row = out.channel(co) + c0;
      const float b = bias[co];
      for (long i = 0; i < n; ++i) row[i] += b;
    }
  }
}

void conv2d_backward(const Tensor& in, std::span<const float> weight, int ksize, const Tensor& dout,
                     Tensor* din, std::span<float> dweight, std::span<float> dbias) {
  const int out_channels = dout.channels;
  const long k_rows = static_cast<long>(in.channels) * ksize * ksize;
  const long hw = static_cast<long>(in.height) * in.width;
  const int w = in.width;
  require(dout.height == in.height && dout.width == in.width, "conv2d_backward: spatial mismatch");
  require(weight.size() == static_cast<std::size_t>(out_channels * k_rows), "conv2d_backward: weight size");
  require(dweight.size() == weight.size(), "conv2d_backward: dweight size");
  require(dbias.size() == static_cast<std::size_t>(out_channels), "conv2d_backward: dbias size");

  ConstMatMap wm(weight.data(), out_channels, k_rows);
  ConstMatMap input(in.data.data(), in.channels, hw);
  ConstMatMap dom(dout.data.data(), out_channels, hw);
  MatMap dwm(dweight.data(), out_channels, k_rows);
  const long weight_row_chunks = chunk_count(out_channels, kRowChunk);

#pragma omp parallel for schedule(static)
  for (int co = 0; co < out_channels; ++co) {
    const float* g = dout.channel(co);
    double acc = 0.0;
    for (long i = 0; i < hw; ++i) acc += g[i];
    dbias[co] += static_cast<float>(acc);
  }

  if (din != nullptr) {
    din->reshape(in.channels, in.height, in.width);
  }

  // Column chunks run in order so dweight accumulates in a fixed sequence;
  // the work inside a chunk is split over fixed row blocks.
  const RowChunks chunks = row_chunks(in.height, w);
  for (int j = 0; j < chunks.count; ++j) {
    const int y0 = j * chunks.rows_per_chunk;
    const int y1 = std::min(in.height, y0 + chunks.rows_per_chunk);
    const long c0 = static_cast<long>(y0) * w;
    const long n = static_cast<long>(y1 - y0) * w;
    const float* col_ptr;
    if (ksize == 1) {
      col_ptr = nullptr;
    } else {
      t_cols.resize(static_cast<std::size_t>(k_rows * n));
      im2col_rows(in, ksize, y0, y1, t_cols.data());
      col_ptr = t_cols.data();
    }
    const auto dout_chunk = dom.middleCols(c0, n);
#pragma omp parallel for schedule(static)
    for (long r = 0; r < weight_row_chunks; ++r) {
      const long r0 = r * kRowChunk;
      const long rn = std::min<long>(kRowChunk, out_channels - r0);
      if (ksize == 1) {
        dwm.middleRows(r0, rn).noalias() += dout_chunk.middleRows(r0, rn) * input.middleCols(c0, n).transpose();
      } else {
        dwm.middleRows(r0, rn).noalias() +=
            dout_chunk.middleRows(r0, rn) * ConstMatMap(col_ptr, k_rows, n).transpose();
      }
    }
    if (din == nullptr) continue;
    MatMap dinm(din->data.data(), in.channels, hw);
    if (ksize == 1) {
      dinm.middleCols(c0, n).noalias() = wm.transpose() * dout_chunk;
    } else {
      t_dcols.resize(static_cast<std::size_t>(k_rows * n));
      MatMap dcols(t_dcols.data(), k_rows, n);
      const long k_chunks = chunk_count(k_rows, kRowChunk * 4);
#pragma omp parallel for schedule(static)
      for (long r = 0; r < k_chunks; ++r) {
        const long r0 = r * kRowChunk * 4;
        const long rn = std::min<long>(kRowChunk * 4, k_rows - r0);
        dcols.middleRows(r0, rn).noalias() = wm.middleCols(r0, rn).transpose() * dout_chunk;
      }
      col2im_rows(t_dcols.data(), ksize, y0, y1, *din);
    }
  }
}

void leaky_relu_forward(Tensor& x) {
  float* p = x.data.data();
  const long n = static_cast<long>(x.size());
#pragma omp parallel for simd schedule(static)
  for (long i = 0; i < n; ++i) p[i] = p[i] > 0.0f ? p[i] : kLeakySlope * p[i];
}

void leaky_relu_backward(const Tensor& out, Tensor& grad) {
  const float* o = out.data.data();
  float* g = grad.data.data();
  const long n = static_cast<long>(grad.size());
#pragma omp parallel for simd schedule(static)
  for (long i = 0; i < n; ++i) g[i] = o[i] > 0.0f ? g[i] : kLeakySlope * g[i];
}

void sigmoid_forward(Tensor& x) {
  float* p = x.data.data();
  const long n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) p[i] = 1.0f / (1.0f + std::exp(-p[i]));
}

void sigmoid_backward(const Tensor& out, Tensor& grad) {
  const float* o = out.data.data();
  float* g = grad.data.data();
  const long n = static_cast<long>(grad.size());
#pragma omp parallel for simd schedule(static)
  for (long i = 0; i < n; ++i) g[i] *= o[i] * (1.0f - o[i]);
}

void maxpool2_forward(const Tensor& in, Tensor& out, std::vector<std::int32_t>& argmax) {
  require(in.height % 2 == 0 && in.width % 2 == 0, "maxpool2: odd input side");
  const int oh = in.height / 2;
  const int ow = in.width / 2;
  out.reshape(in.channels, oh, ow);
  argmax.resize(out.size());
#pragma omp parallel for schedule(static)
  for (int c = 0; c < in.channels; ++c) {
    const float* src = in.channel(c);
    const std::int32_t base = static_cast<std::int32_t>(c * in.plane());
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        int best = (2 * y) * in.width + 2 * x;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (2 * y + dy) * in.width + 2 * x + dx;
            if (src[idx] > src[best]) best = idx;
          }
        const std::size_t o = c * out.plane() + static_cast<std::size_t>(y) * ow + x;
        out.data[o] = src[best];
        argmax[o] = base + best;
      }
    }
  }
}

void maxpool2_backward(const Tensor& dout, const std::vector<std::int32_t>& argmax, int in_h, int in_w,
                       Tensor& din) {
  din.reshape(dout.channels, in_h, in_w);
  // Pool windows do not overlap, so every input cell receives at most one write.
  const long n = static_cast<long>(dout.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) din.data[argmax[i]] = dout.data[i];
}

void upsample2_forward(const Tensor& in, Tensor& out) {
  out.reshape(in.channels, in.height * 2, in.width * 2);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < in.channels; ++c) {
    const float* src = in.channel(c);
    float* dst = out.channel(c);
    for (int y = 0; y < out.height; ++y) {
      const float* srow = src + static_cast<long>(y / 2) * in.width;
      float* drow = dst + static_cast<long>(y) * out.width;
      for (int x = 0; x < out.width; ++x) drow[x] = srow[x / 2];
    }
  }
}

void upsample2_backward(const Tensor& dout, Tensor& din) {
  require(dout.height % 2 == 0 && dout.width % 2 == 0, "upsample2_backward: odd side");
  din.reshape(dout.channels, dout.height / 2, dout.width / 2);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < dout.channels; ++c) {
    const float* src = dout.channel(c);
    float* dst = din.channel(c);
    for (int y = 0; y < din.height; ++y)
      for (int x = 0; x < din.width; ++x) {
        const long s = static_cast<long>(2 * y) * dout.width + 2 * x;
        dst[static_cast<long>(y) * din.width + x] = src[s] + src[s + 1] + src[s + dout.width] + src[s + dout.width + 1];
      }
  }
}

std::vector<float> global_avg_pool_forward(const Tensor& in) {
  std::vector<float> out(in.channels);
  const long hw = static_cast<long>(in.plane());
#pragma omp parallel for schedule(static)
  for (int c = 0; c < in.channels; ++c) {
    const float* p = in.channel(c);
    double acc = 0.0;
    for (long i = 0; i < hw; ++i) acc += p[i];
    out[c] = static_cast<float>(acc / static_cast<double>(hw));
  }
  return out;
}

void global_avg_pool_backward(std::span<const float> dout, int h, int w, Tensor& din) {
  din.reshape(static_cast<int>(dout.size()), h, w);
  const float scale = 1.0f / static_cast<float>(static_cast<long>(h) * w);
  for (int c = 0; c < din.channels; ++c) std::fill(din.channel(c), din.channel(c) + din.plane(), dout[c] * scale);
}

void linear_forward(std::span<const float> x, std::span<const float> weight, std::span<const float> bias,
                    std::span<float> y) {
  const long in = static_cast<long>(x.size());
  const long out = static_cast<long>(y.size());
  require(weight.size() == static_cast<std::size_t>(in * out) && bias.size() == y.size(), "linear: shape");
  ConstMatMap wm(weight.data(), out, in);
  Eigen::Map<const Eigen::VectorXf> xv(x.data(), in);
  Eigen::Map<const Eigen::VectorXf> bv(bias.data(), out);
  Eigen::Map<Eigen::VectorXf> yv(y.data(), out);
  yv.noalias() = wm * xv + bv;
}

void linear_backward(std::span<const float> x, std::span<const float> weight, std::span<const float> dy,
                     std::span<float> dx, std::span<float> dweight, std::span<float> dbias) {
  const long in = static_cast<long>(x.size());
  const long out = static_cast<long>(dy.size());
  require(dweight.size() == static_cast<std::size_t>(in * out) && dbias.size() == dy.size(), "linear_backward: shape");
  ConstMatMap wm(weight.data(), out, in);
  Eigen::Map<const Eigen::VectorXf> xv(x.data(), in);
  Eigen::Map<const Eigen::VectorXf> dyv(dy.data(), out);
  MatMap dwm(dweight.data(), out, in);
  dwm.noalias() += dyv * xv.transpose();
  for (long i = 0; i < out; ++i) dbias[i] += dy[i];
  if (!dx.empty()) {
    require(dx.size() == x.size(), "linear_backward: dx size");
    Eigen::Map<Eigen::VectorXf> dxv(dx.data(), in);
    dxv.noalias() = wm.transpose() * dyv;
  }
}

void broadcast_forward(std::span<const float> vec, int h, int w, Tensor& out) {
  out.reshape(static_cast<int>(vec.size()), h, w);
  for (int c = 0; c < out.channels; ++c) std::fill(out.channel(c), out.channel(c) + out.plane(), vec[c]);
}

void broadcast_backward(const Tensor& dout, std::span<float> dvec) {
  require(dvec.size() == static_cast<std::size_t>(dout.channels), "broadcast_backward: size");
  for (int c = 0; c < dout.channels; ++c) {
    const float* p = dout.channel(c);
    double acc = 0.0;
    for (std::size_t i = 0; i < dout.plane(); ++i) acc += p[i];
    dvec[c] = static_cast<float>(acc);
  }
}

void concat_channels(const Tensor& a, const Tensor& b, Tensor& out) {
  require(a.height == b.height && a.width == b.width, "concat_channels: spatial mismatch");
  out.reshape(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<long>(a.size()));
}

void split_channels(const Tensor& grad, int first_channels, Tensor& da, Tensor& db) {
  require(first_channels <= grad.channels, "split_channels: too many channels");
  da.reshape(first_channels, grad.height, grad.width);
  db.reshape(grad.channels - first_channels, grad.height, grad.width);
  std::copy(grad.data.begin(), grad.data.begin() + static_cast<long>(da.size()), da.data.begin());
  std::copy(grad.data.begin() + static_cast<long>(da.size()), grad.data.end(), db.data.begin());
}

}  // namespace lumiswap::kernels
