#include <algorithm>
#include <vector>

#include "psg/ops.hpp"

namespace psg {

namespace {

struct ConvGeometry {
  std::size_t batch, in_c, in_h, in_w;
  std::size_t out_c, k_h, k_w;
  std::size_t out_h, out_w;
  int stride, padding, dilation;

  std::size_t patch() const { return in_c * k_h * k_w; }
  std::size_t pixels() const { return out_h * out_w; }
  bool is_pointwise() const {
    return k_h == 1 && k_w == 1 && stride == 1 && padding == 0;
  }
};

// Valid output range [lo, hi) along one axis for kernel offset `off`.
inline void valid_range(long off, std::size_t in_extent, std::size_t out_extent,
                        int stride, std::size_t& lo, std::size_t& hi) {
  const long s = stride;
  long first = off < 0 ? (-off + s - 1) / s : 0;
  long last_in = static_cast<long>(in_extent) - 1 - off;
  long count = last_in < 0 ? 0 : last_in / s + 1;
  lo = static_cast<std::size_t>(std::min<long>(first, static_cast<long>(out_extent)));
  hi = static_cast<std::size_t>(std::clamp<long>(count, static_cast<long>(lo),
                                                 static_cast<long>(out_extent)));
}

// Rows of `col` index (channel, ki, kj); columns index output pixels.
void im2col(const ConvGeometry& g, const double* x, double* col) {
  const std::size_t P = g.pixels();
  for (std::size_t c = 0; c < g.in_c; ++c) {
    for (std::size_t ki = 0; ki < g.k_h; ++ki) {
      const long off_y = static_cast<long>(ki) * g.dilation - g.padding;
      for (std::size_t kj = 0; kj < g.k_w; ++kj) {
        const long off_x = static_cast<long>(kj) * g.dilation - g.padding;
        double* dst = col + ((c * g.k_h + ki) * g.k_w + kj) * P;
        std::size_t x_lo, x_hi;
        valid_range(off_x, g.in_w, g.out_w, g.stride, x_lo, x_hi);
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          double* row = dst + oy * g.out_w;
          const long iy = static_cast<long>(oy) * g.stride + off_y;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
            std::fill(row, row + g.out_w, 0.0);
            continue;
          }
          const double* src = x + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
          std::fill(row, row + x_lo, 0.0);
          for (std::size_t ox = x_lo; ox < x_hi; ++ox) {
            row[ox] = src[static_cast<long>(ox) * g.stride + off_x];
          }
          std::fill(row + x_hi, row + g.out_w, 0.0);
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* dx) {
  const std::size_t P = g.pixels();
  for (std::size_t c = 0; c < g.in_c; ++c) {
    for (std::size_t ki = 0; ki < g.k_h; ++ki) {
      const long off_y = static_cast<long>(ki) * g.dilation - g.padding;
      for (std::size_t kj = 0; kj < g.k_w; ++kj) {
        const long off_x = static_cast<long>(kj) * g.dilation - g.padding;
        const double* src = col + ((c * g.k_h + ki) * g.k_w + kj) * P;
        std::size_t x_lo, x_hi;
        valid_range(off_x, g.in_w, g.out_w, g.stride, x_lo, x_hi);
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride + off_y;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
          const double* row = src + oy * g.out_w;
          double* dst = dx + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
          for (std::size_t ox = x_lo; ox < x_hi; ++ox) {
            dst[static_cast<long>(ox) * g.stride + off_x] += row[ox];
          }
        }
      }
    }
  }
}

void transpose(const double* src, std::size_t rows, std::size_t cols,
               double* dst) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    const std::size_t r1 = std::min(rows, r0 + kBlock);
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding, int dilation) {
  if (input.rank() != 4 || weight.rank() != 4) {
    throw ShapeError("conv2d expects 4-d input and weight, got " +
                     shape_str(input.shape()) + " and " +
                     shape_str(weight.shape()));
  }
  if (stride < 1 || dilation < 1 || padding < 0) {
    throw std::invalid_argument("conv2d: stride and dilation must be >= 1, padding >= 0");
  }
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_c = input.dim(1);
  g.in_h = input.dim(2);
  g.in_w = input.dim(3);
  g.out_c = weight.dim(0);
  g.k_h = weight.dim(2);
  g.k_w = weight.dim(3);
  g.stride = stride;
  g.padding = padding;
  g.dilation = dilation;
  if (weight.dim(1) != g.in_c) {
    throw ShapeError("conv2d: input " + shape_str(input.shape()) +
                     " has " + std::to_string(g.in_c) +
                     " channels but weight " + shape_str(weight.shape()) +
                     " expects " + std::to_string(weight.dim(1)));
  }
  if (bias.defined() && bias.numel() != g.out_c) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) +
                     " does not match " + std::to_string(g.out_c) +
                     " output channels");
  }
  const long span_h = static_cast<long>(g.in_h) + 2 * padding -
                      static_cast<long>(dilation) * (static_cast<long>(g.k_h) - 1) - 1;
  const long span_w = static_cast<long>(g.in_w) + 2 * padding -
                      static_cast<long>(dilation) * (static_cast<long>(g.k_w) - 1) - 1;
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("conv2d: kernel larger than padded input " +
                     shape_str(input.shape()));
  }
  g.out_h = static_cast<std::size_t>(span_h / stride + 1);
  g.out_w = static_cast<std::size_t>(span_w / stride + 1);

  const std::size_t K = g.patch();
  const std::size_t P = g.pixels();
  const std::size_t in_plane = g.in_c * g.in_h * g.in_w;
  const std::size_t out_plane = g.out_c * P;
  std::vector<double> out(g.batch * out_plane);
  std::vector<double> col(g.is_pointwise() ? 0 : K * P);
  const double* x = input.values().data();
  const double* w = weight.values().data();
  for (std::size_t b = 0; b < g.batch; ++b) {
    double* y = out.data() + b * out_plane;
    if (bias.defined()) {
      const auto bv = bias.values();
      for (std::size_t co = 0; co < g.out_c; ++co) {
        std::fill(y + co * P, y + (co + 1) * P, bv[co]);
      }
    }
    const double* cols = x + b * in_plane;
    if (!g.is_pointwise()) {
      im2col(g, x + b * in_plane, col.data());
      cols = col.data();
    }
    kernels::gemm_accumulate(g.out_c, P, K, w, K, cols, P, y, P);
  }

  auto backward = [input, weight, bias, g](std::span<const double>,
                                           std::span<const double> dy_all) {
    Tensor in = input, wt = weight, bs = bias;
    const std::size_t K = g.patch();
    const std::size_t P = g.pixels();
    const std::size_t in_plane = g.in_c * g.in_h * g.in_w;
    const std::size_t out_plane = g.out_c * P;
    const bool need_x = in.requires_grad();
    const bool need_w = wt.requires_grad();
    const bool need_b = bs.defined() && bs.requires_grad();
    const double* x = in.values().data();
    std::vector<double> col(g.is_pointwise() ? 0 : K * P);
    std::vector<double> col_t(need_w ? K * P : 0);
    std::vector<double> dcol(need_x && !g.is_pointwise() ? K * P : 0);
    std::vector<double> w_t;
    if (need_x) {
      w_t.resize(K * g.out_c);
      transpose(wt.values().data(), g.out_c, K, w_t.data());
    }
    for (std::size_t b = 0; b < g.batch; ++b) {
      const double* dy = dy_all.data() + b * out_plane;
      if (need_b) {
        auto db = bs.mutable_grad();
        for (std::size_t co = 0; co < g.out_c; ++co) {
          double acc = 0.0;
          for (std::size_t p = 0; p < P; ++p) acc += dy[co * P + p];
          db[co] += acc;
        }
      }
      const double* cols = x + b * in_plane;
      if (need_w) {
        if (!g.is_pointwise()) {
          im2col(g, x + b * in_plane, col.data());
          cols = col.data();
        }
        transpose(cols, K, P, col_t.data());
        kernels::gemm_accumulate(g.out_c, K, P, dy, P, col_t.data(), K,
                                 wt.mutable_grad().data(), K);
      }
      if (need_x) {
        double* dx = in.mutable_grad().data() + b * in_plane;
        if (g.is_pointwise()) {
          kernels::gemm_accumulate(K, P, g.out_c, w_t.data(), g.out_c, dy, P,
                                   dx, P);
        } else {
          std::fill(dcol.begin(), dcol.end(), 0.0);
          kernels::gemm_accumulate(K, P, g.out_c, w_t.data(), g.out_c, dy, P,
                                   dcol.data(), P);
          col2im_add(g, dcol.data(), dx);
        }
      }
    }
  };

  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor::record({g.batch, g.out_c, g.out_h, g.out_w}, std::move(out),
                        std::move(inputs), std::move(backward));
}

}  // namespace psg
