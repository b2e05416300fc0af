#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "psg/ops.hpp"

namespace psg {

namespace {

// Gradient buffer of `t` if it participates in differentiation, else null.
double* grad_sink(Tensor t) {
  return t.requires_grad() ? t.mutable_grad().data() : nullptr;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <class Forward, class Derivative>
Tensor unary(const Tensor& x, Forward f, Derivative df) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return Tensor::record(
      x.shape(), std::move(out), {x},
      [x, df](std::span<const double> y, std::span<const double> dy) {
        double* dx = grad_sink(x);
        const auto xv = x.values();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * df(xv[i], y[i]);
      });
}

struct Axis {
  std::vector<std::size_t> lo, hi;
  std::vector<double> w_hi;
};

// align-corners=false source coordinates, clamped at the borders.
Axis resample_axis(std::size_t in, std::size_t out) {
  Axis a;
  a.lo.resize(out);
  a.hi.resize(out);
  a.w_hi.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    auto i0 = static_cast<std::size_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    a.lo[o] = i0;
    a.hi[o] = i1;
    a.w_hi[o] = i1 == i0 ? 0.0 : src - static_cast<double>(i0);
  }
  return a;
}

}  // namespace

Tensor maxpool2d(const Tensor& input, int kernel, int stride, int padding) {
  require_rank(input, 4, "maxpool2d");
  if (kernel < 1 || stride < 1 || padding < 0 || 2 * padding >= kernel + 1) {
    throw std::invalid_argument(
        "maxpool2d: need kernel >= 1, stride >= 1, 0 <= padding <= kernel/2");
  }
  const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2),
                    W = input.dim(3);
  const long span_h = static_cast<long>(H) + 2 * padding - kernel;
  const long span_w = static_cast<long>(W) + 2 * padding - kernel;
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("maxpool2d: window larger than padded input " +
                     shape_str(input.shape()));
  }
  const std::size_t Ho = static_cast<std::size_t>(span_h / stride + 1);
  const std::size_t Wo = static_cast<std::size_t>(span_w / stride + 1);
  const auto x = input.values();
  std::vector<double> out(B * C * Ho * Wo);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t plane = 0; plane < B * C; ++plane) {
    const std::size_t base = plane * H * W;
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      const long y0 = static_cast<long>(oy) * stride - padding;
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        const long x0 = static_cast<long>(ox) * stride - padding;
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_at = 0;
        bool found = false;
        for (long ky = 0; ky < kernel; ++ky) {
          const long iy = y0 + ky;
          if (iy < 0 || iy >= static_cast<long>(H)) continue;
          for (long kx = 0; kx < kernel; ++kx) {
            const long ix = x0 + kx;
            if (ix < 0 || ix >= static_cast<long>(W)) continue;
            const std::size_t at = base + static_cast<std::size_t>(iy) * W +
                                   static_cast<std::size_t>(ix);
            if (!found || x[at] > best) {
              best = x[at];
              best_at = at;
              found = true;
            }
          }
        }
        const std::size_t o = (plane * Ho + oy) * Wo + ox;
        out[o] = best;
        argmax[o] = best_at;
      }
    }
  }
  return Tensor::record(
      {B, C, Ho, Wo}, std::move(out), {input},
      [input, argmax = std::move(argmax)](std::span<const double>,
                                          std::span<const double> dy) {
        double* dx = grad_sink(input);
        for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax[o]] += dy[o];
      });
}

Tensor bilinear_resize(const Tensor& input, std::size_t out_h,
                       std::size_t out_w) {
  require_rank(input, 4, "bilinear_resize");
  if (out_h == 0 || out_w == 0) {
    throw ShapeError("bilinear_resize: empty output size");
  }
  const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2),
                    W = input.dim(3);
  const Axis ay = resample_axis(H, out_h);
  const Axis ax = resample_axis(W, out_w);
  const auto x = input.values();
  std::vector<double> out(B * C * out_h * out_w);
  for (std::size_t plane = 0; plane < B * C; ++plane) {
    const double* src = x.data() + plane * H * W;
    double* dst = out.data() + plane * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const double wy = ay.w_hi[oy];
      const double* r0 = src + ay.lo[oy] * W;
      const double* r1 = src + ay.hi[oy] * W;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const double wx = ax.w_hi[ox];
        const double top = (1.0 - wx) * r0[ax.lo[ox]] + wx * r0[ax.hi[ox]];
        const double bot = (1.0 - wx) * r1[ax.lo[ox]] + wx * r1[ax.hi[ox]];
        dst[oy * out_w + ox] = (1.0 - wy) * top + wy * bot;
      }
    }
  }
  return Tensor::record(
      {B, C, out_h, out_w}, std::move(out), {input},
      [input, ay, ax, H, W, out_h, out_w](std::span<const double>,
                                          std::span<const double> dy) {
        double* dx_all = grad_sink(input);
        const std::size_t planes = dy.size() / (out_h * out_w);
        for (std::size_t plane = 0; plane < planes; ++plane) {
          double* dx = dx_all + plane * H * W;
          const double* g = dy.data() + plane * out_h * out_w;
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            const double wy = ay.w_hi[oy];
            double* r0 = dx + ay.lo[oy] * W;
            double* r1 = dx + ay.hi[oy] * W;
            for (std::size_t ox = 0; ox < out_w; ++ox) {
              const double wx = ax.w_hi[ox];
              const double v = g[oy * out_w + ox];
              r0[ax.lo[ox]] += (1.0 - wy) * (1.0 - wx) * v;
              r0[ax.hi[ox]] += (1.0 - wy) * wx * v;
              r1[ax.lo[ox]] += wy * (1.0 - wx) * v;
              r1[ax.hi[ox]] += wy * wx * v;
            }
          }
        }
      });
}

Tensor bilinear_upsample(const Tensor& input, int scale) {
  require_rank(input, 4, "bilinear_upsample");
  if (scale < 1) throw std::invalid_argument("bilinear_upsample: scale must be >= 1");
  const auto s = static_cast<std::size_t>(scale);
  return bilinear_resize(input, input.dim(2) * s, input.dim(3) * s);
}

Tensor global_avg_pool(const Tensor& input) {
  require_rank(input, 4, "global_avg_pool");
  const std::size_t B = input.dim(0), C = input.dim(1);
  const std::size_t HW = input.dim(2) * input.dim(3);
  const auto x = input.values();
  std::vector<double> out(B * C);
  for (std::size_t plane = 0; plane < B * C; ++plane) {
    double acc = 0.0;
    for (std::size_t i = 0; i < HW; ++i) acc += x[plane * HW + i];
    out[plane] = acc / static_cast<double>(HW);
  }
  return Tensor::record(
      {B, C, 1, 1}, std::move(out), {input},
      [input, HW](std::span<const double>, std::span<const double> dy) {
        double* dx = grad_sink(input);
        const double inv = 1.0 / static_cast<double>(HW);
        for (std::size_t plane = 0; plane < dy.size(); ++plane) {
          const double g = dy[plane] * inv;
          for (std::size_t i = 0; i < HW; ++i) dx[plane * HW + i] += g;
        }
      });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() < 1 || weight.rank() != 2) {
    throw ShapeError("linear: expects weight out x in, got " +
                     shape_str(weight.shape()));
  }
  const std::size_t B = input.dim(0);
  const std::size_t in = input.numel() / std::max<std::size_t>(B, 1);
  const std::size_t out_f = weight.dim(0);
  if (weight.dim(1) != in) {
    throw ShapeError("linear: input " + shape_str(input.shape()) + " has " +
                     std::to_string(in) + " features but weight " +
                     shape_str(weight.shape()) + " expects " +
                     std::to_string(weight.dim(1)));
  }
  if (bias.defined() && bias.numel() != out_f) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) +
                     " does not match " + std::to_string(out_f) + " outputs");
  }
  const auto x = input.values();
  const auto w = weight.values();
  std::vector<double> out(B * out_f);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t o = 0; o < out_f; ++o) {
      double acc = bias.defined() ? bias.values()[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += w[o * in + i] * x[b * in + i];
      out[b * out_f + o] = acc;
    }
  }
  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor::record(
      {B, out_f}, std::move(out), std::move(inputs),
      [input, weight, bias, B, in, out_f](std::span<const double>,
                                          std::span<const double> dy) {
        double* dx = grad_sink(input);
        double* dw = grad_sink(weight);
        double* db = bias.defined() ? grad_sink(bias) : nullptr;
        const auto x = input.values();
        const auto w = weight.values();
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t o = 0; o < out_f; ++o) {
            const double g = dy[b * out_f + o];
            if (db) db[o] += g;
            if (dw) {
              for (std::size_t i = 0; i < in; ++i) dw[o * in + i] += g * x[b * in + i];
            }
            if (dx) {
              for (std::size_t i = 0; i < in; ++i) dx[b * in + i] += g * w[o * in + i];
            }
          }
        }
      });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::record(a.shape(), std::move(out), {a, b},
                        [a, b](std::span<const double>, std::span<const double> dy) {
                          if (double* da = grad_sink(a)) {
                            for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
                          }
                          if (double* db = grad_sink(b)) {
                            for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i];
                          }
                        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::record(a.shape(), std::move(out), {a, b},
                        [a, b](std::span<const double>, std::span<const double> dy) {
                          if (double* da = grad_sink(a)) {
                            for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
                          }
                          if (double* db = grad_sink(b)) {
                            for (std::size_t i = 0; i < dy.size(); ++i) db[i] -= dy[i];
                          }
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::record(a.shape(), std::move(out), {a, b},
                        [a, b](std::span<const double>, std::span<const double> dy) {
                          const auto av = a.values(), bv = b.values();
                          if (double* da = grad_sink(a)) {
                            for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * bv[i];
                          }
                          if (double* db = grad_sink(b)) {
                            for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * av[i];
                          }
                        });
}

Tensor scalar_mul(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor sum(const Tensor& x) {
  const auto xv = x.values();
  double acc = 0.0;
  for (double v : xv) acc += v;
  return Tensor::record({1}, {acc}, {x},
                        [x](std::span<const double>, std::span<const double> dy) {
                          double* dx = grad_sink(x);
                          for (std::size_t i = 0; i < x.numel(); ++i) dx[i] += dy[0];
                        });
}

Tensor mean(const Tensor& x) {
  const auto xv = x.values();
  if (xv.empty()) throw ShapeError("mean of an empty tensor");
  double acc = 0.0;
  for (double v : xv) acc += v;
  const double n = static_cast<double>(xv.size());
  return Tensor::record({1}, {acc / n}, {x},
                        [x, n](std::span<const double>, std::span<const double> dy) {
                          double* dx = grad_sink(x);
                          const double g = dy[0] / n;
                          for (std::size_t i = 0; i < x.numel(); ++i) dx[i] += g;
                        });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& ref = parts.front().shape();
  if (ref.size() < 2) throw ShapeError("concat needs rank >= 2, got " + shape_str(ref));
  const std::size_t outer = ref[0];
  std::size_t inner = 1;
  for (std::size_t d = 2; d < ref.size(); ++d) inner *= ref[d];
  std::size_t total_c = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size() && s[0] == ref[0];
    for (std::size_t d = 2; ok && d < s.size(); ++d) ok = s[d] == ref[d];
    if (!ok) {
      throw ShapeError("concat: " + shape_str(s) + " incompatible with " +
                       shape_str(ref));
    }
    total_c += s[1];
  }
  Shape out_shape = ref;
  out_shape[1] = total_c;
  std::vector<double> out(numel_of(out_shape));
  std::size_t c_off = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(c_off);
    const std::size_t block = p.dim(1) * inner;
    const auto v = p.values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.data() + o * block, block,
                  out.data() + (o * total_c + c_off) * inner);
    }
    c_off += p.dim(1);
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::record(
      std::move(out_shape), std::move(out), inputs,
      [inputs, offsets, outer, inner, total_c](std::span<const double>,
                                               std::span<const double> dy) {
        for (std::size_t k = 0; k < inputs.size(); ++k) {
          double* dx = grad_sink(inputs[k]);
          if (!dx) continue;
          const std::size_t block = inputs[k].dim(1) * inner;
          for (std::size_t o = 0; o < outer; ++o) {
            const double* src = dy.data() + (o * total_c + offsets[k]) * inner;
            for (std::size_t i = 0; i < block; ++i) dx[o * block + i] += src[i];
          }
        }
      });
}

Tensor select_column(const Tensor& x, std::size_t index) {
  require_rank(x, 2, "select_column");
  const std::size_t B = x.dim(0), K = x.dim(1);
  if (index >= K) {
    throw ShapeError("select_column: index " + std::to_string(index) +
                     " out of range for " + shape_str(x.shape()));
  }
  std::vector<double> out(B);
  for (std::size_t b = 0; b < B; ++b) out[b] = x.values()[b * K + index];
  return Tensor::record({B, 1}, std::move(out), {x},
                        [x, K, index](std::span<const double>, std::span<const double> dy) {
                          double* dx = grad_sink(x);
                          for (std::size_t b = 0; b < dy.size(); ++b) dx[b * K + index] += dy[b];
                        });
}

Tensor scale_per_sample(const Tensor& x, const Tensor& scales) {
  if (x.rank() < 1 || scales.numel() != x.dim(0)) {
    throw ShapeError("scale_per_sample: " + shape_str(scales.shape()) +
                     " scales for " + shape_str(x.shape()));
  }
  const std::size_t B = x.dim(0);
  const std::size_t per = x.numel() / std::max<std::size_t>(B, 1);
  const auto xv = x.values();
  const auto sv = scales.values();
  std::vector<double> out(xv.size());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < per; ++i) out[b * per + i] = sv[b] * xv[b * per + i];
  }
  return Tensor::record(
      x.shape(), std::move(out), {x, scales},
      [x, scales, B, per](std::span<const double>, std::span<const double> dy) {
        const auto xv = x.values();
        const auto sv = scales.values();
        double* dx = grad_sink(x);
        double* ds = grad_sink(scales);
        for (std::size_t b = 0; b < B; ++b) {
          double acc = 0.0;
          for (std::size_t i = 0; i < per; ++i) {
            const double g = dy[b * per + i];
            if (dx) dx[b * per + i] += g * sv[b];
            acc += g * xv[b * per + i];
          }
          if (ds) ds[b] += acc;
        }
      });
}

}  // namespace psg
