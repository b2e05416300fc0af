#pragma once

#include <span>

#include "psg/tensor.hpp"

// Differentiable operations. Image tensors use batch x channels x height x
// width layout throughout.
namespace psg {

/// Cross-correlation (no kernel flip). `bias` may be undefined.
/// Output extent per spatial axis: floor((H + 2p - d(k-1) - 1) / s) + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride = 1, int padding = 0, int dilation = 1);

/// Per-window maximum. Out-of-bounds positions never win, so for non-negative
/// inputs this coincides with zero padding. Ties go to the first position in
/// row-major window order, which also receives the whole gradient.
Tensor maxpool2d(const Tensor& input, int kernel, int stride, int padding);

/// Bilinear resampling with align-corners=false (half-pixel centers).
Tensor bilinear_resize(const Tensor& input, std::size_t out_h,
                       std::size_t out_w);
Tensor bilinear_upsample(const Tensor& input, int scale);

/// B x C x H x W -> B x C x 1 x 1 by mean.
Tensor global_avg_pool(const Tensor& input);

/// y = x W^T + b with x flattened to B x in. Output B x out.
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& x, double factor);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Concatenates along axis 1 (channels for images, features for B x F).
Tensor concat(std::span<const Tensor> parts);

/// Column `index` of a B x K tensor as B x 1.
Tensor select_column(const Tensor& x, std::size_t index);

/// Multiplies every element of sample b of `x` by scales[b].
Tensor scale_per_sample(const Tensor& x, const Tensor& scales);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

namespace kernels {

/// C[M x N] += A[M x K] * B[K x N], all row-major with leading dimensions.
/// Each output element accumulates over k in ascending order.
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k,
                     const double* a, std::size_t lda, const double* b,
                     std::size_t ldb, double* c, std::size_t ldc);

}  // namespace kernels

}  // namespace psg
