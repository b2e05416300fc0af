#include <cstring>

#include "psg/ops.hpp"

namespace psg::kernels {

namespace {

using v4d = double __attribute__((vector_size(32)));

inline v4d load4(const double* p) {
  v4d r;
  std::memcpy(&r, p, sizeof(r));
  return r;
}

inline void store4(double* p, v4d v) { std::memcpy(p, &v, sizeof(v)); }

// 4 x 8 register tile of C.
inline void tile_4x8(std::size_t k, const double* a, std::size_t lda,
                     const double* b, std::size_t ldb, double* c,
                     std::size_t ldc) {
  v4d c00 = load4(c), c01 = load4(c + 4);
  v4d c10 = load4(c + ldc), c11 = load4(c + ldc + 4);
  v4d c20 = load4(c + 2 * ldc), c21 = load4(c + 2 * ldc + 4);
  v4d c30 = load4(c + 3 * ldc), c31 = load4(c + 3 * ldc + 4);
  const double* a0 = a;
  const double* a1 = a + lda;
  const double* a2 = a + 2 * lda;
  const double* a3 = a + 3 * lda;
  for (std::size_t p = 0; p < k; ++p) {
    const v4d b0 = load4(b + p * ldb);
    const v4d b1 = load4(b + p * ldb + 4);
    const double x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
    c00 += x0 * b0;
    c01 += x0 * b1;
    c10 += x1 * b0;
    c11 += x1 * b1;
    c20 += x2 * b0;
    c21 += x2 * b1;
    c30 += x3 * b0;
    c31 += x3 * b1;
  }
  store4(c, c00);
  store4(c + 4, c01);
  store4(c + ldc, c10);
  store4(c + ldc + 4, c11);
  store4(c + 2 * ldc, c20);
  store4(c + 2 * ldc + 4, c21);
  store4(c + 3 * ldc, c30);
  store4(c + 3 * ldc + 4, c31);
}

inline void tile_1x8(std::size_t k, const double* a, const double* b,
                     std::size_t ldb, double* c) {
  v4d c0 = load4(c), c1 = load4(c + 4);
  for (std::size_t p = 0; p < k; ++p) {
    const double x = a[p];
    c0 += x * load4(b + p * ldb);
    c1 += x * load4(b + p * ldb + 4);
  }
  store4(c, c0);
  store4(c + 4, c1);
}

}  // namespace

void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k,
                     const double* a, std::size_t lda, const double* b,
                     std::size_t ldb, double* c, std::size_t ldc) {
  const std::size_t n8 = n - n % 8;
  const std::size_t m4 = m - m % 4;
  for (std::size_t j = 0; j < n8; j += 8) {
    std::size_t i = 0;
    for (; i < m4; i += 4) {
      tile_4x8(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    }
    for (; i < m; ++i) {
      tile_1x8(k, a + i * lda, b + j, ldb, c + i * ldc + j);
    }
  }
  if (n8 == n) return;
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * lda;
    double* ci = c + i * ldc;
    for (std::size_t j = n8; j < n; ++j) {
      double acc = ci[j];
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * b[p * ldb + j];
      ci[j] = acc;
    }
  }
}

}  // namespace psg::kernels
