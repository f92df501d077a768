// AVX2 kernel variants. Compiled with -mavx2 only; dispatch checks CPU
// support at runtime before this code is ever called.
//
// Lane discipline matches the scalar reference: the 4 vector lanes hold the
// mod-4 partial sums, tails accumulate into lane (i mod 4), and lanes combine
// as (l0+l1)+(l2+l3). No FMA, so results are bit-equal to the scalar path.

#include <immintrin.h>

#include <cstddef>

namespace xinfid::kern::avx2_impl {

bool cpu_supported() {
#if defined(__GNUC__) || defined(__clang__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  const std::size_t n4 = n & ~std::size_t(3);
  for (; i < n4; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  for (std::size_t j = 0; i + j < n; ++j) lane[j] += a[i + j] * b[i + j];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  const std::size_t n4 = n & ~std::size_t(3);
  for (; i < n4; i += 4) {
    __m256d yy = _mm256_loadu_pd(y + i);
    yy = _mm256_add_pd(yy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, yy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace xinfid::kern::avx2_impl
