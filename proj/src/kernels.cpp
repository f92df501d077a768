#include "xinfid/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>

namespace xinfid::kern {

namespace scalar {

// Four-lane accumulation: lane j collects indices congruent to j mod 4,
// lanes combine as (l0+l1)+(l2+l3). SIMD variants reproduce this exactly.
double dot(const double* a, const double* b, std::size_t n) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  std::size_t i = 0;
  const std::size_t n4 = n & ~std::size_t(3);
  for (; i < n4; i += 4) {
    acc0 += a[i] * b[i];
    acc1 += a[i + 1] * b[i + 1];
    acc2 += a[i + 2] * b[i + 2];
    acc3 += a[i + 3] * b[i + 3];
  }
  double lane[4] = {acc0, acc1, acc2, acc3};
  for (std::size_t j = 0; i + j < n; ++j) lane[j] += a[i + j] * b[i + j];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace scalar

#if defined(__aarch64__)
#include <arm_neon.h>
namespace neon_impl {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  const std::size_t n4 = n & ~std::size_t(3);
  for (; i < n4; i += 4) {
    acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double lane[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1),
                    vgetq_lane_f64(acc23, 0), vgetq_lane_f64(acc23, 1)};
  for (std::size_t j = 0; i + j < n; ++j) lane[j] += a[i + j] * b[i + j];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  const std::size_t n2 = n & ~std::size_t(1);
  for (; i < n2; i += 2) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace neon_impl
#endif

#if defined(XINFID_HAVE_AVX2_TU)
namespace avx2_impl {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
bool cpu_supported();
}  // namespace avx2_impl
#endif

namespace {

struct Vtable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  Backend which;
};

constexpr Vtable kScalar{&scalar::dot, &scalar::axpy, Backend::scalar};
#if defined(XINFID_HAVE_AVX2_TU)
constexpr Vtable kAvx2{&avx2_impl::dot, &avx2_impl::axpy, Backend::avx2};
#endif
#if defined(__aarch64__)
constexpr Vtable kNeon{&neon_impl::dot, &neon_impl::axpy, Backend::neon};
#endif

const Vtable* resolve(Backend b) {
  switch (b) {
    case Backend::scalar:
      return &kScalar;
    case Backend::avx2:
#if defined(XINFID_HAVE_AVX2_TU)
      if (avx2_impl::cpu_supported()) return &kAvx2;
#endif
      return nullptr;
    case Backend::neon:
#if defined(__aarch64__)
      return &kNeon;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const Vtable* auto_select() {
  if (const char* env = std::getenv("XINFID_SIMD")) {
    std::string s(env);
    if (s == "scalar") return &kScalar;
    if (s == "avx2") {
      if (const Vtable* v = resolve(Backend::avx2)) return v;
      throw std::runtime_error("XINFID_SIMD=avx2 requested but AVX2 is unavailable");
    }
    if (s == "neon") {
      if (const Vtable* v = resolve(Backend::neon)) return v;
      throw std::runtime_error("XINFID_SIMD=neon requested but NEON is unavailable");
    }
    // anything else (incl. "auto") falls through to detection
  }
#if defined(XINFID_HAVE_AVX2_TU)
  if (avx2_impl::cpu_supported()) return &kAvx2;
#endif
#if defined(__aarch64__)
  return &kNeon;
#else
  return &kScalar;
#endif
}

std::atomic<const Vtable*> g_active{nullptr};

const Vtable* active() {
  const Vtable* v = g_active.load(std::memory_order_acquire);
  if (!v) {
    v = auto_select();
    g_active.store(v, std::memory_order_release);
  }
  return v;
}

}  // namespace

Backend active_backend() { return active()->which; }

void set_backend(Backend b) {
  const Vtable* v = resolve(b);
  if (!v) throw std::runtime_error("kernel backend unavailable: " + backend_name(b));
  g_active.store(v, std::memory_order_release);
}

void set_backend_auto() { g_active.store(auto_select(), std::memory_order_release); }

std::string backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "?";
}

double dot(const double* a, const double* b, std::size_t n) { return active()->dot(a, b, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active()->axpy(alpha, x, y, n);
}

double sum_sq(const double* a, std::size_t n) { return active()->dot(a, a, n); }

void outer_acc(double* a, const double* v, std::size_t d) {
  for (std::size_t i = 0; i < d; ++i) active()->axpy(v[i], v, a + i * d, d);
}

}  // namespace xinfid::kern
