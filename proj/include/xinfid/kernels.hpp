#pragma once

// Arithmetic inner-loop kernels. Every routine has a scalar reference
// implementation and, on x86-64, an AVX2 variant selected at startup
// (override with XINFID_SIMD=scalar|avx2|auto). All variants perform the
// identical floating-point operations in the identical association order,
// so results are bit-equal across backends.

#include <cstddef>
#include <string>

namespace xinfid::kern {

enum class Backend { scalar, avx2, neon };

// Active backend. Resolved once from XINFID_SIMD + CPU detection.
Backend active_backend();

// Force a backend (tests). Throws if the backend is unavailable on this CPU.
void set_backend(Backend b);
void set_backend_auto();

std::string backend_name(Backend b);

// sum_i a[i]*b[i], accumulated in four independent lanes.
double dot(const double* a, const double* b, std::size_t n);

// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n);

// sum_i a[i]^2
double sum_sq(const double* a, std::size_t n);

// A (d x d, row-major) += v v^T
void outer_acc(double* a, const double* v, std::size_t d);

// Reference implementations, always available (equivalence tests).
namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

}  // namespace xinfid::kern
