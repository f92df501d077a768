#pragma once

// Shared numeric foundation: dense vectors/matrices, counter-based seeded
// randomness, the regularized SPD solve, and rank statistics.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xinfid/kernels.hpp"

namespace xinfid {

using Vector = std::vector<double>;

struct SquareMatrix {
  int n = 0;
  std::vector<double> a;  // row-major, n*n

  SquareMatrix() = default;
  explicit SquareMatrix(int dim) : n(dim), a(static_cast<std::size_t>(dim) * dim, 0.0) {}

  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
  double* row(int i) { return a.data() + static_cast<std::size_t>(i) * n; }
  const double* row(int i) const { return a.data() + static_cast<std::size_t>(i) * n; }

  static SquareMatrix identity(int dim);
  double trace() const;
};

// ---- small vector helpers ----
bool all_finite(const Vector& v);
double dot(const Vector& a, const Vector& b);
double norm2(const Vector& v);
double norm_inf(const Vector& v);
double norm1(const Vector& v);
Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);
Vector scaled(const Vector& v, double s);
Vector hadamard(const Vector& a, const Vector& b);
Vector zeros(int d);
void require_dim(const Vector& v, int d, const char* what);

// ---- counter-based RNG ----
//
// A stream is (key, counter); draws are a pure hash of both, so any
// (seed, stream_id) pair reproduces the same sequence on any platform and
// fork(i) yields substreams that are independent of evaluation order.
struct RngStream {
  std::uint64_t key = 0;
  std::uint64_t ctr = 0;

  std::uint64_t next_u64();
  double uniform();                         // [0, 1)
  double normal();                          // standard normal (Box-Muller)
  std::uint64_t uniform_index(std::uint64_t n);  // unbiased in [0, n)
  RngStream fork(std::uint64_t index) const;
};

RngStream derive_stream(std::uint64_t seed, std::uint64_t stream_id);

Vector sample_uniform_box(RngStream& rng, const Vector& center, double radius);
Vector sample_gaussian(RngStream& rng, const Vector& mean, double sigma);

// ---- regularized SPD solve ----
struct SolveInfo {
  Vector x;
  double lambda_used = 0.0;
};

// Solves (A + lambda I) x = b via Cholesky. If lambda == 0 and A is singular,
// falls back to lambda = 1e-6 * trace(A)/d (1e-9 when the trace vanishes).
SolveInfo solve_regularized_info(const SquareMatrix& a, const Vector& b, double lambda);
Vector solve_regularized(const SquareMatrix& a, const Vector& b, double lambda);

// ---- rank statistics ----
struct SpearmanResult {
  double rho = 0.0;
  bool degenerate = false;  // an input had zero rank variance
};

SpearmanResult spearman(const Vector& a, const Vector& b);
double spearman_correlation(const Vector& a, const Vector& b);

// Ranks with average ranks for ties (1-based).
std::vector<double> average_ranks(const Vector& v);

// Mean / standard error of a sample (SE = sd / sqrt(n), 0 for n < 2).
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(const std::vector<double>& xs);

}  // namespace xinfid
