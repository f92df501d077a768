#include "xinfid/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace xinfid {

SquareMatrix SquareMatrix::identity(int dim) {
  SquareMatrix m(dim);
  for (int i = 0; i < dim; ++i) m.at(i, i) = 1.0;
  return m;
}

double SquareMatrix::trace() const {
  double t = 0.0;
  for (int i = 0; i < n; ++i) t += at(i, i);
  return t;
}

bool all_finite(const Vector& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  return kern::dot(a.data(), b.data(), a.size());
}

double norm2(const Vector& v) { return std::sqrt(kern::sum_sq(v.data(), v.size())); }

double norm_inf(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

double norm1(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += std::fabs(x);
  return s;
}

Vector add(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("add: dimension mismatch");
  Vector r = a;
  kern::axpy(1.0, b.data(), r.data(), r.size());
  return r;
}

Vector sub(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("sub: dimension mismatch");
  Vector r = a;
  kern::axpy(-1.0, b.data(), r.data(), r.size());
  return r;
}

Vector scaled(const Vector& v, double s) {
  Vector r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r[i] = v[i] * s;
  return r;
}

Vector hadamard(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hadamard: dimension mismatch");
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * b[i];
  return r;
}

Vector zeros(int d) { return Vector(static_cast<std::size_t>(d), 0.0); }

void require_dim(const Vector& v, int d, const char* what) {
  if (static_cast<int>(v.size()) != d)
    throw std::invalid_argument(std::string(what) + ": expected dimension " + std::to_string(d) +
                                ", got " + std::to_string(v.size()));
}

// ---------------------------------------------------------------------------
// RNG

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

}  // namespace

RngStream derive_stream(std::uint64_t seed, std::uint64_t stream_id) {
  RngStream s;
  const std::uint64_t k1 = mix64(seed + kGolden);
  s.key = mix64(k1 ^ (stream_id * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull));
  s.ctr = 0;
  return s;
}

std::uint64_t RngStream::next_u64() {
  ++ctr;
  return mix64(key + ctr * kGolden);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  // Box-Muller; u1 kept strictly positive.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * M_PI * u2);
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

RngStream RngStream::fork(std::uint64_t index) const { return derive_stream(key, index); }

Vector sample_uniform_box(RngStream& rng, const Vector& center, double radius) {
  if (radius < 0.0) throw std::invalid_argument("sample_uniform_box: negative radius");
  Vector y(center.size());
  for (std::size_t i = 0; i < center.size(); ++i)
    y[i] = center[i] + radius * (2.0 * rng.uniform() - 1.0);
  return y;
}

Vector sample_gaussian(RngStream& rng, const Vector& mean, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("sample_gaussian: negative sigma");
  Vector y(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) y[i] = mean[i] + sigma * rng.normal();
  return y;
}

// ---------------------------------------------------------------------------
// Regularized SPD solve

namespace {

// In-place lower Cholesky; returns false on a non-positive pivot.
bool cholesky(SquareMatrix& m) {
  const int n = m.n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double s = kern::dot(m.row(i), m.row(j), static_cast<std::size_t>(j));
      if (i == j) {
        const double d = m.at(i, i) - s;
        if (!(d > 0.0)) return false;
        m.at(i, i) = std::sqrt(d);
      } else {
        m.at(i, j) = (m.at(i, j) - s) / m.at(j, j);
      }
    }
    for (int j = i + 1; j < n; ++j) m.at(i, j) = 0.0;
  }
  return true;
}

Vector chol_solve(const SquareMatrix& l, const Vector& b) {
  const int n = l.n;
  Vector y(b);
  for (int i = 0; i < n; ++i) {
    y[i] -= kern::dot(l.row(i), y.data(), static_cast<std::size_t>(i));
    y[i] /= l.at(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int j = i + 1; j < n; ++j) s -= l.at(j, i) * y[j];
    y[i] = s / l.at(i, i);
  }
  return y;
}

Vector residual(const SquareMatrix& a, double lambda, const Vector& x, const Vector& b) {
  const int n = a.n;
  Vector r(b);
  for (int i = 0; i < n; ++i)
    r[i] -= kern::dot(a.row(i), x.data(), static_cast<std::size_t>(n)) + lambda * x[i];
  return r;
}

struct CholAttempt {
  bool ok = false;
  Vector x;
  SquareMatrix chol;  // factor of A + lambda I
};

CholAttempt try_solve(const SquareMatrix& a, const Vector& b, double lambda) {
  SquareMatrix m = a;
  for (int i = 0; i < m.n; ++i) m.at(i, i) += lambda;
  if (!cholesky(m)) return {};
  Vector x = chol_solve(m, b);
  // One step of iterative refinement.
  Vector r = residual(a, lambda, x, b);
  Vector dx = chol_solve(m, r);
  kern::axpy(1.0, dx.data(), x.data(), x.size());
  return {true, std::move(x), std::move(m)};
}

// When a singular A forced a ridge, polish toward the pseudo-inverse solution
// by refining against the unregularized system. Each accepted step shrinks
// the range-space error by lambda/(sigma+lambda); steps are kept only while
// the true residual drops, so inconsistent systems keep the ridge solution.
void pseudo_inverse_polish(const SquareMatrix& a, const Vector& b, const CholAttempt& solved,
                           Vector& x) {
  double best = norm2(residual(a, 0.0, x, b));
  for (int step = 0; step < 4; ++step) {
    Vector r = residual(a, 0.0, x, b);
    Vector dx = chol_solve(solved.chol, r);
    Vector cand = x;
    kern::axpy(1.0, dx.data(), cand.data(), cand.size());
    const double cand_res = norm2(residual(a, 0.0, cand, b));
    if (!(cand_res < 0.5 * best)) break;
    x = std::move(cand);
    best = cand_res;
  }
}

}  // namespace

SolveInfo solve_regularized_info(const SquareMatrix& a, const Vector& b, double lambda) {
  const int n = a.n;
  if (n < 1 || static_cast<int>(b.size()) != n)
    throw std::invalid_argument("solve_regularized: dimension mismatch");
  if (lambda < 0.0) throw std::invalid_argument("solve_regularized: negative lambda");
  double amax = 0.0;
  for (double v : a.a) {
    if (!std::isfinite(v)) throw std::invalid_argument("solve_regularized: non-finite matrix entry");
    amax = std::max(amax, std::fabs(v));
  }
  if (!all_finite(b)) throw std::invalid_argument("solve_regularized: non-finite rhs entry");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::fabs(a.at(i, j) - a.at(j, i)) > 1e-8 * std::max(1.0, amax))
        throw std::invalid_argument("solve_regularized: matrix not symmetric");

  const double fallback = [&] {
    const double tr = a.trace();
    return tr > 0.0 ? 1e-6 * tr / n : 1e-9;
  }();

  const double tol = 1e-8 * (norm2(b) + 1.0);
  // A fallback ridge acts as a preconditioner: if the polished solution meets
  // the unregularized residual bound, the system solved is the lambda = 0 one
  // and lambda_used reports 0; otherwise the ridge shaped the answer.
  auto finish = [&](CholAttempt r, double lam) -> SolveInfo {
    if (lam > lambda) {
      pseudo_inverse_polish(a, b, r, r.x);
      if (lambda == 0.0 && norm2(residual(a, 0.0, r.x, b)) <= tol) return {std::move(r.x), 0.0};
    }
    return {std::move(r.x), lam};
  };
  double lam = lambda;
  for (int attempt = 0; attempt < 2; ++attempt) {
    CholAttempt r = try_solve(a, b, lam);
    if (r.ok && norm2(residual(a, lam, r.x, b)) <= tol) return finish(std::move(r), lam);
    if (lam >= fallback && attempt > 0) break;
    lam = std::max(fallback, lam);
    if (attempt == 0 && lambda > 0.0 && lam == lambda) lam = lambda + fallback;
  }
  // Last resort: grow the ridge until the factorization succeeds.
  for (int k = 0; k < 20; ++k) {
    lam = std::max(lam * 10.0, 1e-12);
    CholAttempt r = try_solve(a, b, lam);
    if (r.ok && norm2(residual(a, lam, r.x, b)) <= tol) return finish(std::move(r), lam);
  }
  throw std::runtime_error("solve_regularized: matrix is not positive semidefinite");
}

Vector solve_regularized(const SquareMatrix& a, const Vector& b, double lambda) {
  return solve_regularized_info(a, b, lambda).x;
}

// ---------------------------------------------------------------------------
// Rank statistics

std::vector<double> average_ranks(const Vector& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: dimension mismatch");
  if (a.size() < 2) throw std::invalid_argument("spearman: need dimension >= 2");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - ma, db = rb[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return {0.0, true};
  return {sab / std::sqrt(saa * sbb), false};
}

double spearman_correlation(const Vector& a, const Vector& b) { return spearman(a, b).rho; }

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe r;
  const std::size_t n = xs.size();
  if (n == 0) return r;
  double s = 0.0;
  for (double x : xs) s += x;
  r.mean = s / static_cast<double>(n);
  if (n < 2) return r;
  double v = 0.0;
  for (double x : xs) v += (x - r.mean) * (x - r.mean);
  v /= static_cast<double>(n - 1);
  r.se = std::sqrt(v / static_cast<double>(n));
  return r;
}

}  // namespace xinfid
