#include "xinfid/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "xinfid/parallel.hpp"

namespace xinfid {

bool is_deterministic(const PerturbationFamily& family) {
  return std::holds_alternative<BaselineDiff>(family) ||
         std::holds_alternative<SubsetBaseline>(family);
}

bool has_masks(const PerturbationFamily& family) {
  return std::holds_alternative<ShapleyKernel>(family) ||
         std::holds_alternative<SquareRemoval>(family) ||
         std::holds_alternative<CoordinateTimesX>(family);
}

bool is_mask_family(const PerturbationFamily& family) {
  return std::holds_alternative<ShapleyKernel>(family) ||
         std::holds_alternative<SquareRemoval>(family);
}

std::string family_name(const PerturbationFamily& family) {
  struct V {
    std::string operator()(const BaselineDiff&) const { return "baseline"; }
    std::string operator()(const SubsetBaseline&) const { return "subset-baseline"; }
    std::string operator()(const NoisyBaseline&) const { return "noisy-baseline"; }
    std::string operator()(const MultiBaseline&) const { return "multi-baseline"; }
    std::string operator()(const CoordinateEps&) const { return "coord-eps"; }
    std::string operator()(const CoordinateTimesX&) const { return "coord-x"; }
    std::string operator()(const ShapleyKernel&) const { return "shapley"; }
    std::string operator()(const SquareRemoval&) const { return "square"; }
  };
  return std::visit(V{}, family);
}

void validate_family(const PerturbationFamily& family, int d) {
  if (const auto* f = std::get_if<BaselineDiff>(&family)) {
    require_dim(f->x0, d, "baseline x0");
  } else if (const auto* f = std::get_if<SubsetBaseline>(&family)) {
    require_dim(f->x0, d, "subset-baseline x0");
    for (int i : f->subset)
      if (i < 0 || i >= d) throw std::invalid_argument("subset-baseline: index out of range");
  } else if (const auto* f = std::get_if<NoisyBaseline>(&family)) {
    require_dim(f->x0, d, "noisy-baseline x0");
    if (f->sigma < 0.0) throw std::invalid_argument("noisy-baseline: negative sigma");
  } else if (const auto* f = std::get_if<MultiBaseline>(&family)) {
    if (f->baselines.empty()) throw std::invalid_argument("multi-baseline: no baselines");
    if (f->weights.size() != f->baselines.size())
      throw std::invalid_argument("multi-baseline: weights/baselines size mismatch");
    double s = 0.0;
    for (double w : f->weights) {
      if (w < 0.0) throw std::invalid_argument("multi-baseline: negative weight");
      s += w;
    }
    if (std::fabs(s - 1.0) > 1e-9)
      throw std::invalid_argument("multi-baseline: weights must sum to 1");
    for (const Vector& b : f->baselines) require_dim(b, d, "multi-baseline baseline");
  } else if (const auto* f = std::get_if<CoordinateEps>(&family)) {
    if (f->epsilon <= 0.0) throw std::invalid_argument("coord-eps: epsilon must be positive");
  } else if (std::get_if<ShapleyKernel>(&family)) {
    if (d < 2) throw std::invalid_argument("shapley: needs d >= 2");
  } else if (const auto* f = std::get_if<SquareRemoval>(&family)) {
    if (f->height * f->width != d)
      throw std::invalid_argument("square: height*width does not match dimension");
    if (f->smin < 1 || f->smin > f->smax || f->smax > std::min(f->height, f->width))
      throw std::invalid_argument("square: need 1 <= smin <= smax <= min(height, width)");
  }
}

namespace {

// Normalized CDF over subset sizes k = 1..d-1 with class weight
// (d-1)/(k(d-k)) (the per-subset weight times the C(d,k) class count).
std::vector<double> shapley_size_cdf(int d) {
  std::vector<double> w(static_cast<std::size_t>(d - 1));
  double total = 0.0;
  for (int k = 1; k < d; ++k) {
    w[static_cast<std::size_t>(k - 1)] =
        static_cast<double>(d - 1) / (static_cast<double>(k) * (d - k));
    total += w[static_cast<std::size_t>(k - 1)];
  }
  double acc = 0.0;
  for (double& v : w) {
    acc += v / total;
    v = acc;
  }
  w.back() = 1.0;
  return w;
}

Vector subset_mask(RngStream& rng, int d, int k) {
  std::vector<int> idx(static_cast<std::size_t>(d));
  std::iota(idx.begin(), idx.end(), 0);
  Vector z(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < k; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(d - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    z[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1.0;
  }
  return z;
}

}  // namespace

Vector draw_square_mask(RngStream& rng, int height, int width, int smin, int smax) {
  if (smin < 1 || smin > smax || smax > std::min(height, width))
    throw std::invalid_argument("draw_square_mask: need 1 <= smin <= smax <= min(height, width)");
  const int s = smin + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(smax - smin + 1)));
  const int r0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(height - s + 1)));
  const int c0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(width - s + 1)));
  Vector z(static_cast<std::size_t>(height) * width, 0.0);
  for (int r = r0; r < r0 + s; ++r)
    for (int c = c0; c < c0 + s; ++c) z[static_cast<std::size_t>(r) * width + c] = 1.0;
  return z;
}

PerturbationSample draw(const PerturbationFamily& family, const Vector& x, RngStream& rng) {
  const int d = static_cast<int>(x.size());
  validate_family(family, d);
  PerturbationSample out;

  if (const auto* f = std::get_if<BaselineDiff>(&family)) {
    out.i_vec = sub(x, f->x0);
  } else if (const auto* f = std::get_if<SubsetBaseline>(&family)) {
    out.i_vec = zeros(d);
    for (int i : f->subset)
      out.i_vec[static_cast<std::size_t>(i)] =
          x[static_cast<std::size_t>(i)] - f->x0[static_cast<std::size_t>(i)];
  } else if (const auto* f = std::get_if<NoisyBaseline>(&family)) {
    const Vector z0 = sample_gaussian(rng, f->x0, f->sigma);
    out.i_vec = sub(x, z0);
  } else if (const auto* f = std::get_if<MultiBaseline>(&family)) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t pick = f->baselines.size() - 1;
    for (std::size_t i = 0; i < f->weights.size(); ++i) {
      acc += f->weights[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out.i_vec = sub(x, f->baselines[pick]);
  } else if (const auto* f = std::get_if<CoordinateEps>(&family)) {
    const auto i = rng.uniform_index(static_cast<std::uint64_t>(d));
    out.i_vec = zeros(d);
    out.i_vec[i] = f->epsilon;
  } else if (std::get_if<CoordinateTimesX>(&family)) {
    const auto i = rng.uniform_index(static_cast<std::uint64_t>(d));
    Vector z = zeros(d);
    z[i] = 1.0;
    out.i_vec = zeros(d);
    out.i_vec[i] = x[i];
    out.mask = std::move(z);
  } else if (std::get_if<ShapleyKernel>(&family)) {
    const auto cdf = shapley_size_cdf(d);
    const double u = rng.uniform();
    int k = 1;
    while (k < d - 1 && u >= cdf[static_cast<std::size_t>(k - 1)]) ++k;
    Vector z = subset_mask(rng, d, k);
    out.i_vec = hadamard(x, z);
    out.mask = std::move(z);
  } else if (const auto* f = std::get_if<SquareRemoval>(&family)) {
    Vector z = draw_square_mask(rng, f->height, f->width, f->smin, f->smax);
    out.i_vec = hadamard(x, z);
    out.mask = std::move(z);
  }
  return out;
}

std::vector<std::pair<int, double>> shapley_subset_distribution(int d) {
  if (d < 2) throw std::invalid_argument("shapley_subset_distribution: needs d >= 2");
  // Per-subset weight (d-1)/(C(d,k) k (d-k)); class total (d-1)/(k(d-k)).
  double total = 0.0;
  std::vector<double> choose(static_cast<std::size_t>(d), 1.0);
  for (int k = 1; k < d; ++k)
    choose[static_cast<std::size_t>(k)] =
        choose[static_cast<std::size_t>(k - 1)] * (d - k + 1) / k;
  for (int k = 1; k < d; ++k) total += static_cast<double>(d - 1) / (static_cast<double>(k) * (d - k));
  std::vector<std::pair<int, double>> out;
  out.reserve(static_cast<std::size_t>(d - 1));
  for (int k = 1; k < d; ++k) {
    const double class_mass = static_cast<double>(d - 1) / (static_cast<double>(k) * (d - k)) / total;
    out.emplace_back(k, class_mass / choose[static_cast<std::size_t>(k)]);
  }
  return out;
}

SquareMatrix second_moment(const PerturbationFamily& family, const Vector& x, int n,
                           RngStream rng) {
  const int d = static_cast<int>(x.size());
  validate_family(family, d);
  if (is_deterministic(family)) {
    RngStream s = rng;
    const PerturbationSample ps = draw(family, x, s);
    SquareMatrix m(d);
    kern::outer_acc(m.a.data(), ps.i_vec.data(), static_cast<std::size_t>(d));
    return m;
  }
  if (n < 1) throw std::invalid_argument("second_moment: n must be >= 1 for stochastic families");

  // Chunk geometry depends only on n, never the worker count; the cap keeps
  // at most 16 d x d partials alive for image-sized d.
  const std::int64_t kChunk = std::max<std::int64_t>(256, (n + 15) / 16);
  auto partials = map_chunks<SquareMatrix>(n, kChunk, [&](std::int64_t, std::int64_t b, std::int64_t e) {
    SquareMatrix acc(d);
    for (std::int64_t s = b; s < e; ++s) {
      RngStream sr = rng.fork(static_cast<std::uint64_t>(s));
      const PerturbationSample ps = draw(family, x, sr);
      kern::outer_acc(acc.a.data(), ps.i_vec.data(), static_cast<std::size_t>(d));
    }
    return acc;
  });
  SquareMatrix m(d);
  for (const SquareMatrix& p : partials)
    for (std::size_t i = 0; i < m.a.size(); ++i) m.a[i] += p.a[i];
  for (double& v : m.a) v /= static_cast<double>(n);
  return m;
}

}  // namespace xinfid
