#include "xinfid/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "xinfid/parallel.hpp"

namespace xinfid {

Vector kernel_offset(const SmoothingKernel& kernel, int d, RngStream& rng) {
  if (const auto* g = std::get_if<GaussianKernel>(&kernel)) {
    if (g->sigma < 0.0) throw std::invalid_argument("gaussian kernel: negative sigma");
    return sample_gaussian(rng, zeros(d), g->sigma);
  }
  const auto& b = std::get<UniformBoxKernel>(kernel);
  if (b.radius < 0.0) throw std::invalid_argument("box kernel: negative radius");
  return sample_uniform_box(rng, zeros(d), b.radius);
}

std::string kernel_name(const SmoothingKernel& kernel) {
  if (const auto* g = std::get_if<GaussianKernel>(&kernel))
    return "gaussian(sigma=" + std::to_string(g->sigma) + ")";
  return "box(radius=" + std::to_string(std::get<UniformBoxKernel>(kernel).radius) + ")";
}

Locality locality_of(const Explainer& e) {
  struct V {
    Locality operator()(const GradientExplainer&) const { return Locality::local; }
    Locality operator()(const IntGradExplainer&) const { return Locality::local; }
    Locality operator()(const OcclusionExplainer&) const { return Locality::global; }
    Locality operator()(const ShapleyExactExplainer&) const { return Locality::global; }
    Locality operator()(const OptimalExplainer&) const { return Locality::local; }
    Locality operator()(const OptimalMaskedExplainer&) const { return Locality::global; }
    Locality operator()(const ConstantExplainer& c) const { return c.locality; }
    Locality operator()(const SmoothedExplainer& s) const { return locality_of(*s.base); }
  };
  return std::visit(V{}, e.cfg);
}

std::string method_tag(const Explainer& e) {
  struct V {
    std::string operator()(const GradientExplainer&) const { return "grad"; }
    std::string operator()(const IntGradExplainer&) const { return "ig"; }
    std::string operator()(const OcclusionExplainer&) const { return "occlusion"; }
    std::string operator()(const ShapleyExactExplainer&) const { return "shapley"; }
    std::string operator()(const OptimalExplainer& o) const {
      return "optimal(" + family_name(o.family) + ")";
    }
    std::string operator()(const OptimalMaskedExplainer& o) const {
      return "optimal-masked(" + family_name(o.family) + ")";
    }
    std::string operator()(const ConstantExplainer&) const { return "constant"; }
    std::string operator()(const SmoothedExplainer& s) const { return method_tag(*s.base) + "-sg"; }
  };
  return std::visit(V{}, e.cfg);
}

namespace {

Vector resolve_baseline(const Vector& baseline, int d, const char* what) {
  if (baseline.empty()) return zeros(d);
  require_dim(baseline, d, what);
  return baseline;
}

}  // namespace

Attribution explain_gradient(const BlackBoxModel& model, const Vector& x) {
  Attribution a;
  a.values = gradient(model, x);
  a.locality = Locality::local;
  a.method_tag = "grad";
  return a;
}

Attribution explain_integrated_gradients(const BlackBoxModel& model, const Vector& x,
                                         const Vector& baseline, int steps) {
  if (steps < 1) throw std::invalid_argument("integrated gradients: steps must be >= 1");
  const int d = model.input_dim();
  require_dim(x, d, "integrated gradients");
  const Vector x0 = resolve_baseline(baseline, d, "ig baseline");
  const Vector path = sub(x, x0);  // I = x - baseline
  Vector acc = zeros(d);
  for (int s = 0; s < steps; ++s) {
    const double t = (s + 0.5) / steps;  // midpoint rule
    Vector p = x0;
    kern::axpy(t, path.data(), p.data(), p.size());
    const Vector g = gradient(model, p);
    kern::axpy(1.0, g.data(), acc.data(), acc.size());
  }
  for (double& v : acc) v /= steps;
  Attribution a;
  a.values = std::move(acc);
  a.locality = Locality::local;
  a.method_tag = "ig";
  a.baseline_used = x0;
  return a;
}

Attribution explain_occlusion1(const BlackBoxModel& model, const Vector& x,
                               const Vector& baseline) {
  const int d = model.input_dim();
  require_dim(x, d, "occlusion");
  const Vector x0 = resolve_baseline(baseline, d, "occlusion baseline");
  const double fx = evaluate(model, x);
  Vector vals(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    Vector y = x;
    y[static_cast<std::size_t>(i)] = x0[static_cast<std::size_t>(i)];
    vals[static_cast<std::size_t>(i)] = fx - evaluate(model, y);
  }
  Attribution a;
  a.values = std::move(vals);
  a.locality = Locality::global;
  a.method_tag = "occlusion";
  a.baseline_used = x0;
  return a;
}

Attribution explain_shapley_exact(const BlackBoxModel& model, const Vector& x,
                                  const Vector& baseline) {
  const int d = model.input_dim();
  if (d > 20) throw std::invalid_argument("shapley exact: d > 20 not supported");
  require_dim(x, d, "shapley");
  const Vector x0 = resolve_baseline(baseline, d, "shapley baseline");

  // h(S) = f(x with coordinates outside S at the baseline), for all 2^d masks.
  const std::size_t n_subsets = std::size_t(1) << d;
  std::vector<double> h(n_subsets);
  Vector y(static_cast<std::size_t>(d));
  for (std::size_t mask = 0; mask < n_subsets; ++mask) {
    for (int i = 0; i < d; ++i)
      y[static_cast<std::size_t>(i)] =
          (mask >> i) & 1u ? x[static_cast<std::size_t>(i)] : x0[static_cast<std::size_t>(i)];
    h[mask] = evaluate(model, y);
  }
  // weight(s) = s! (d-s-1)! / d!
  std::vector<double> weight(static_cast<std::size_t>(d));
  for (int s = 0; s < d; ++s) {
    double w = 1.0 / d;
    for (int t = 1; t <= s; ++t) w *= static_cast<double>(t) / (d - t);
    weight[static_cast<std::size_t>(s)] = w;
  }
  Vector phi = zeros(d);
  for (std::size_t mask = 0; mask < n_subsets; ++mask) {
    const int s = static_cast<int>(std::popcount(static_cast<unsigned long long>(mask)));
    for (int j = 0; j < d; ++j) {
      if ((mask >> j) & 1u) continue;
      phi[static_cast<std::size_t>(j)] +=
          weight[static_cast<std::size_t>(s)] * (h[mask | (std::size_t(1) << j)] - h[mask]);
    }
  }
  Attribution a;
  a.values = std::move(phi);
  a.locality = Locality::global;
  a.method_tag = "shapley";
  a.baseline_used = x0;
  return a;
}

Explainer smooth(Explainer base, SmoothingKernel kernel, int n) {
  if (n < 1) throw std::invalid_argument("smooth: n must be >= 1");
  SmoothedExplainer s;
  s.base = std::make_shared<const Explainer>(std::move(base));
  s.kernel = kernel;
  s.n = n;
  return Explainer{std::move(s)};
}

DrawnSamples record_draws(const BlackBoxModel& model, const Vector& x,
                          const PerturbationFamily& family, int n, RngStream rng) {
  const int d = static_cast<int>(x.size());
  validate_family(family, d);
  const int n_eff = is_deterministic(family) ? 1 : n;
  if (n_eff < 1) throw std::invalid_argument("record_draws: n must be >= 1");
  DrawnSamples out;
  out.samples.resize(static_cast<std::size_t>(n_eff));
  out.delta_f.resize(static_cast<std::size_t>(n_eff));
  const double fx = evaluate(model, x);
  constexpr std::int64_t kChunk = 256;
  map_chunks<int>(n_eff, kChunk, [&](std::int64_t, std::int64_t b, std::int64_t e) {
    for (std::int64_t s = b; s < e; ++s) {
      RngStream sr = rng.fork(static_cast<std::uint64_t>(s));
      PerturbationSample ps = draw(family, x, sr);
      const Vector xm = sub(x, ps.i_vec);
      out.delta_f[static_cast<std::size_t>(s)] = fx - evaluate(model, xm);
      out.samples[static_cast<std::size_t>(s)] = std::move(ps);
    }
    return 0;
  });
  return out;
}

namespace {

// Unconstrained: phi = (A + lam)^(-1) b. With an efficiency total v:
// minimize the same residual subject to sum(phi) = v via the KKT update
// phi = phi_u - mu * (A + lam)^(-1) 1, mu chosen to meet the constraint.
Vector constrained_solve(const SquareMatrix& a, const Vector& b, double lambda,
                         std::optional<double> efficiency_total) {
  Vector phi = solve_regularized(a, b, lambda);
  if (!efficiency_total) return phi;
  Vector ones(static_cast<std::size_t>(a.n), 1.0);
  const Vector dir = solve_regularized(a, ones, lambda);
  double sum_phi = 0.0, sum_dir = 0.0;
  for (double v : phi) sum_phi += v;
  for (double v : dir) sum_dir += v;
  if (sum_dir == 0.0) return phi;
  const double mu = (sum_phi - *efficiency_total) / sum_dir;
  kern::axpy(-mu, dir.data(), phi.data(), phi.size());
  return phi;
}

}  // namespace

Attribution explain_optimal_from_samples(const Vector& x, const DrawnSamples& s, double lambda,
                                         bool masked, std::optional<double> efficiency_total) {
  const int d = static_cast<int>(x.size());
  const std::size_t n = s.samples.size();
  if (n == 0) throw std::invalid_argument("explain_optimal_from_samples: empty sample set");
  SquareMatrix a(d);
  Vector b = zeros(d);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector* v = &s.samples[i].i_vec;
    if (masked) {
      if (!s.samples[i].mask)
        throw std::invalid_argument("explain_optimal_masked: family does not carry masks");
      v = &*s.samples[i].mask;
    }
    kern::outer_acc(a.a.data(), v->data(), static_cast<std::size_t>(d));
    kern::axpy(s.delta_f[i], v->data(), b.data(), b.size());
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& e : a.a) e *= inv_n;
  for (double& e : b) e *= inv_n;
  Attribution out;
  out.values = constrained_solve(a, b, lambda, efficiency_total);
  out.locality = masked ? Locality::global : Locality::local;
  out.method_tag = masked ? "optimal-masked" : "optimal";
  return out;
}

namespace {

// Chunked A = mean(v v^T), b = mean(delta v) accumulation; v is I or z.
Attribution optimal_impl(const BlackBoxModel& model, const Vector& x,
                         const PerturbationFamily& family, int n, double lambda, RngStream rng,
                         bool masked) {
  const int d = static_cast<int>(x.size());
  require_dim(x, model.input_dim(), "explain_optimal");
  validate_family(family, d);
  if (masked && !has_masks(family))
    throw std::invalid_argument("explain_optimal_masked: family '" + family_name(family) +
                                "' does not carry binary masks");
  const int n_eff = is_deterministic(family) ? 1 : n;
  if (n_eff < 1) throw std::invalid_argument("explain_optimal: n must be >= 1");
  const double fx = evaluate(model, x);

  struct Part {
    SquareMatrix a;
    Vector b;
  };
  // At most 16 partial (A, b) pairs regardless of n, for image-sized d.
  const std::int64_t kChunk = std::max<std::int64_t>(256, (n_eff + 15) / 16);
  auto partials = map_chunks<Part>(n_eff, kChunk, [&](std::int64_t, std::int64_t bg, std::int64_t en) {
    Part p{SquareMatrix(d), zeros(d)};
    for (std::int64_t s = bg; s < en; ++s) {
      RngStream sr = rng.fork(static_cast<std::uint64_t>(s));
      const PerturbationSample ps = draw(family, x, sr);
      const Vector xm = sub(x, ps.i_vec);
      const double delta = fx - evaluate(model, xm);
      const Vector& v = masked ? *ps.mask : ps.i_vec;
      kern::outer_acc(p.a.a.data(), v.data(), static_cast<std::size_t>(d));
      kern::axpy(delta, v.data(), p.b.data(), p.b.size());
    }
    return p;
  });
  SquareMatrix a(d);
  Vector b = zeros(d);
  for (const Part& p : partials) {
    for (std::size_t i = 0; i < a.a.size(); ++i) a.a[i] += p.a.a[i];
    kern::axpy(1.0, p.b.data(), b.data(), b.size());
  }
  const double inv_n = 1.0 / static_cast<double>(n_eff);
  for (double& e : a.a) e *= inv_n;
  for (double& e : b) e *= inv_n;

  // The Shapley kernel's excluded full subset carries infinite weight in the
  // original kernel, which is exactly the efficiency constraint; honoring it
  // is what makes the solution the Shapley value.
  std::optional<double> efficiency;
  if (masked && std::holds_alternative<ShapleyKernel>(family))
    efficiency = fx - evaluate(model, zeros(d));

  Attribution out;
  out.values = constrained_solve(a, b, lambda, efficiency);
  out.locality = masked ? Locality::global : Locality::local;
  out.method_tag =
      (masked ? std::string("optimal-masked(") : std::string("optimal(")) + family_name(family) + ")";
  return out;
}

}  // namespace

Attribution explain_optimal(const BlackBoxModel& model, const Vector& x,
                            const PerturbationFamily& family, int n, double lambda,
                            RngStream rng) {
  return optimal_impl(model, x, family, n, lambda, rng, false);
}

Attribution explain_optimal_masked(const BlackBoxModel& model, const Vector& x,
                                   const PerturbationFamily& family, int n, double lambda,
                                   RngStream rng) {
  return optimal_impl(model, x, family, n, lambda, rng, true);
}

Attribution to_global(const Attribution& attr, const Vector& x, const Vector& x0) {
  if (attr.locality == Locality::global)
    throw std::invalid_argument("to_global: attribution is already global");
  Attribution out = attr;
  out.values = hadamard(attr.values, sub(x, x0));
  out.locality = Locality::global;
  out.method_tag = attr.method_tag + "*x";
  out.baseline_used = x0;
  return out;
}

Attribution compute(const Explainer& e, const BlackBoxModel& model, const Vector& x,
                    RngStream rng) {
  if (const auto* g = std::get_if<GradientExplainer>(&e.cfg)) {
    (void)g;
    return explain_gradient(model, x);
  }
  if (const auto* ig = std::get_if<IntGradExplainer>(&e.cfg))
    return explain_integrated_gradients(model, x, ig->baseline, ig->steps);
  if (const auto* oc = std::get_if<OcclusionExplainer>(&e.cfg))
    return explain_occlusion1(model, x, oc->baseline);
  if (const auto* sh = std::get_if<ShapleyExactExplainer>(&e.cfg))
    return explain_shapley_exact(model, x, sh->baseline);
  if (const auto* op = std::get_if<OptimalExplainer>(&e.cfg))
    return explain_optimal(model, x, op->family, op->n, op->lambda, rng.fork(0x0901));
  if (const auto* om = std::get_if<OptimalMaskedExplainer>(&e.cfg))
    return explain_optimal_masked(model, x, om->family, om->n, om->lambda, rng.fork(0x0902));
  if (const auto* c = std::get_if<ConstantExplainer>(&e.cfg)) {
    Attribution a;
    a.values = c->values;
    a.locality = c->locality;
    a.method_tag = "constant";
    return a;
  }
  const auto& sm = std::get<SmoothedExplainer>(e.cfg);
  const int d = static_cast<int>(x.size());

  constexpr std::int64_t kChunk = 64;
  auto partials =
      map_chunks<Vector>(sm.n, kChunk, [&](std::int64_t, std::int64_t b, std::int64_t en) {
        Vector acc = zeros(d);
        for (std::int64_t l = b; l < en; ++l) {
          RngStream item = rng.fork(static_cast<std::uint64_t>(l));
          RngStream off_rng = item.fork(0);
          Vector z = x;
          const Vector off = kernel_offset(sm.kernel, d, off_rng);
          kern::axpy(1.0, off.data(), z.data(), z.size());
          const Attribution base = compute(*sm.base, model, z, item.fork(1));
          kern::axpy(1.0, base.values.data(), acc.data(), acc.size());
        }
        return acc;
      });
  Vector acc = zeros(d);
  for (const Vector& p : partials) kern::axpy(1.0, p.data(), acc.data(), acc.size());
  for (double& v : acc) v /= sm.n;
  Attribution a;
  a.values = std::move(acc);
  a.locality = locality_of(e);
  a.method_tag = method_tag(e);
  return a;
}

}  // namespace xinfid
