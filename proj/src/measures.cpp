#include "xinfid/measures.hpp"

#include <cmath>
#include <stdexcept>

namespace xinfid {

double optimal_scale(const std::vector<double>& rho, const std::vector<double>& delta_f) {
  if (rho.size() != delta_f.size()) throw std::invalid_argument("optimal_scale: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    num += rho[i] * delta_f[i];
    den += rho[i] * rho[i];
  }
  if (den < 1e-12) return 1.0;
  return num / den;
}

namespace {

// Local attributions pair with real-valued I; global ones with mask draws.
const Vector& residual_vector(const Attribution& attr, const PerturbationSample& s) {
  if (attr.locality == Locality::local) return s.i_vec;
  if (!s.mask)
    throw std::invalid_argument(
        "infidelity: global attribution requires a mask-structured perturbation family");
  return *s.mask;
}

void check_pairing(const Attribution& attr, const DrawnSamples& samples) {
  if (samples.samples.empty()) throw std::invalid_argument("infidelity: empty sample set");
  if (attr.locality == Locality::global && !samples.samples.front().mask)
    throw std::invalid_argument(
        "infidelity: global attribution requires a mask-structured perturbation family");
  if (attr.locality == Locality::local && samples.samples.front().mask &&
      samples.samples.front().i_vec.empty())
    throw std::invalid_argument("infidelity: malformed sample");
}

}  // namespace

InfdResult infidelity_on(const Attribution& attr, const DrawnSamples& samples, bool scaling) {
  check_pairing(attr, samples);
  const std::size_t n = samples.samples.size();
  std::vector<double> rho(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector& v = residual_vector(attr, samples.samples[i]);
    rho[i] = kern::dot(v.data(), attr.values.data(), v.size());
  }
  InfdResult out;
  out.alpha = scaling ? optimal_scale(rho, samples.delta_f) : 1.0;
  out.n_used = static_cast<int>(n);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = out.alpha * rho[i] - samples.delta_f[i];
    sq[i] = r * r;
  }
  const MeanSe ms = mean_se(sq);
  out.value = ms.mean;
  out.se = ms.se;
  return out;
}

InfdResult infidelity_detail(const BlackBoxModel& model, const Attribution& attr, const Vector& x,
                             const PerturbationFamily& family, const MeasureConfig& cfg,
                             RngStream rng) {
  if (attr.locality == Locality::local && is_mask_family(family))
    throw std::invalid_argument(
        "infidelity: local attribution paired with a binary-mask family; use the global form");
  if (attr.locality == Locality::global && !has_masks(family))
    throw std::invalid_argument(
        "infidelity: global attribution requires a mask-structured perturbation family");
  const DrawnSamples s = record_draws(model, x, family, cfg.n_infd, rng);
  return infidelity_on(attr, s, cfg.apply_optimal_scaling);
}

double infidelity(const BlackBoxModel& model, const Attribution& attr, const Vector& x,
                  const PerturbationFamily& family, const MeasureConfig& cfg, RngStream rng) {
  return infidelity_detail(model, attr, x, family, cfg, rng).value;
}

Vector ball_offset(RngStream& rng, int d, double r, BallNorm norm) {
  if (r < 0.0) throw std::invalid_argument("ball_offset: negative radius");
  if (norm == BallNorm::linf) return sample_uniform_box(rng, zeros(d), r);
  // Uniform in the L2 ball: Gaussian direction, radius r * U^(1/d).
  Vector g = sample_gaussian(rng, zeros(d), 1.0);
  const double nrm = norm2(g);
  const double u = rng.uniform();
  const double scale = nrm > 0.0 ? r * std::pow(u, 1.0 / d) / nrm : 0.0;
  for (double& v : g) v *= scale;
  return g;
}

double ball_norm_of(const Vector& v, BallNorm norm) {
  return norm == BallNorm::linf ? norm_inf(v) : norm2(v);
}

std::vector<Vector> draw_ball_offsets(const MeasureConfig& cfg, int d, RngStream rng) {
  std::vector<Vector> offs(static_cast<std::size_t>(cfg.n_sens));
  for (int j = 0; j < cfg.n_sens; ++j) {
    RngStream s = rng.fork(static_cast<std::uint64_t>(j));
    offs[static_cast<std::size_t>(j)] = ball_offset(s, d, cfg.radius_r, cfg.ball_norm);
  }
  return offs;
}

namespace {

// L2-normalize unless zero (zero passes through, flagged).
Vector unit_normalized(const Vector& v, bool* zero_seen) {
  const double n = norm2(v);
  if (n == 0.0) {
    if (zero_seen) *zero_seen = true;
    return v;
  }
  return scaled(v, 1.0 / n);
}

}  // namespace

SensResult sens_estimates(const Explainer& e, const BlackBoxModel& model, const Vector& x,
                          const MeasureConfig& cfg, const std::vector<Vector>& offsets,
                          RngStream eval_rng) {
  SensResult out;
  Attribution base = compute(e, model, x, eval_rng);
  Vector phi_x = cfg.apply_unit_normalization ? unit_normalized(base.values, &out.zero_attr_seen)
                                              : base.values;
  for (const Vector& off : offsets) {
    const Vector y = add(x, off);
    // Same eval stream at every point: common random numbers for stochastic
    // explainers, so differences measure the explanation, not MC noise.
    Attribution ay = compute(e, model, y, eval_rng);
    Vector phi_y = cfg.apply_unit_normalization ? unit_normalized(ay.values, &out.zero_attr_seen)
                                                : ay.values;
    const double diff = norm2(sub(phi_y, phi_x));
    out.sens_max = std::max(out.sens_max, diff);
    const double dn = ball_norm_of(off, cfg.ball_norm);
    if (dn > 0.0) out.sens_lips = std::max(out.sens_lips, diff / dn);
  }
  return out;
}

double sens_max(const Explainer& e, const BlackBoxModel& model, const Vector& x,
                const MeasureConfig& cfg, RngStream rng) {
  const int d = static_cast<int>(x.size());
  const auto offs = draw_ball_offsets(cfg, d, rng.fork(1));
  return sens_estimates(e, model, x, cfg, offs, rng.fork(0)).sens_max;
}

double sens_lips(const Explainer& e, const BlackBoxModel& model, const Vector& x,
                 const MeasureConfig& cfg, RngStream rng) {
  if (cfg.radius_r <= 0.0) throw std::invalid_argument("sens_lips: radius must be positive");
  const int d = static_cast<int>(x.size());
  const auto offs = draw_ball_offsets(cfg, d, rng.fork(1));
  return sens_estimates(e, model, x, cfg, offs, rng.fork(0)).sens_lips;
}

double sens_grad(const Explainer& e, const BlackBoxModel& model, const Vector& x,
                 const MeasureConfig& cfg, RngStream rng) {
  const int d = static_cast<int>(x.size());
  const auto offs = draw_ball_offsets(cfg, d, rng.fork(1));
  RngStream eval_rng = rng.fork(0);
  double best = 0.0;
  for (const Vector& off : offs) {
    const Vector y = add(x, off);
    double fro2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const double h = 1e-5 * std::max(1.0, std::fabs(y[static_cast<std::size_t>(k)]));
      Vector yp = y, ym = y;
      yp[static_cast<std::size_t>(k)] += h;
      ym[static_cast<std::size_t>(k)] -= h;
      const Attribution ap = compute(e, model, yp, eval_rng);
      const Attribution am = compute(e, model, ym, eval_rng);
      for (int i = 0; i < d; ++i) {
        const double dv = (ap.values[static_cast<std::size_t>(i)] -
                           am.values[static_cast<std::size_t>(i)]) /
                          (2.0 * h);
        fro2 += dv * dv;
      }
    }
    best = std::max(best, std::sqrt(fro2));
  }
  return best;
}

double robust_infidelity(const BlackBoxModel& model, const Explainer& e, const Vector& x,
                         const PerturbationFamily& family, const MeasureConfig& cfg, int n_outer,
                         RngStream rng) {
  if (n_outer < 1) throw std::invalid_argument("robust_infidelity: n_outer must be >= 1");
  const int d = static_cast<int>(x.size());
  RngStream eval_rng = rng.fork(0);
  RngStream u_rng = rng.fork(1);
  RngStream infd_rng = rng.fork(2);  // shared I samples across all u candidates
  double best = 0.0;
  for (int j = 0; j < n_outer; ++j) {
    Vector u = zeros(d);
    if (j > 0) {
      RngStream s = u_rng.fork(static_cast<std::uint64_t>(j));
      u = ball_offset(s, d, cfg.radius_r, cfg.ball_norm);
    }
    const Vector y = add(x, u);
    const Attribution attr = compute(e, model, y, eval_rng);
    const InfdResult r = infidelity_detail(model, attr, y, family, cfg, infd_rng);
    best = std::max(best, r.value);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Smoothing constants (per-point estimates on a shared (I, z) grid)

namespace {

struct C1C2 {
  RatioEstimate c1;
  RatioEstimate c2;
};

C1C2 estimate_c1c2(const BlackBoxModel& model, const Explainer& e, const Vector& x,
                   const PerturbationFamily& family, const SmoothingKernel& kernel, int n,
                   RngStream rng) {
  if (n < 1) throw std::invalid_argument("estimate_C1/C2: n must be >= 1");
  const int d = static_cast<int>(x.size());
  const int m_z = 128;
  const int n_i = std::max(1, n / 8);

  RngStream eval_rng = rng.fork(0);
  RngStream z_rng = rng.fork(1);
  RngStream i_rng = rng.fork(2);

  std::vector<Vector> z(static_cast<std::size_t>(m_z));
  std::vector<Vector> phi(static_cast<std::size_t>(m_z));
  std::vector<double> f_z(static_cast<std::size_t>(m_z));
  for (int l = 0; l < m_z; ++l) {
    RngStream s = z_rng.fork(static_cast<std::uint64_t>(l));
    Vector off = kernel_offset(kernel, d, s);
    z[static_cast<std::size_t>(l)] = add(x, off);
    phi[static_cast<std::size_t>(l)] =
        compute(e, model, z[static_cast<std::size_t>(l)], eval_rng).values;
    f_z[static_cast<std::size_t>(l)] = evaluate(model, z[static_cast<std::size_t>(l)]);
  }
  const double fx = evaluate(model, x);

  // Per-I rows: numerators/denominators averaged over the shared z set.
  std::vector<double> row_c1num(static_cast<std::size_t>(n_i));
  std::vector<double> row_den(static_cast<std::size_t>(n_i));
  std::vector<double> row_mean_sq(static_cast<std::size_t>(n_i));
  for (int i = 0; i < n_i; ++i) {
    RngStream s = i_rng.fork(static_cast<std::uint64_t>(i));
    const PerturbationSample ps = draw(family, x, s);
    const double dx = fx - evaluate(model, sub(x, ps.i_vec));
    double c1num = 0.0, den = 0.0, mean_r = 0.0;
    for (int l = 0; l < m_z; ++l) {
      const double dz =
          f_z[static_cast<std::size_t>(l)] -
          evaluate(model, sub(z[static_cast<std::size_t>(l)], ps.i_vec));
      const double r =
          kern::dot(ps.i_vec.data(), phi[static_cast<std::size_t>(l)].data(), ps.i_vec.size()) - dx;
      c1num += (dz - dx) * (dz - dx);
      den += r * r;
      mean_r += r;
    }
    row_c1num[static_cast<std::size_t>(i)] = c1num / m_z;
    row_den[static_cast<std::size_t>(i)] = den / m_z;
    mean_r /= m_z;
    row_mean_sq[static_cast<std::size_t>(i)] = mean_r * mean_r;
  }

  const MeanSe den_ms = mean_se(row_den);
  C1C2 out;
  if (den_ms.mean <= 1e-20) return out;  // both flagged not-ok

  // Ratio-estimator linearization for the standard errors.
  auto ratio = [&](const std::vector<double>& num_rows) {
    RatioEstimate r;
    const MeanSe num_ms = mean_se(num_rows);
    r.value = num_ms.mean / den_ms.mean;
    std::vector<double> lin(num_rows.size());
    for (std::size_t i = 0; i < num_rows.size(); ++i)
      lin[i] = num_rows[i] - r.value * row_den[i];
    r.se = mean_se(lin).se / den_ms.mean;
    r.ok = true;
    return r;
  };
  out.c1 = ratio(row_c1num);
  out.c2 = ratio(row_mean_sq);
  return out;
}

}  // namespace

RatioEstimate estimate_C1(const BlackBoxModel& model, const Explainer& e, const Vector& x,
                          const PerturbationFamily& family, const SmoothingKernel& kernel, int n,
                          RngStream rng) {
  return estimate_c1c2(model, e, x, family, kernel, n, rng).c1;
}

RatioEstimate estimate_C2(const BlackBoxModel& model, const Explainer& e, const Vector& x,
                          const PerturbationFamily& family, const SmoothingKernel& kernel, int n,
                          RngStream rng) {
  return estimate_c1c2(model, e, x, family, kernel, n, rng).c2;
}

MeasureReport measure_explainer(const BlackBoxModel& model, const Explainer& e, const Vector& x,
                                const PerturbationFamily& family, const MeasureConfig& cfg,
                                const MeasureOptions& opts, RngStream rng,
                                const DrawnSamples* shared_samples,
                                const Attribution* precomputed_attr) {
  MeasureReport rep;
  rep.method_tag = method_tag(e);
  rep.seed = cfg.seed;

  RngStream attr_rng = rng.fork(1);
  const Attribution attr =
      precomputed_attr ? *precomputed_attr : compute(e, model, x, attr_rng);

  DrawnSamples local;
  const DrawnSamples* samples = shared_samples;
  if (!samples) {
    local = record_draws(model, x, family, cfg.n_infd, rng.fork(2));
    samples = &local;
  }
  if (attr.locality == Locality::local && is_mask_family(family))
    throw std::invalid_argument("infidelity: method '" + rep.method_tag +
                                "' is local but the family is binary-mask structured");
  if (attr.locality == Locality::global && !has_masks(family))
    throw std::invalid_argument("infidelity: method '" + rep.method_tag +
                                "' is global and needs a mask-structured family");
  const InfdResult infd = infidelity_on(attr, *samples, cfg.apply_optimal_scaling);
  rep.infidelity = infd.value;
  rep.infidelity_se = infd.se;
  rep.scaling_alpha = infd.alpha;
  rep.n_infd_used = infd.n_used;

  const int d = static_cast<int>(x.size());
  const auto offs = draw_ball_offsets(cfg, d, rng.fork(3));
  const SensResult sens = sens_estimates(e, model, x, cfg, offs, rng.fork(4));
  rep.sens_max = sens.sens_max;
  rep.zero_attr_unnormalized = sens.zero_attr_seen;
  rep.n_sens_used = cfg.n_sens;
  if (opts.with_sens_lips) rep.sens_lips = sens.sens_lips;
  if (opts.with_sens_grad) rep.sens_grad = sens_grad(e, model, x, cfg, rng.fork(5));
  if (opts.with_rinfd)
    rep.rinfd = robust_infidelity(model, e, x, family, cfg, opts.rinfd_outer, rng.fork(6));
  return rep;
}

}  // namespace xinfid
