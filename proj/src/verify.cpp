#include "xinfid/verify.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "xinfid/parallel.hpp"

namespace xinfid {

namespace {

std::string ctx(std::initializer_list<std::pair<const char*, std::string>> kv) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [k, v] : kv) {
    if (!first) os << " ";
    os << k << "=" << v;
    first = false;
  }
  return os.str();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double logistic_loss(double f, int y) { return softplus(f) - static_cast<double>(y) * f; }

// max_{s in {-1,1}^d} ||M s||_1, the inf-to-one operator norm: the matrix
// norm compatible with L-inf perturbations (|d^T M d| <= ||d||_inf^2 * this).
// Exact by sign enumeration for small d, d * spectral as the cap above.
double inf_to_one_norm(const SquareMatrix& m) {
  const int d = m.n;
  if (d > 16) return d * spectral_norm_sym(m, 50);
  double best = 0.0;
  Vector s(static_cast<std::size_t>(d));
  for (std::size_t bits = 0; bits < (std::size_t(1) << d); ++bits) {
    for (int i = 0; i < d; ++i) s[static_cast<std::size_t>(i)] = (bits >> i) & 1u ? 1.0 : -1.0;
    double acc = 0.0;
    for (int i = 0; i < d; ++i)
      acc += std::fabs(kern::dot(m.row(i), s.data(), static_cast<std::size_t>(d)));
    best = std::max(best, acc);
  }
  return best;
}

// sup over the eps-box around x of the L-inf-compatible Hessian norm.
double hessian_box_norm_bound(const BlackBoxModel& model, const Vector& x, double eps,
                              int n_probe, RngStream rng) {
  if (const auto* q = std::get_if<QuadraticModel>(&model.impl)) return inf_to_one_norm(q->h);
  double best = inf_to_one_norm(fd_hessian(model, x));
  for (int p = 0; p < n_probe; ++p) {
    RngStream s = rng.fork(static_cast<std::uint64_t>(p));
    const Vector y = sample_uniform_box(s, x, eps);
    best = std::max(best, inf_to_one_norm(fd_hessian(model, y)));
  }
  return best;
}

}  // namespace

CheckResult check_completeness(const BlackBoxModel& model, const Vector& x, const Vector& x0) {
  CheckResult r;
  r.name = "completeness";
  r.kind = CheckKind::equality;
  const PerturbationFamily fam = BaselineDiff{x0};
  const Attribution opt = explain_optimal(model, x, fam, 1, 0.0, derive_stream(0, 0));
  const Vector i_vec = sub(x, x0);
  r.lhs = dot(opt.values, i_vec);
  r.rhs = evaluate(model, x) - evaluate(model, x0);
  r.slack_used = 1e-6;
  r.passed = std::fabs(r.lhs - r.rhs) <= r.slack_used;
  r.context = ctx({{"d", std::to_string(x.size())}});
  return r;
}

CheckResult check_smoothing_sensitivity(const BlackBoxModel& model, const Explainer& base,
                                        const SmoothingKernel& kernel, const Vector& x,
                                        const MeasureConfig& cfg, int n_kernel, RngStream rng) {
  CheckResult r;
  r.name = "smoothing-sensitivity";
  const int d = static_cast<int>(x.size());

  // Raw attributions; the theorem has no normalization step.
  MeasureConfig raw = cfg;
  raw.apply_unit_normalization = false;

  RngStream eval_rng = rng.fork(0);
  const auto offsets = draw_ball_offsets(raw, d, rng.fork(1));

  const Explainer smoothed = smooth(base, kernel, n_kernel);
  const double lhs = sens_estimates(smoothed, model, x, raw, offsets, eval_rng).sens_max;

  // The same kernel draws the smoothed explainer uses at eval_rng, so both
  // sides of the inequality see one shared candidate set.
  std::vector<double> base_sens(static_cast<std::size_t>(n_kernel));
  for (int l = 0; l < n_kernel; ++l) {
    RngStream item = eval_rng.fork(static_cast<std::uint64_t>(l));
    RngStream off_rng = item.fork(0);
    const Vector off = kernel_offset(kernel, d, off_rng);
    const Vector z = add(x, off);
    base_sens[static_cast<std::size_t>(l)] =
        sens_estimates(base, model, z, raw, offsets, item.fork(1)).sens_max;
  }
  const MeanSe rhs = mean_se(base_sens);

  r.lhs = lhs;
  r.rhs = rhs.mean;
  r.slack_used = 3.0 * rhs.se + 1e-12;
  r.passed = r.lhs <= r.rhs + r.slack_used;
  r.context = ctx({{"kernel", kernel_name(kernel)}, {"n_kernel", std::to_string(n_kernel)}});
  return r;
}

CheckResult check_smoothing_infidelity(const BlackBoxModel& model, const Explainer& base,
                                       const SmoothingKernel& kernel,
                                       const PerturbationFamily& family, const Vector& x,
                                       int n, RngStream rng) {
  CheckResult r;
  r.name = "smoothing-infidelity";
  const int d = static_cast<int>(x.size());
  const int m_z = 200;

  RngStream eval_rng = rng.fork(0);
  RngStream i_rng = rng.fork(1);

  // Kernel grid mirroring the smoothed explainer's draws at eval_rng.
  std::vector<Vector> z(static_cast<std::size_t>(m_z));
  std::vector<Vector> phi(static_cast<std::size_t>(m_z));
  std::vector<double> f_z(static_cast<std::size_t>(m_z));
  for (int l = 0; l < m_z; ++l) {
    RngStream item = eval_rng.fork(static_cast<std::uint64_t>(l));
    RngStream off_rng = item.fork(0);
    const Vector off = kernel_offset(kernel, d, off_rng);
    z[static_cast<std::size_t>(l)] = add(x, off);
    phi[static_cast<std::size_t>(l)] =
        compute(base, model, z[static_cast<std::size_t>(l)], item.fork(1)).values;
    f_z[static_cast<std::size_t>(l)] = evaluate(model, z[static_cast<std::size_t>(l)]);
  }

  // Shared I samples, drawn from the measure at x (the theorem's common mu_I).
  const DrawnSamples samples = record_draws(model, x, family, n, i_rng);
  const std::size_t n_i = samples.samples.size();

  double sum_sq_all = 0.0;      // mean_{s,l} r_sl^2 accumulator (denominator D)
  double sum_c1num = 0.0;       // mean_{s,l} (dz - dx)^2
  std::vector<double> rhs_row(static_cast<std::size_t>(m_z), 0.0);  // per-z base infidelity
  std::vector<double> lhs_row(n_i);                                 // per-I smoothed residual^2
  std::vector<double> den_row(n_i);
  for (std::size_t s = 0; s < n_i; ++s) {
    const Vector& i_vec = samples.samples[s].i_vec;
    const double dx = samples.delta_f[s];
    double mean_r = 0.0, den = 0.0;
    for (int l = 0; l < m_z; ++l) {
      const double rr =
          kern::dot(i_vec.data(), phi[static_cast<std::size_t>(l)].data(), i_vec.size()) - dx;
      const double dz = f_z[static_cast<std::size_t>(l)] -
                        evaluate(model, sub(z[static_cast<std::size_t>(l)], i_vec));
      const double rprime = rr + dx - dz;  // residual against z's function change
      mean_r += rr;
      den += rr * rr;
      sum_c1num += (dz - dx) * (dz - dx);
      rhs_row[static_cast<std::size_t>(l)] += rprime * rprime;
    }
    mean_r /= m_z;
    lhs_row[s] = mean_r * mean_r;
    den_row[s] = den / m_z;
    sum_sq_all += den;
  }
  const double big_d = sum_sq_all / (static_cast<double>(n_i) * m_z);
  const double c1num = sum_c1num / (static_cast<double>(n_i) * m_z);
  for (double& v : rhs_row) v /= static_cast<double>(n_i);

  const MeanSe rhs_avg = mean_se(rhs_row);

  // LHS through the production smoothed explainer and infidelity estimator.
  const Explainer smoothed = smooth(base, kernel, m_z);
  const Attribution phik = compute(smoothed, model, x, eval_rng);
  const InfdResult lhs = infidelity_on(phik, samples, /*scaling=*/false);

  double c1 = 0.0, c2 = 1.0;
  if (big_d > 1e-18) {
    c1 = c1num / big_d;
    c2 = mean_se(lhs_row).mean / big_d;
  }
  const double denom_const = 1.0 - 2.0 * std::sqrt(std::max(c1, 0.0));
  r.applicable = c1 <= 1.0 / std::sqrt(2.0) && denom_const > 0.0;
  const double constant = r.applicable ? c2 / denom_const : 0.0;
  r.lhs = lhs.value;
  r.rhs = constant * rhs_avg.mean;
  r.slack_used = 3.0 * (lhs.se + constant * rhs_avg.se) + 1e-12;
  r.passed = !r.applicable || r.lhs <= r.rhs + r.slack_used;
  r.context = ctx({{"kernel", kernel_name(kernel)},
                   {"family", family_name(family)},
                   {"C1", fmt(c1)},
                   {"C2", fmt(c2)},
                   {"constant", fmt(constant)}});
  return r;
}

CheckResult check_softplus_bound(const MlpModel& model, const Vector& x, double radius,
                                 int n_sens, RngStream rng) {
  CheckResult r;
  r.name = "softplus-sens-bound";
  const double bound = softplus_sensitivity_bound(model, radius);  // throws off-hypothesis

  MeasureConfig cfg;
  cfg.radius_r = radius;
  cfg.ball_norm = BallNorm::l2;  // the bound is stated for the L2 distance
  cfg.apply_unit_normalization = false;
  cfg.n_sens = n_sens;
  const BlackBoxModel bb = make_model(model);
  r.lhs = sens_max(Explainer{GradientExplainer{}}, bb, x, cfg, rng);
  r.rhs = bound;
  r.slack_used = 1e-12;
  r.passed = r.lhs <= r.rhs + r.slack_used;
  r.context = ctx({{"d", std::to_string(model.input_dim)},
                   {"layers", std::to_string(model.layers.size())},
                   {"r", fmt(radius)}});
  return r;
}

std::pair<CheckResult, CheckResult> check_hessian_bounds(const QuadraticModel& model,
                                                         const PerturbationFamily& family,
                                                         const Vector& x,
                                                         const MeasureConfig& cfg, RngStream rng) {
  const BlackBoxModel bb = make_model(model);
  const double big_l = spectral_norm_sym(model.h, 50);

  // (a) unscaled gradient infidelity vs E[||I||^4] L^2 / 2, shared samples.
  CheckResult a;
  a.name = "hessian-infd-bound";
  const Attribution grad_attr = explain_gradient(bb, x);
  const DrawnSamples samples = record_draws(bb, x, family, cfg.n_infd, rng.fork(0));
  const InfdResult infd = infidelity_on(grad_attr, samples, /*scaling=*/false);
  std::vector<double> i4(samples.samples.size());
  for (std::size_t s = 0; s < samples.samples.size(); ++s) {
    const double n2 = norm2(samples.samples[s].i_vec);
    i4[s] = n2 * n2 * n2 * n2;
  }
  const MeanSe i4_ms = mean_se(i4);
  a.lhs = infd.value;
  a.rhs = i4_ms.mean * big_l * big_l / 2.0;
  a.slack_used = 3.0 * (infd.se + i4_ms.se * big_l * big_l / 2.0) + 1e-12;
  a.passed = a.lhs <= a.rhs + a.slack_used;
  a.context = ctx({{"L", fmt(big_l)}, {"family", family_name(family)}});

  // (b) raw gradient sens over the L2 ball vs L * r.
  CheckResult b;
  b.name = "hessian-sens-bound";
  MeasureConfig scfg = cfg;
  scfg.ball_norm = BallNorm::l2;
  scfg.apply_unit_normalization = false;
  b.lhs = sens_max(Explainer{GradientExplainer{}}, bb, x, scfg, rng.fork(1));
  b.rhs = big_l * cfg.radius_r;
  b.slack_used = 1e-12;
  b.passed = b.lhs <= b.rhs + b.slack_used;
  b.context = ctx({{"L", fmt(big_l)}, {"r", fmt(cfg.radius_r)}});
  return {a, b};
}

CheckResult check_rinfd_lower_bound(const BlackBoxModel& model, const Explainer& e,
                                    const Vector& x, const PerturbationFamily& family,
                                    const MeasureConfig& cfg, int n_outer, RngStream rng) {
  CheckResult r;
  r.name = "rinfd-lower-bound";
  const int d = static_cast<int>(x.size());

  RngStream eval_rng = rng.fork(0);
  RngStream u_rng = rng.fork(1);
  RngStream infd_rng = rng.fork(2);
  RngStream shared_i_rng = rng.fork(3);

  // Shared u candidates (u = 0 first) for both maximizations.
  std::vector<Vector> us(static_cast<std::size_t>(n_outer), zeros(d));
  for (int j = 1; j < n_outer; ++j) {
    RngStream s = u_rng.fork(static_cast<std::uint64_t>(j));
    us[static_cast<std::size_t>(j)] = ball_offset(s, d, cfg.radius_r, cfg.ball_norm);
  }

  // Shared I samples drawn at x for the A and B terms.
  const DrawnSamples samples = record_draws(model, x, family, cfg.n_infd, shared_i_rng);
  const std::size_t n_i = samples.samples.size();
  const Attribution phi_x = compute(e, model, x, eval_rng);
  const double fx = evaluate(model, x);
  std::vector<double> fxmi(n_i);
  for (std::size_t s = 0; s < n_i; ++s)
    fxmi[s] = evaluate(model, sub(x, samples.samples[s].i_vec));

  double rinfd = 0.0, a_hat = 0.0, b1_hat = 0.0, b2_hat = 0.0;
  double a_se = 0.0, b2_se = 0.0;
  for (const Vector& u : us) {
    const Vector y = add(x, u);
    const Attribution phi_y = compute(e, model, y, eval_rng);
    const InfdResult infd = infidelity_detail(model, phi_y, y, family, cfg, infd_rng);
    rinfd = std::max(rinfd, infd.value);

    std::vector<double> a_terms(n_i), b2_terms(n_i);
    for (std::size_t s = 0; s < n_i; ++s) {
      const Vector& iv = samples.samples[s].i_vec;
      a_terms[s] = std::fabs(kern::dot(iv.data(), phi_y.values.data(), iv.size()) -
                             kern::dot(iv.data(), phi_x.values.data(), iv.size()));
      b2_terms[s] = std::fabs(evaluate(model, sub(y, iv)) - fxmi[s]);
    }
    const MeanSe a_ms = mean_se(a_terms);
    const MeanSe b2_ms = mean_se(b2_terms);
    if (a_ms.mean > a_hat) {
      a_hat = a_ms.mean;
      a_se = a_ms.se;
    }
    if (b2_ms.mean > b2_hat) {
      b2_hat = b2_ms.mean;
      b2_se = b2_ms.se;
    }
    b1_hat = std::max(b1_hat, std::fabs(evaluate(model, y) - fx));
  }
  const double gap = std::max(0.0, (a_hat - b1_hat - b2_hat) / 2.0);
  // Lower bound on the left: record as lhs <= rhs with rhs = RINFD.
  r.lhs = gap * gap;
  r.rhs = rinfd;
  r.slack_used = 3.0 * (a_se + b2_se) * std::max(gap, 1.0) + 1e-12;
  r.passed = r.lhs <= r.rhs + r.slack_used;
  r.context = ctx({{"A", fmt(a_hat)},
                   {"B1", fmt(b1_hat)},
                   {"B2", fmt(b2_hat)},
                   {"family", family_name(family)}});
  return r;
}

CheckResult check_adversarial_bound(const BlackBoxModel& model, const Vector& x, int y,
                                    double epsilon, int n_probe, RngStream rng) {
  if (y != 0 && y != 1) throw std::invalid_argument("check_adversarial_bound: y must be 0 or 1");
  CheckResult r;
  r.name = "adversarial-loss-bound";
  const int d = static_cast<int>(x.size());
  const double fx = evaluate(model, x);
  const Vector g = gradient(model, x);

  // Probe candidates: 0, the signed-gradient corners, random corners, box draws.
  double lhs = logistic_loss(fx, y);
  auto consider = [&](const Vector& delta) {
    lhs = std::max(lhs, logistic_loss(evaluate(model, add(x, delta)), y));
  };
  Vector sgn(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    sgn[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(i)] >= 0.0 ? epsilon : -epsilon;
  consider(sgn);
  consider(scaled(sgn, -1.0));
  RngStream probe = rng.fork(0);
  for (int p = 0; p < n_probe; ++p) {
    RngStream s = probe.fork(static_cast<std::uint64_t>(p));
    if (p % 2 == 0) {
      Vector corner(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i)
        corner[static_cast<std::size_t>(i)] = s.uniform() < 0.5 ? -epsilon : epsilon;
      consider(corner);
    } else {
      consider(sample_uniform_box(s, zeros(d), epsilon));
    }
  }

  const double hess = hessian_box_norm_bound(model, x, epsilon, 16, rng.fork(1));
  r.lhs = lhs;
  r.rhs = logistic_loss(fx, y) + epsilon * norm1(g) + 0.5 * epsilon * epsilon * hess;
  r.slack_used = 1e-8;
  r.passed = r.lhs <= r.rhs + r.slack_used;
  r.context = ctx({{"y", std::to_string(y)}, {"eps", fmt(epsilon)}});
  return r;
}

std::vector<SanityRow> run_sanity_check(const MlpModel& model, int output_index,
                                        const std::vector<Vector>& inputs,
                                        const std::vector<std::pair<std::string, Explainer>>& explainers,
                                        RngStream rng) {
  if (model.layers.empty()) throw std::invalid_argument("run_sanity_check: empty model");
  const int last = static_cast<int>(model.layers.size()) - 1;
  const MlpModel randomized = randomize_layer(model, last, rng.fork(0));
  const BlackBoxModel m0 = make_model(model, output_index);
  const BlackBoxModel m1 = make_model(randomized, output_index);

  std::vector<SanityRow> rows;
  for (std::size_t e = 0; e < explainers.size(); ++e) {
    SanityRow row;
    row.method = explainers[e].first;
    double sum = 0.0, sum_abs = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      RngStream s = rng.fork(1 + e * 7919 + i);
      const Attribution a = compute(explainers[e].second, m0, inputs[i], s);
      const Attribution b = compute(explainers[e].second, m1, inputs[i], s);
      sum += spearman(a.values, b.values).rho;
      Vector aa = a.values, bb = b.values;
      for (double& v : aa) v = std::fabs(v);
      for (double& v : bb) v = std::fabs(v);
      sum_abs += spearman(aa, bb).rho;
    }
    row.corr = sum / static_cast<double>(inputs.size());
    row.corr_abs = sum_abs / static_cast<double>(inputs.size());
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Corpus

MlpModel random_softplus_mlp(int d, int n_layers, int width, double scale, bool zero_bias,
                             RngStream& rng) {
  MlpModel m;
  m.input_dim = d;
  int in = d;
  for (int l = 0; l < n_layers; ++l) {
    const int out = l + 1 == n_layers ? 1 : width;
    MlpLayer ly;
    ly.in = in;
    ly.out = out;
    ly.w.resize(static_cast<std::size_t>(in) * out);
    const double sd = scale / std::sqrt(static_cast<double>(in));
    for (double& v : ly.w) v = sd * rng.normal();
    ly.b.assign(static_cast<std::size_t>(out), 0.0);
    if (!zero_bias)
      for (double& v : ly.b) v = 0.1 * rng.normal();
    ly.act = Activation::softplus;
    m.layers.push_back(std::move(ly));
    in = out;
  }
  return m;
}

QuadraticModel random_quadratic(int d, double h_scale, RngStream& rng) {
  QuadraticModel q;
  q.h = SquareMatrix(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = h_scale * rng.normal() / std::sqrt(static_cast<double>(d));
      q.h.at(i, j) = v;
      q.h.at(j, i) = v;
    }
  q.w.resize(static_cast<std::size_t>(d));
  for (double& v : q.w) v = rng.normal();
  q.c = rng.normal();
  return q;
}

QuadraticModel random_linear(int d, RngStream& rng) {
  QuadraticModel q;
  q.h = SquareMatrix(d);
  q.w.resize(static_cast<std::size_t>(d));
  for (double& v : q.w) v = rng.normal();
  q.c = rng.normal();
  return q;
}

Vector random_input(int d, RngStream& rng) { return sample_gaussian(rng, zeros(d), 1.0); }

// ---------------------------------------------------------------------------
// Suites

namespace {

// Checks assemble as independent jobs and execute in a work pool; results
// land in job order so reruns are byte-identical for any worker count.
struct CheckJob {
  std::string label;
  std::function<std::vector<CheckResult>(void)> run;
};

void tag(std::vector<CheckJob>& out, std::string label, std::function<CheckResult()> fn) {
  out.push_back({std::move(label), [fn = std::move(fn)] {
                   return std::vector<CheckResult>{fn()};
                 }});
}

std::vector<CheckJob> suite_completeness(const SuiteOptions& o) {
  std::vector<CheckJob> out;
  for (int i = 0; i < o.models_per_check; ++i) {
    RngStream rng = derive_stream(o.seed, 100 + static_cast<std::uint64_t>(i));
    const int d = 2 + i % 9;
    const MlpModel m = random_softplus_mlp(d, 2 + i % 2, 8, 1.0, true, rng);
    const BlackBoxModel bb = make_model(m);
    const Vector x = random_input(d, rng);
    const Vector x0 = sample_gaussian(rng, zeros(d), 0.5);
    tag(out, "mlp-" + std::to_string(i), [=] { return check_completeness(bb, x, x0); });
  }
  {
    RngStream rng = derive_stream(o.seed, 160);
    const BlackBoxModel lin = make_model(random_linear(4, rng));
    const Vector x = random_input(4, rng);
    tag(out, "linear", [=] { return check_completeness(lin, x, zeros(4)); });
    tag(out, "zero-perturbation", [=] { return check_completeness(lin, x, x); });
  }
  return out;
}

std::vector<CheckJob> suite_smoothing(const SuiteOptions& o) {
  std::vector<CheckJob> out;
  const std::vector<SmoothingKernel> kernels = {SmoothingKernel{GaussianKernel{0.1}},
                                                SmoothingKernel{GaussianKernel{0.3}},
                                                SmoothingKernel{UniformBoxKernel{0.2}}};
  MeasureConfig cfg;
  cfg.n_sens = 50;
  // Smoothed-sensitivity bound over the corpus x kernels.
  for (int i = 0; i < o.models_per_check; ++i) {
    RngStream rng = derive_stream(o.seed, 200 + static_cast<std::uint64_t>(i));
    BlackBoxModel bb;
    std::string label;
    const int d = 2 + i % 7;
    switch (i % 3) {
      case 0:
        bb = make_model(random_softplus_mlp(d, 2, 8, 1.4, true, rng));
        label = "mlp-" + std::to_string(i);
        break;
      case 1:
        bb = make_model(random_quadratic(d, 1.0, rng));
        label = "quad-" + std::to_string(i);
        break;
      default:
        bb = make_model(random_linear(d, rng));
        label = "linear-" + std::to_string(i);
        break;
    }
    const Vector x = random_input(bb.input_dim(), rng);
    for (std::size_t k = 0; k < kernels.size(); ++k) {
      const SmoothingKernel kernel = kernels[k];
      RngStream check_rng = rng.fork(500 + k);
      tag(out, label + "-k" + std::to_string(k), [=] {
        return check_smoothing_sensitivity(bb, Explainer{GradientExplainer{}}, kernel, x, cfg,
                                           100, check_rng);
      });
    }
  }
  // The toy function case: smoothing averages the gradient flip.
  {
    RngStream rng = derive_stream(o.seed, 230);
    tag(out, "toy", [=] {
      return check_smoothing_sensitivity(make_toy(), Explainer{GradientExplainer{}},
                                         SmoothingKernel{UniformBoxKernel{2.0}},
                                         Vector{20.0, 11.9}, cfg, 200, rng);
    });
  }
  // Smoothed-infidelity bound over seeds on quadratic models, Gaussian kernel.
  for (int i = 0; i < o.models_per_check; ++i) {
    RngStream rng = derive_stream(o.seed, 240 + static_cast<std::uint64_t>(i));
    const int d = 2 + i % 5;
    const QuadraticModel q = random_quadratic(d, 0.8, rng);
    const BlackBoxModel bb = make_model(q);
    const Vector x = random_input(d, rng);
    const PerturbationFamily fam = NoisyBaseline{zeros(d), 1.0};
    RngStream check_rng = rng.fork(1);
    tag(out, "quad-" + std::to_string(i), [=] {
      return check_smoothing_infidelity(bb, Explainer{GradientExplainer{}},
                                        SmoothingKernel{GaussianKernel{0.1}}, fam, x, 1000,
                                        check_rng);
    });
  }
  return out;
}

std::vector<CheckJob> suite_bounds(const SuiteOptions& o) {
  std::vector<CheckJob> out;
  for (int i = 0; i < o.models_per_check; ++i) {
    RngStream rng = derive_stream(o.seed, 300 + static_cast<std::uint64_t>(i));
    const int d = 2 + i % 5;
    const MlpModel m = random_softplus_mlp(d, 1 + i % 3, 6, 1.2, true, rng);
    const Vector x = random_input(d, rng);
    RngStream check_rng = rng.fork(1);
    tag(out, "softplus-" + std::to_string(i),
        [=] { return check_softplus_bound(m, x, 0.1, 500, check_rng); });
  }
  MeasureConfig cfg;
  cfg.n_infd = 10000;
  cfg.n_sens = 500;
  cfg.radius_r = 0.1;
  for (int i = 0; i < o.models_per_check; ++i) {
    RngStream rng = derive_stream(o.seed, 340 + static_cast<std::uint64_t>(i));
    const int d = 2 + i % 5;
    QuadraticModel q;
    std::string label;
    if (i == 0) {
      q = random_linear(d, rng);
      label = "linear";
    } else if (i == 1) {
      q.h = SquareMatrix::identity(2);
      q.w = zeros(2);
      label = "identity";
    } else if (i == 2) {
      q.h = SquareMatrix(2);
      q.h.at(0, 0) = 5.0;
      q.h.at(1, 1) = 1.0;
      q.w = zeros(2);
      label = "diag51";
    } else {
      q = random_quadratic(d, 1.5, rng);
      label = "quad-" + std::to_string(i);
    }
    const int dq = q.h.n;
    const Vector x = random_input(dq, rng);
    const PerturbationFamily fam = NoisyBaseline{zeros(dq), 1.0};
    RngStream check_rng = rng.fork(7);
    out.push_back({label, [=]() -> std::vector<CheckResult> {
                     auto [a, b] = check_hessian_bounds(q, fam, x, cfg, check_rng);
                     return {std::move(a), std::move(b)};
                   }});
  }
  return out;
}

std::vector<CheckJob> suite_rinfd(const SuiteOptions& o) {
  std::vector<CheckJob> out;
  MeasureConfig cfg;
  cfg.n_infd = 8000;
  cfg.radius_r = 0.1;
  cfg.apply_optimal_scaling = false;
  {
    RngStream rng = derive_stream(o.seed, 400);
    tag(out, "toy-boundary", [=] {
      return check_rinfd_lower_bound(make_toy(), Explainer{GradientExplainer{}},
                                     Vector{20.0, 11.95}, BaselineDiff{zeros(2)}, cfg, 12, rng);
    });
  }
  for (int i = 0; i < o.models_per_check - 1; ++i) {
    RngStream rng = derive_stream(o.seed, 410 + static_cast<std::uint64_t>(i));
    const int d = 2 + i % 6;
    BlackBoxModel bb = i % 2 == 0 ? make_model(random_softplus_mlp(d, 2, 8, 1.3, true, rng))
                                  : make_model(random_quadratic(d, 1.0, rng));
    const Vector x = random_input(d, rng);
    const PerturbationFamily fam =
        i % 3 == 0 ? PerturbationFamily{BaselineDiff{zeros(d)}}
                   : PerturbationFamily{NoisyBaseline{zeros(d), 0.7}};
    RngStream check_rng = rng.fork(3);
    tag(out, (i % 2 == 0 ? "mlp-" : "quad-") + std::to_string(i), [=] {
      return check_rinfd_lower_bound(bb, Explainer{GradientExplainer{}}, x, fam, cfg, 12,
                                     check_rng);
    });
  }
  return out;
}

std::vector<CheckJob> suite_adversarial(const SuiteOptions& o) {
  std::vector<CheckJob> out;
  for (int i = 0; i < 4; ++i) {
    RngStream rng = derive_stream(o.seed, 500 + static_cast<std::uint64_t>(i));
    const int d = 2 + i;
    const BlackBoxModel lin = make_model(random_linear(d, rng));
    const Vector x = random_input(d, rng);
    RngStream check_rng = rng.fork(1);
    tag(out, "linear-" + std::to_string(i),
        [=] { return check_adversarial_bound(lin, x, i % 2, 0.1, 64, check_rng); });
  }
  for (int i = 0; i < o.models_per_check; ++i) {
    RngStream rng = derive_stream(o.seed, 520 + static_cast<std::uint64_t>(i));
    const int d = 2 + i % 5;
    const BlackBoxModel q = make_model(random_quadratic(d, 1.2, rng));
    const Vector x = random_input(d, rng);
    RngStream check_rng = rng.fork(1);
    tag(out, "quad-" + std::to_string(i),
        [=] { return check_adversarial_bound(q, x, i % 2, 0.1, 128, check_rng); });
  }
  return out;
}

}  // namespace

std::vector<CheckResult> run_suite(const std::string& suite, const SuiteOptions& options) {
  const bool all = suite == "all";
  if (!all && suite != "completeness" && suite != "smoothing" && suite != "bounds" &&
      suite != "rinfd" && suite != "adversarial")
    throw std::invalid_argument("unknown suite '" + suite + "'");
  std::vector<CheckJob> jobs;
  auto append = [&](std::vector<CheckJob> js) {
    for (auto& j : js) jobs.push_back(std::move(j));
  };
  if (all || suite == "completeness") append(suite_completeness(options));
  if (all || suite == "smoothing") append(suite_smoothing(options));
  if (all || suite == "bounds") append(suite_bounds(options));
  if (all || suite == "rinfd") append(suite_rinfd(options));
  if (all || suite == "adversarial") append(suite_adversarial(options));

  auto groups = map_chunks<std::vector<CheckResult>>(
      static_cast<std::int64_t>(jobs.size()), 1, [&](std::int64_t c, std::int64_t, std::int64_t) {
        std::vector<CheckResult> rs = jobs[static_cast<std::size_t>(c)].run();
        for (CheckResult& r : rs) r.name += "/" + jobs[static_cast<std::size_t>(c)].label;
        return rs;
      });
  std::vector<CheckResult> out;
  for (auto& g : groups)
    for (auto& r : g) out.push_back(std::move(r));
  if (options.inject_failure) {
    CheckResult bad;
    bad.name = "forced-failure-fixture";
    bad.kind = CheckKind::inequality;
    bad.lhs = 1.0;
    bad.rhs = 0.0;
    bad.slack_used = 0.0;
    bad.passed = false;
    bad.context = "deliberately corrupted bound (exit-path fixture)";
    out.push_back(std::move(bad));
  }
  return out;
}

bool suite_passed(const std::vector<CheckResult>& results) {
  for (const CheckResult& r : results)
    if (r.applicable && !r.passed) return false;
  return true;
}

}  // namespace xinfid
