#pragma once

// Monte Carlo estimators for infidelity, the sensitivity measures, robust
// infidelity, optimal scaling, unit normalization, and the smoothing
// constants C1/C2.

#include "xinfid/explain.hpp"

namespace xinfid {

enum class BallNorm { linf, l2 };

struct MeasureConfig {
  int n_infd = 1000;
  int n_sens = 50;
  double radius_r = 0.1;
  BallNorm ball_norm = BallNorm::linf;
  bool apply_optimal_scaling = true;
  bool apply_unit_normalization = true;
  std::uint64_t seed = 0;
};

struct MeasureReport {
  std::string method_tag;
  double infidelity = 0.0;
  double infidelity_se = 0.0;
  double sens_max = 0.0;
  std::optional<double> sens_grad;
  std::optional<double> sens_lips;
  std::optional<double> rinfd;
  double scaling_alpha = 1.0;
  int n_infd_used = 0;
  int n_sens_used = 0;
  std::uint64_t seed = 0;
  bool zero_attr_unnormalized = false;  // a zero attribution skipped unit normalization
};

// alpha = sum(rho*delta) / sum(rho^2); 1 when sum(rho^2) < 1e-12.
double optimal_scale(const std::vector<double>& rho, const std::vector<double>& delta_f);

struct InfdResult {
  double value = 0.0;
  double se = 0.0;
  double alpha = 1.0;
  int n_used = 0;
};

// Estimator over a recorded sample set (shared-sample comparisons). Local
// attributions use the I^T phi residual; global ones the mask residual.
InfdResult infidelity_on(const Attribution& attr, const DrawnSamples& samples, bool scaling);

InfdResult infidelity_detail(const BlackBoxModel& model, const Attribution& attr, const Vector& x,
                             const PerturbationFamily& family, const MeasureConfig& cfg,
                             RngStream rng);
double infidelity(const BlackBoxModel& model, const Attribution& attr, const Vector& x,
                  const PerturbationFamily& family, const MeasureConfig& cfg, RngStream rng);

// Uniform draw from the radius-r ball around 0 in the given norm.
Vector ball_offset(RngStream& rng, int d, double r, BallNorm norm);
double ball_norm_of(const Vector& v, BallNorm norm);

// Shared-offset sensitivity estimates; offsets may be precomputed so both
// sides of an inequality check maximize over the same candidates.
struct SensResult {
  double sens_max = 0.0;
  double sens_lips = 0.0;
  bool zero_attr_seen = false;
};
SensResult sens_estimates(const Explainer& e, const BlackBoxModel& model, const Vector& x,
                          const MeasureConfig& cfg, const std::vector<Vector>& offsets,
                          RngStream eval_rng);
std::vector<Vector> draw_ball_offsets(const MeasureConfig& cfg, int d, RngStream rng);

double sens_max(const Explainer& e, const BlackBoxModel& model, const Vector& x,
                const MeasureConfig& cfg, RngStream rng);
double sens_lips(const Explainer& e, const BlackBoxModel& model, const Vector& x,
                 const MeasureConfig& cfg, RngStream rng);
// Max Frobenius norm of the finite-difference Jacobian of the attribution map
// over sampled ball points (raw attributions; no normalization).
double sens_grad(const Explainer& e, const BlackBoxModel& model, const Vector& x,
                 const MeasureConfig& cfg, RngStream rng);

// max over u in the ball (u = 0 included) of the infidelity at x + u, with
// the attribution re-derived at x + u; shared I samples across candidates.
double robust_infidelity(const BlackBoxModel& model, const Explainer& e, const Vector& x,
                         const PerturbationFamily& family, const MeasureConfig& cfg, int n_outer,
                         RngStream rng);

struct RatioEstimate {
  double value = 0.0;
  double se = 0.0;
  bool ok = false;  // false when the denominator estimate vanished
};

// Per-point estimates of the smoothing constants (the max over x is taken by
// callers over a finite test set).
RatioEstimate estimate_C1(const BlackBoxModel& model, const Explainer& e, const Vector& x,
                          const PerturbationFamily& family, const SmoothingKernel& kernel, int n,
                          RngStream rng);
RatioEstimate estimate_C2(const BlackBoxModel& model, const Explainer& e, const Vector& x,
                          const PerturbationFamily& family, const SmoothingKernel& kernel, int n,
                          RngStream rng);

// One full (input, method) evaluation following the measurement protocol.
struct MeasureOptions {
  bool with_sens_grad = false;
  bool with_sens_lips = false;
  bool with_rinfd = false;
  int rinfd_outer = 8;
};
MeasureReport measure_explainer(const BlackBoxModel& model, const Explainer& e, const Vector& x,
                                const PerturbationFamily& family, const MeasureConfig& cfg,
                                const MeasureOptions& opts, RngStream rng,
                                const DrawnSamples* shared_samples = nullptr,
                                const Attribution* precomputed_attr = nullptr);

}  // namespace xinfid
