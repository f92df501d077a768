#pragma once

// Executable checks for the propositions, theorems, and bounds, runnable as
// suites over a generated desk-scale model corpus.

#include "xinfid/measures.hpp"

namespace xinfid {

enum class CheckKind { inequality, equality };  // inequality: lhs <= rhs + slack

struct CheckResult {
  std::string name;
  bool applicable = true;  // hypothesis satisfied (non-applicable never fails the suite)
  bool passed = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack_used = 0.0;
  CheckKind kind = CheckKind::inequality;
  std::string context;
};

CheckResult check_completeness(const BlackBoxModel& model, const Vector& x, const Vector& x0);

// sens_max of the smoothed explainer vs the kernel average of base sens_max,
// on shared ball offsets and shared kernel draws (raw attributions).
CheckResult check_smoothing_sensitivity(const BlackBoxModel& model, const Explainer& base,
                                        const SmoothingKernel& kernel, const Vector& x,
                                        const MeasureConfig& cfg, int n_kernel, RngStream rng);

// Smoothed infidelity vs (C2/(1-2 sqrt(C1))) * kernel average of base
// infidelity, all estimated on one shared (I, z) grid; not applicable when
// the hypothesis C1 <= 1/sqrt(2) fails or the constant is not positive.
CheckResult check_smoothing_infidelity(const BlackBoxModel& model, const Explainer& base,
                                       const SmoothingKernel& kernel,
                                       const PerturbationFamily& family, const Vector& x,
                                       int n, RngStream rng);

CheckResult check_softplus_bound(const MlpModel& model, const Vector& x, double radius,
                                 int n_sens, RngStream rng);

// (a) unscaled gradient infidelity <= E[||I||^4] L^2 / 2 on shared samples;
// (b) raw gradient sens_max over the L2 ball <= L * r.
std::pair<CheckResult, CheckResult> check_hessian_bounds(const QuadraticModel& model,
                                                         const PerturbationFamily& family,
                                                         const Vector& x,
                                                         const MeasureConfig& cfg, RngStream rng);

CheckResult check_rinfd_lower_bound(const BlackBoxModel& model, const Explainer& e,
                                    const Vector& x, const PerturbationFamily& family,
                                    const MeasureConfig& cfg, int n_outer, RngStream rng);

CheckResult check_adversarial_bound(const BlackBoxModel& model, const Vector& x, int y,
                                    double epsilon, int n_probe, RngStream rng);

struct SanityRow {
  std::string method;
  double corr = 0.0;
  double corr_abs = 0.0;
};
std::vector<SanityRow> run_sanity_check(const MlpModel& model, int output_index,
                                        const std::vector<Vector>& inputs,
                                        const std::vector<std::pair<std::string, Explainer>>& explainers,
                                        RngStream rng);

// ---- generated corpus ----
MlpModel random_softplus_mlp(int d, int n_layers, int width, double scale, bool zero_bias,
                             RngStream& rng);
QuadraticModel random_quadratic(int d, double h_scale, RngStream& rng);
QuadraticModel random_linear(int d, RngStream& rng);
Vector random_input(int d, RngStream& rng);

// ---- suites ----
struct SuiteOptions {
  std::uint64_t seed = 7;
  int models_per_check = 20;
  bool inject_failure = false;  // appends a deliberately failing record (exit-path fixture)
};

// suite: all | completeness | smoothing | bounds | rinfd | adversarial
std::vector<CheckResult> run_suite(const std::string& suite, const SuiteOptions& options);
bool suite_passed(const std::vector<CheckResult>& results);

}  // namespace xinfid
