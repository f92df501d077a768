#pragma once

// Attribution methods: gradient, integrated gradients, occlusion-1, the exact
// Shapley oracle, kernel-smoothed wrappers, and the infidelity-optimal
// explanation (real-valued and binary-mask forms).

#include <memory>
#include <string>
#include <variant>

#include "xinfid/models.hpp"
#include "xinfid/perturb.hpp"

namespace xinfid {

enum class Locality { local, global };

struct Attribution {
  Vector values;
  Locality locality = Locality::local;
  std::string method_tag;
  std::optional<Vector> baseline_used;
};

struct GaussianKernel {
  double sigma = 0.2;
};
struct UniformBoxKernel {
  double radius = 0.2;
};
using SmoothingKernel = std::variant<GaussianKernel, UniformBoxKernel>;

// One draw of z - x for a shift-invariant kernel centered anywhere.
Vector kernel_offset(const SmoothingKernel& kernel, int d, RngStream& rng);
std::string kernel_name(const SmoothingKernel& kernel);

// ---- explainer configurations ----
struct GradientExplainer {};
struct IntGradExplainer {
  Vector baseline;  // empty = zeros
  int steps = 128;
};
struct OcclusionExplainer {
  Vector baseline;  // empty = zeros
};
struct ShapleyExactExplainer {
  Vector baseline;  // empty = zeros
};
struct OptimalExplainer {
  PerturbationFamily family;
  int n = 20000;
  double lambda = 0.0;  // 0 = plain solve with automatic singular fallback
};
struct OptimalMaskedExplainer {
  PerturbationFamily family;
  int n = 20000;
  double lambda = 0.0;
};
// Model-independent fixture (sanity-check foil, degenerate cases in tests).
struct ConstantExplainer {
  Vector values;
  Locality locality = Locality::local;
};
struct Explainer;
struct SmoothedExplainer {
  std::shared_ptr<const Explainer> base;
  SmoothingKernel kernel;
  int n = 200;
};

struct Explainer {
  std::variant<GradientExplainer, IntGradExplainer, OcclusionExplainer, ShapleyExactExplainer,
               OptimalExplainer, OptimalMaskedExplainer, ConstantExplainer, SmoothedExplainer>
      cfg;
};

Locality locality_of(const Explainer& e);
std::string method_tag(const Explainer& e);

// Deterministic in (model, x, rng.key): same inputs give identical output.
Attribution compute(const Explainer& e, const BlackBoxModel& model, const Vector& x,
                    RngStream rng);

// ---- direct entry points ----
Attribution explain_gradient(const BlackBoxModel& model, const Vector& x);
Attribution explain_integrated_gradients(const BlackBoxModel& model, const Vector& x,
                                         const Vector& baseline, int steps);
Attribution explain_occlusion1(const BlackBoxModel& model, const Vector& x,
                               const Vector& baseline);
Attribution explain_shapley_exact(const BlackBoxModel& model, const Vector& x,
                                  const Vector& baseline);
Explainer smooth(Explainer base, SmoothingKernel kernel, int n);
Attribution explain_optimal(const BlackBoxModel& model, const Vector& x,
                            const PerturbationFamily& family, int n, double lambda,
                            RngStream rng);
Attribution explain_optimal_masked(const BlackBoxModel& model, const Vector& x,
                                   const PerturbationFamily& family, int n, double lambda,
                                   RngStream rng);
Attribution to_global(const Attribution& attr, const Vector& x, const Vector& x0);

// ---- recorded-sample plumbing (shared estimators, oracle tests) ----
struct DrawnSamples {
  std::vector<PerturbationSample> samples;
  std::vector<double> delta_f;  // f(x) - f(x - I) per sample
};

DrawnSamples record_draws(const BlackBoxModel& model, const Vector& x,
                          const PerturbationFamily& family, int n, RngStream rng);

// Least-squares fit of the optimal explanation on a recorded sample set.
// masked = solve in z-coordinates (global attribution). When
// efficiency_total is set (the Shapley kernel's excluded full subset carries
// infinite weight), the solve is constrained to sum(phi) = efficiency_total.
Attribution explain_optimal_from_samples(const Vector& x, const DrawnSamples& s, double lambda,
                                         bool masked,
                                         std::optional<double> efficiency_total = std::nullopt);

}  // namespace xinfid
