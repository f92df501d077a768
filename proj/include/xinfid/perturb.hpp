#pragma once

// The perturbation-distribution catalog: baseline differences, noisy and
// multiple baselines, coordinate perturbations, the Shapley-kernel subset
// law, and square-patch removal, plus second-moment accumulation.

#include <optional>
#include <variant>

#include "xinfid/numerics.hpp"

namespace xinfid {

struct BaselineDiff {
  Vector x0;
};
struct SubsetBaseline {
  std::vector<int> subset;
  Vector x0;
};
struct NoisyBaseline {
  Vector x0;
  double sigma = 0.0;
};
struct MultiBaseline {
  std::vector<Vector> baselines;
  std::vector<double> weights;  // must sum to 1
};
struct CoordinateEps {
  double epsilon = 0.0;
};
struct CoordinateTimesX {};
struct ShapleyKernel {};
struct SquareRemoval {
  int height = 0;
  int width = 0;
  int smin = 1;
  int smax = 1;
};

using PerturbationFamily =
    std::variant<BaselineDiff, SubsetBaseline, NoisyBaseline, MultiBaseline, CoordinateEps,
                 CoordinateTimesX, ShapleyKernel, SquareRemoval>;

struct PerturbationSample {
  Vector i_vec;
  std::optional<Vector> mask;  // binary z with i_vec = x (.) z, when structured
};

// Family classification.
bool is_deterministic(const PerturbationFamily& family);
bool has_masks(const PerturbationFamily& family);
// True when the family's natural infidelity residual is the binary-mask form.
bool is_mask_family(const PerturbationFamily& family);
void validate_family(const PerturbationFamily& family, int d);
std::string family_name(const PerturbationFamily& family);

PerturbationSample draw(const PerturbationFamily& family, const Vector& x, RngStream& rng);

// Normalized probabilities over the 2^d - 2 proper nonempty subsets as
// (subset size, per-subset probability) pairs; sizes 0 and d are excluded.
std::vector<std::pair<int, double>> shapley_subset_distribution(int d);

Vector draw_square_mask(RngStream& rng, int height, int width, int smin, int smax);

// E[I I^T]: exact for deterministic families, n-sample Monte Carlo otherwise.
SquareMatrix second_moment(const PerturbationFamily& family, const Vector& x, int n,
                           RngStream rng);

}  // namespace xinfid
