#pragma once

// The CLI mini-grammar `name:key=value,key=value`. Vector values use ';'
// separators and '|' between vectors (e.g. multi:baselines=0;0|1;1).

#include "xinfid/explain.hpp"

namespace xinfid {

// Perturbation specs: baseline[:x0=...], subset:indices=0;2[,x0=...],
// noisy-baseline:sigma=0.5[,x0=...], multi:baselines=..|..[,weights=..;..],
// coord-eps:eps=0.001, coord-x, shapley, square:h=28,w=28,smin=1,smax=10.
// x0 accepts "zero" or an explicit ';'-separated vector.
PerturbationFamily make_family(const std::string& spec, int d);

// Kernel specs: gaussian:sigma=0.2 | box:radius=0.2
SmoothingKernel make_kernel(const std::string& spec);

struct MethodSpec {
  std::string base;    // grad | ig | occlusion | shapley | optimal | optimal-masked | constant
  bool smoothed = false;  // "-sg" suffix
};

std::vector<MethodSpec> parse_methods(const std::string& list);

struct ExplainerBuildOptions {
  std::string perturbation_spec = "noisy-baseline:sigma=0.5";
  std::string kernel_spec = "box:radius=0.2";
  int ig_steps = 128;
  int sg_samples = 200;
  int optimal_samples = 20000;
  double lambda = 0.0;
};

Explainer build_explainer(const MethodSpec& m, int d, const ExplainerBuildOptions& opts);

}  // namespace xinfid
