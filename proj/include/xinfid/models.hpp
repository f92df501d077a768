#pragma once

// Built-in black-box predictors: softplus/ReLU MLPs, quadratic forms, and the
// piecewise 2-D toy function, with analytic gradients, finite-difference
// oracles, Hessian norm probing, layer randomization, and JSON file I/O.

#include <functional>
#include <string>
#include <variant>

#include "xinfid/numerics.hpp"

namespace xinfid {

enum class Activation { softplus, relu, identity };

struct MlpLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // row-major, w[i*in + j] multiplies input j into output i
  Vector b;
  Activation act = Activation::softplus;
};

struct MlpModel {
  int input_dim = 0;
  std::vector<MlpLayer> layers;
};

// f(x) = 0.5 x^T H x + w^T x + c
struct QuadraticModel {
  SquareMatrix h;
  Vector w;
  double c = 0.0;
};

// f(a,b) = max(a,b) - floor(|a-b|)/2        when floor(|a-b|) is even
//        = min(a,b) + (floor(|a-b|)+1)/2    when floor(|a-b|) is odd
struct ToyFunction {};

struct BlackBoxModel {
  std::variant<MlpModel, QuadraticModel, ToyFunction> impl;
  int output_index = 0;  // scalar selector for multi-output MLPs

  int input_dim() const;
  bool has_analytic_gradient() const { return true; }
};

BlackBoxModel make_model(MlpModel m, int output_index = 0);
BlackBoxModel make_model(QuadraticModel m);
BlackBoxModel make_toy();

double evaluate(const BlackBoxModel& model, const Vector& x);
Vector gradient(const BlackBoxModel& model, const Vector& x);

struct GradientInfo {
  Vector g;
  bool at_boundary = false;  // toy function within 1e-9 of a gradient discontinuity
};
GradientInfo gradient_info(const BlackBoxModel& model, const Vector& x);

// Central differences with h_i = 1e-5 * max(1, |x_i|).
Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x);
Vector fd_gradient(const BlackBoxModel& model, const Vector& x);

// Dense central-difference Hessian (oracle; small d only).
SquareMatrix fd_hessian(const BlackBoxModel& model, const Vector& x, double h = 1e-4);

// Spectral norm of a symmetric matrix (power iteration).
double spectral_norm_sym(const SquareMatrix& m, int iters = 50);
// Spectral norm of a rows x cols matrix (power iteration on W^T W).
double spectral_norm_rect(const std::vector<double>& w, int rows, int cols, int iters = 100);

// Exact ||H|| for quadratics; otherwise max spectral norm of the
// finite-difference Hessian over n_probe points in the L-inf ball.
double hessian_norm_bound(const BlackBoxModel& model, const Vector& x, double radius, int n_probe,
                          RngStream rng);

// prod_i ||W_i||^2 / 4 * radius, for zero-bias all-softplus MLPs.
double softplus_sensitivity_bound(const MlpModel& model, double radius);

// Copy with layer layer_index's weights resampled N(0, sd) at the layer's
// empirical weight standard deviation; everything else bit-identical.
MlpModel randomize_layer(const MlpModel& model, int layer_index, RngStream rng);

// JSON model files (see README for the schema).
BlackBoxModel parse_model_json(const std::string& text);
std::string model_to_json(const BlackBoxModel& model);
BlackBoxModel load_model(const std::string& path);
void save_model(const BlackBoxModel& model, const std::string& path);

double softplus(double v);
double sigmoid(double v);

}  // namespace xinfid
