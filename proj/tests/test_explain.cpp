#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>

#include "xinfid/explain.hpp"
#include "xinfid/verify.hpp"

using namespace xinfid;

namespace {

BlackBoxModel linear_32() {  // f = 3 x1 + 2 x2
  QuadraticModel q;
  q.h = SquareMatrix(2);
  q.w = {3.0, 2.0};
  return make_model(q);
}

BlackBoxModel product_model() {  // f = x1 * x2
  QuadraticModel q;
  q.h = SquareMatrix(2);
  q.h.at(0, 1) = 1.0;
  q.h.at(1, 0) = 1.0;
  q.w = zeros(2);
  return make_model(q);
}

// Independent dense solve (Gaussian elimination with partial pivoting) for
// the normal-equations oracle.
Vector gauss_solve(SquareMatrix a, Vector b) {
  const int n = a.n;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::fabs(a.at(r, c)) > std::fabs(a.at(piv, c))) piv = r;
    for (int k = 0; k < n; ++k) std::swap(a.at(c, k), a.at(piv, k));
    std::swap(b[static_cast<std::size_t>(c)], b[static_cast<std::size_t>(piv)]);
    for (int r = c + 1; r < n; ++r) {
      const double f = a.at(r, c) / a.at(c, c);
      for (int k = c; k < n; ++k) a.at(r, k) -= f * a.at(c, k);
      b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(c)];
    }
  }
  Vector x(static_cast<std::size_t>(n));
  for (int r = n - 1; r >= 0; --r) {
    double s = b[static_cast<std::size_t>(r)];
    for (int k = r + 1; k < n; ++k) s -= a.at(r, k) * x[static_cast<std::size_t>(k)];
    x[static_cast<std::size_t>(r)] = s / a.at(r, r);
  }
  return x;
}

}  // namespace

TEST_CASE("gradient explainer: linear weights, toy point, fd oracle") {
  const Attribution lin = explain_gradient(linear_32(), {1.0, 1.0});
  CHECK(lin.values == Vector{3.0, 2.0});
  CHECK(lin.locality == Locality::local);

  const Attribution toy = explain_gradient(make_toy(), {20.0, 11.9});
  CHECK(toy.values == Vector{1.0, 0.0});

  RngStream rng = derive_stream(70, 0);
  const BlackBoxModel mlp = make_model(random_softplus_mlp(5, 2, 8, 1.2, true, rng));
  const Vector x = random_input(5, rng);
  const Attribution g = explain_gradient(mlp, x);
  CHECK(norm_inf(sub(g.values, fd_gradient(mlp, x))) / std::max(1e-9, norm_inf(g.values)) <= 1e-4);
}

TEST_CASE("integrated gradients: constant integrand, product midpoint, completeness") {
  {
    RngStream rng = derive_stream(71, 0);
    const Vector baseline = random_input(2, rng);
    const Attribution a = explain_integrated_gradients(linear_32(), {1.0, 2.0}, baseline, 16);
    CHECK(a.values[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(a.values[1] == doctest::Approx(2.0).epsilon(1e-12));
  }
  {
    const Attribution a = explain_integrated_gradients(product_model(), {1.0, 1.0}, zeros(2), 64);
    CHECK(a.values[0] == doctest::Approx(0.5).epsilon(1e-9));  // integral of t dt
    CHECK(a.values[1] == doctest::Approx(0.5).epsilon(1e-9));
  }
  {
    RngStream rng = derive_stream(71, 1);
    const BlackBoxModel mlp = make_model(random_softplus_mlp(6, 2, 10, 1.1, true, rng));
    const Vector x = random_input(6, rng);
    const Vector x0 = random_input(6, rng);
    const Attribution ig = explain_integrated_gradients(mlp, x, x0, 512);
    const Vector i_vec = sub(x, x0);
    const double lhs = dot(i_vec, ig.values);
    const double rhs = evaluate(mlp, x) - evaluate(mlp, x0);
    CHECK(std::fabs(lhs - rhs) <= 1e-4);
  }
  CHECK_THROWS_AS(explain_integrated_gradients(linear_32(), {1.0, 1.0}, zeros(2), 0),
                  std::invalid_argument);
}

TEST_CASE("occlusion-1: linear, additive, product") {
  const Attribution lin = explain_occlusion1(linear_32(), {1.0, 1.0}, {});
  CHECK(lin.values[0] == doctest::Approx(3.0));
  CHECK(lin.values[1] == doctest::Approx(2.0));
  CHECK(lin.locality == Locality::global);

  // additive: f = x1^2 + 3 x2 (diagonal quadratic)
  QuadraticModel q;
  q.h = SquareMatrix(2);
  q.h.at(0, 0) = 2.0;
  q.w = {0.0, 3.0};
  const Attribution add_attr = explain_occlusion1(make_model(q), {2.0, 5.0}, {});
  CHECK(add_attr.values[0] == doctest::Approx(4.0));   // g1(2) - g1(0) = 4
  CHECK(add_attr.values[1] == doctest::Approx(15.0));  // g2(5) - g2(0) = 15

  const Attribution prod = explain_occlusion1(product_model(), {1.0, 1.0}, {});
  CHECK(prod.values[0] == doctest::Approx(1.0));
  CHECK(prod.values[1] == doctest::Approx(1.0));
}

TEST_CASE("exact shapley: additivity, product symmetry, efficiency on a random mlp") {
  {
    QuadraticModel q;  // additive
    q.h = SquareMatrix(2);
    q.h.at(0, 0) = 2.0;
    q.w = {0.0, 3.0};
    const Attribution phi = explain_shapley_exact(make_model(q), {2.0, 5.0}, {});
    CHECK(phi.values[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(phi.values[1] == doctest::Approx(15.0).epsilon(1e-12));
  }
  {
    const Attribution phi = explain_shapley_exact(product_model(), {1.0, 1.0}, {});
    CHECK(phi.values[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(phi.values[1] == doctest::Approx(0.5).epsilon(1e-12));
  }
  {
    RngStream rng = derive_stream(72, 0);
    const BlackBoxModel mlp = make_model(random_softplus_mlp(8, 2, 8, 1.0, true, rng));
    const Vector x = random_input(8, rng);
    const Attribution phi = explain_shapley_exact(mlp, x, {});
    double total = 0.0;
    for (double v : phi.values) total += v;
    CHECK(std::fabs(total - (evaluate(mlp, x) - evaluate(mlp, zeros(8)))) <= 1e-10);
  }
  MlpModel big;
  big.input_dim = 21;
  MlpLayer ly;
  ly.in = 21;
  ly.out = 1;
  ly.w.assign(21, 1.0);
  ly.b = {0.0};
  big.layers.push_back(ly);
  CHECK_THROWS_AS(explain_shapley_exact(make_model(big), Vector(21, 1.0), {}),
                  std::invalid_argument);
}

TEST_CASE("smoothing: constants and linear gradients are fixed points") {
  RngStream rng = derive_stream(73, 0);
  const Vector cv{1.0, 2.0};
  const Explainer cexp{ConstantExplainer{cv, Locality::local}};
  const Explainer sm = smooth(cexp, GaussianKernel{0.5}, 64);
  CHECK(compute(sm, linear_32(), {0.0, 0.0}, rng).values == cv);

  const Explainer smg = smooth(Explainer{GradientExplainer{}}, GaussianKernel{0.5}, 64);
  const Attribution a = compute(smg, linear_32(), {0.3, -0.7}, rng);
  CHECK(a.values[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(a.values[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(a.locality == Locality::local);
  CHECK(a.method_tag == "grad-sg");
}

TEST_CASE("smoothed toy gradient approaches (0.5, 0.5) under a huge box kernel") {
  const Explainer sg = smooth(Explainer{GradientExplainer{}}, UniformBoxKernel{50.0}, 2000);
  const Attribution a = compute(sg, make_toy(), {20.0, 11.9}, derive_stream(7, 0));
  CHECK(std::fabs(a.values[0] - 0.5) < 0.05);
  CHECK(std::fabs(a.values[1] - 0.5) < 0.05);
}

TEST_CASE("optimal explanation recovers linear weights under a noisy baseline") {
  RngStream rng = derive_stream(74, 0);
  const PerturbationFamily fam = NoisyBaseline{zeros(2), 1.0};
  const Attribution a = explain_optimal(linear_32(), {0.4, 1.3}, fam, 10000, 0.0, rng);
  CHECK(a.values[0] == doctest::Approx(3.0).epsilon(0.01));
  CHECK(a.values[1] == doctest::Approx(2.0).epsilon(0.01));
  CHECK(a.locality == Locality::local);
}

TEST_CASE("optimal under coord-eps converges to the gradient, monotonically in eps") {
  RngStream rng = derive_stream(74, 1);
  const BlackBoxModel mlp = make_model(random_softplus_mlp(5, 2, 8, 1.0, true, rng));
  const Vector x = random_input(5, rng);
  const Vector g = gradient(mlp, x);
  double prev = 1e9;
  int step = 0;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const Attribution a =
        explain_optimal(mlp, x, CoordinateEps{eps}, 20000, 0.0, derive_stream(74, 2));
    const double err = norm_inf(sub(a.values, g));
    CHECK(err < prev);
    prev = err;
    ++step;
  }
  CHECK(step == 3);
  CHECK(prev < 1e-3);  // at eps = 1e-3
}

TEST_CASE("optimal equals the direct normal-equations solution on recorded samples") {
  RngStream rng = derive_stream(74, 2);
  const BlackBoxModel mlp = make_model(random_softplus_mlp(4, 2, 8, 1.2, true, rng));
  const Vector x = random_input(4, rng);
  const PerturbationFamily fam = NoisyBaseline{zeros(4), 0.8};
  RngStream draw_rng = derive_stream(74, 3);
  const Attribution a = explain_optimal(mlp, x, fam, 4000, 0.0, draw_rng);

  // Oracle: same recorded samples, plain accumulation, independent solver.
  const DrawnSamples s = record_draws(mlp, x, fam, 4000, draw_rng);
  SquareMatrix am(4);
  Vector bv = zeros(4);
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    const Vector& iv = s.samples[i].i_vec;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        am.at(r, c) += iv[static_cast<std::size_t>(r)] * iv[static_cast<std::size_t>(c)];
    for (int r = 0; r < 4; ++r) bv[static_cast<std::size_t>(r)] += s.delta_f[i] * iv[static_cast<std::size_t>(r)];
  }
  for (double& v : am.a) v /= 4000.0;
  for (double& v : bv) v /= 4000.0;
  const Vector oracle = gauss_solve(am, bv);
  CHECK(norm_inf(sub(a.values, oracle)) <= 1e-10);
}

TEST_CASE("masked optimal: shapley kernel matches the exact shapley oracle") {
  RngStream rng = derive_stream(75, 0);
  const BlackBoxModel mlp = make_model(random_softplus_mlp(6, 2, 8, 1.0, true, rng));
  const Vector x = random_input(6, rng);
  const Attribution exact = explain_shapley_exact(mlp, x, {});
  const Attribution approx =
      explain_optimal_masked(mlp, x, ShapleyKernel{}, 20000, 0.0, derive_stream(75, 1));
  CHECK(norm_inf(sub(exact.values, approx.values)) <= 0.02 * norm_inf(exact.values));
  CHECK(approx.locality == Locality::global);
}

TEST_CASE("masked optimal with singleton masks recovers occlusion-1 exactly") {
  RngStream rng = derive_stream(75, 2);
  const BlackBoxModel mlp = make_model(random_softplus_mlp(6, 2, 8, 1.1, true, rng));
  const Vector x = random_input(6, rng);
  const Attribution occ = explain_occlusion1(mlp, x, {});
  const Attribution om = explain_optimal_masked(mlp, x, SquareRemoval{2, 3, 1, 1}, 20000, 0.0,
                                                derive_stream(75, 3));
  CHECK(norm_inf(sub(occ.values, om.values)) <= 1e-6);
}

TEST_CASE("masked optimal on a linear model recovers w (.) x under square removal") {
  RngStream rng = derive_stream(75, 4);
  QuadraticModel lin = random_linear(6, rng);
  const BlackBoxModel bb = make_model(lin);
  const Vector x = random_input(6, rng);
  const Attribution om =
      explain_optimal_masked(bb, x, SquareRemoval{2, 3, 1, 2}, 20000, 0.0, derive_stream(75, 5));
  const Vector target = hadamard(lin.w, x);
  CHECK(norm_inf(sub(om.values, target)) <= 0.02 * std::max(1e-12, norm_inf(target)));
}

TEST_CASE("masked optimal requires a mask-structured family") {
  CHECK_THROWS_AS(explain_optimal_masked(linear_32(), {1.0, 1.0}, NoisyBaseline{zeros(2), 0.5},
                                         100, 0.0, derive_stream(0, 0)),
                  std::invalid_argument);
}

TEST_CASE("occlusion equivalence: optimal under coord-times-x, multiplied by x") {
  RngStream rng = derive_stream(76, 0);
  const BlackBoxModel mlp = make_model(random_softplus_mlp(5, 2, 8, 1.0, true, rng));
  Vector x = random_input(5, rng);
  for (double& v : x)
    if (std::fabs(v) < 0.05) v = 0.3;  // keep coordinates away from zero
  const Attribution local = explain_optimal(mlp, x, CoordinateTimesX{}, 20000, 0.0, rng.fork(1));
  const Attribution global = to_global(local, x, zeros(5));
  const Attribution occ = explain_occlusion1(mlp, x, {});
  CHECK(norm_inf(sub(global.values, occ.values)) <= 1e-6);
}

TEST_CASE("to_global: hadamard with x - x0, locality flip, double-global error") {
  const Attribution g = explain_gradient(linear_32(), {2.0, 5.0});
  const Attribution gg = to_global(g, {2.0, 5.0}, zeros(2));
  CHECK(gg.values[0] == doctest::Approx(6.0));
  CHECK(gg.values[1] == doctest::Approx(10.0));
  CHECK(gg.locality == Locality::global);
  CHECK_THROWS_AS(to_global(gg, {2.0, 5.0}, zeros(2)), std::invalid_argument);

  const Attribution z = to_global(g, {2.0, 5.0}, {2.0, 5.0});
  CHECK(z.values == zeros(2));
}

TEST_CASE("to_global on IG satisfies completeness against the function difference") {
  RngStream rng = derive_stream(76, 1);
  const BlackBoxModel mlp = make_model(random_softplus_mlp(5, 2, 8, 1.0, true, rng));
  const Vector x = random_input(5, rng);
  const Vector x0 = random_input(5, rng);
  const Attribution ig = explain_integrated_gradients(mlp, x, x0, 512);
  const Attribution gg = to_global(ig, x, x0);
  double total = 0.0;
  for (double v : gg.values) total += v;
  CHECK(std::fabs(total - (evaluate(mlp, x) - evaluate(mlp, x0))) <= 1e-4);
}

TEST_CASE("explainers are bitwise deterministic across seeds and worker counts") {
  RngStream rng = derive_stream(77, 0);
  const BlackBoxModel mlp = make_model(random_softplus_mlp(6, 2, 8, 1.0, true, rng));
  const Vector x = random_input(6, rng);
  const Explainer opt{OptimalExplainer{NoisyBaseline{zeros(6), 0.7}, 5000, 0.0}};
  const Explainer sg = smooth(Explainer{GradientExplainer{}}, UniformBoxKernel{0.2}, 200);

  Vector opt1, opt8, sg1, sg8;
  setenv("XINFID_THREADS", "1", 1);
  opt1 = compute(opt, mlp, x, derive_stream(5, 5)).values;
  sg1 = compute(sg, mlp, x, derive_stream(5, 6)).values;
  setenv("XINFID_THREADS", "8", 1);
  opt8 = compute(opt, mlp, x, derive_stream(5, 5)).values;
  sg8 = compute(sg, mlp, x, derive_stream(5, 6)).values;
  unsetenv("XINFID_THREADS");
  CHECK(opt1 == opt8);
  CHECK(sg1 == sg8);

  // Same (model, x, seed) -> identical attribution.
  CHECK(compute(opt, mlp, x, derive_stream(5, 5)).values == opt1);
  // Different seed -> different Monte Carlo result.
  CHECK(compute(opt, mlp, x, derive_stream(6, 5)).values != opt1);
}
