#include "xinfid/models.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace xinfid {

double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v))); }

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

namespace {

double apply_act(Activation a, double v) {
  switch (a) {
    case Activation::softplus: return softplus(v);
    case Activation::relu: return v > 0.0 ? v : 0.0;
    case Activation::identity: return v;
  }
  return v;
}

double act_deriv(Activation a, double pre) {
  switch (a) {
    case Activation::softplus: return sigmoid(pre);
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

void check_mlp(const MlpModel& m) {
  if (m.layers.empty()) throw std::invalid_argument("mlp: needs at least one layer");
  int d = m.input_dim;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const MlpLayer& ly = m.layers[l];
    if (ly.in != d)
      throw std::invalid_argument("mlp: layer " + std::to_string(l) + " expects input " +
                                  std::to_string(ly.in) + " but previous width is " +
                                  std::to_string(d));
    if (static_cast<int>(ly.w.size()) != ly.in * ly.out || static_cast<int>(ly.b.size()) != ly.out)
      throw std::invalid_argument("mlp: layer " + std::to_string(l) + " has inconsistent shapes");
    d = ly.out;
  }
}

struct ForwardState {
  std::vector<Vector> pre;   // per layer
  std::vector<Vector> post;  // per layer; post.back() is the output vector
};

ForwardState mlp_forward(const MlpModel& m, const Vector& x) {
  ForwardState st;
  Vector cur = x;
  for (const MlpLayer& ly : m.layers) {
    Vector pre(static_cast<std::size_t>(ly.out));
    for (int i = 0; i < ly.out; ++i)
      pre[static_cast<std::size_t>(i)] =
          kern::dot(ly.w.data() + static_cast<std::size_t>(i) * ly.in, cur.data(),
                    static_cast<std::size_t>(ly.in)) +
          ly.b[static_cast<std::size_t>(i)];
    Vector post(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) post[i] = apply_act(ly.act, pre[i]);
    st.pre.push_back(std::move(pre));
    cur = post;
    st.post.push_back(std::move(post));
  }
  return st;
}

Vector mlp_gradient(const MlpModel& m, int output_index, const Vector& x) {
  const ForwardState st = mlp_forward(m, x);
  const int n_layers = static_cast<int>(m.layers.size());
  const MlpLayer& last = m.layers.back();
  if (output_index < 0 || output_index >= last.out)
    throw std::invalid_argument("mlp: output_index out of range");

  // delta over layer outputs, seeded at the selected output.
  Vector delta(static_cast<std::size_t>(last.out), 0.0);
  delta[static_cast<std::size_t>(output_index)] =
      act_deriv(last.act, st.pre.back()[static_cast<std::size_t>(output_index)]);
  for (int l = n_layers - 1; l >= 0; --l) {
    const MlpLayer& ly = m.layers[static_cast<std::size_t>(l)];
    Vector grad_in(static_cast<std::size_t>(ly.in), 0.0);
    for (int i = 0; i < ly.out; ++i)
      kern::axpy(delta[static_cast<std::size_t>(i)],
                 ly.w.data() + static_cast<std::size_t>(i) * ly.in, grad_in.data(),
                 static_cast<std::size_t>(ly.in));
    if (l == 0) return grad_in;
    const Vector& pre_prev = st.pre[static_cast<std::size_t>(l - 1)];
    const Activation act_prev = m.layers[static_cast<std::size_t>(l - 1)].act;
    delta.assign(grad_in.size(), 0.0);
    for (std::size_t i = 0; i < grad_in.size(); ++i)
      delta[i] = grad_in[i] * act_deriv(act_prev, pre_prev[i]);
  }
  return {};
}

double toy_eval(double a, double b) {
  const double k = std::floor(std::fabs(a - b));
  const bool even = std::fmod(k, 2.0) == 0.0;
  return even ? std::max(a, b) - k / 2.0 : std::min(a, b) + (k + 1.0) / 2.0;
}

GradientInfo toy_gradient(double a, double b) {
  const double diff = std::fabs(a - b);
  const double k = std::floor(diff);
  const double frac = diff - k;
  const bool even = std::fmod(k, 2.0) == 0.0;
  GradientInfo gi;
  gi.at_boundary = frac <= 1e-9 || 1.0 - frac <= 1e-9;
  // Even region: gradient follows the argmax coordinate; odd: the argmin.
  const bool a_active = even ? (a >= b) : (a < b);
  gi.g = a_active ? Vector{1.0, 0.0} : Vector{0.0, 1.0};
  return gi;
}

}  // namespace

int BlackBoxModel::input_dim() const {
  if (const auto* m = std::get_if<MlpModel>(&impl)) return m->input_dim;
  if (const auto* q = std::get_if<QuadraticModel>(&impl)) return q->h.n;
  return 2;  // toy
}

BlackBoxModel make_model(MlpModel m, int output_index) {
  check_mlp(m);
  BlackBoxModel bb;
  bb.impl = std::move(m);
  bb.output_index = output_index;
  return bb;
}

BlackBoxModel make_model(QuadraticModel m) {
  if (static_cast<int>(m.w.size()) != m.h.n)
    throw std::invalid_argument("quadratic: H and w dimensions differ");
  BlackBoxModel bb;
  bb.impl = std::move(m);
  return bb;
}

BlackBoxModel make_toy() {
  BlackBoxModel bb;
  bb.impl = ToyFunction{};
  return bb;
}

double evaluate(const BlackBoxModel& model, const Vector& x) {
  require_dim(x, model.input_dim(), "evaluate");
  if (const auto* m = std::get_if<MlpModel>(&model.impl)) {
    const ForwardState st = mlp_forward(*m, x);
    const Vector& out = st.post.back();
    if (model.output_index < 0 || model.output_index >= static_cast<int>(out.size()))
      throw std::invalid_argument("mlp: output_index out of range");
    return out[static_cast<std::size_t>(model.output_index)];
  }
  if (const auto* q = std::get_if<QuadraticModel>(&model.impl)) {
    double s = q->c + kern::dot(q->w.data(), x.data(), x.size());
    for (int i = 0; i < q->h.n; ++i)
      s += 0.5 * x[static_cast<std::size_t>(i)] *
           kern::dot(q->h.row(i), x.data(), static_cast<std::size_t>(q->h.n));
    return s;
  }
  return toy_eval(x[0], x[1]);
}

GradientInfo gradient_info(const BlackBoxModel& model, const Vector& x) {
  require_dim(x, model.input_dim(), "gradient");
  if (const auto* m = std::get_if<MlpModel>(&model.impl))
    return {mlp_gradient(*m, model.output_index, x), false};
  if (const auto* q = std::get_if<QuadraticModel>(&model.impl)) {
    Vector g = q->w;
    for (int i = 0; i < q->h.n; ++i)
      g[static_cast<std::size_t>(i)] +=
          kern::dot(q->h.row(i), x.data(), static_cast<std::size_t>(q->h.n));
    return {std::move(g), false};
  }
  return toy_gradient(x[0], x[1]);
}

Vector gradient(const BlackBoxModel& model, const Vector& x) { return gradient_info(model, x).g; }

Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x) {
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::fabs(x[i]));
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

Vector fd_gradient(const BlackBoxModel& model, const Vector& x) {
  return fd_gradient([&](const Vector& y) { return evaluate(model, y); }, x);
}

SquareMatrix fd_hessian(const BlackBoxModel& model, const Vector& x, double h) {
  const int d = static_cast<int>(x.size());
  SquareMatrix hm(d);
  const double f0 = evaluate(model, x);
  auto at = [&](int i, double hi, int j, double hj) {
    Vector y = x;
    y[static_cast<std::size_t>(i)] += hi;
    y[static_cast<std::size_t>(j)] += hj;
    return evaluate(model, y);
  };
  for (int i = 0; i < d; ++i) {
    hm.at(i, i) = (at(i, h, i, 0) - 2.0 * f0 + at(i, -h, i, 0)) / (h * h);
    for (int j = i + 1; j < d; ++j) {
      const double v =
          (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) + at(i, -h, j, -h)) / (4.0 * h * h);
      hm.at(i, j) = v;
      hm.at(j, i) = v;
    }
  }
  return hm;
}

double spectral_norm_sym(const SquareMatrix& m, int iters) {
  const int n = m.n;
  Vector v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = 1.0 / (i + 1.0) + 0.3 * (i % 2);
  double nv = norm2(v);
  if (nv == 0.0) return 0.0;
  for (double& e : v) e /= nv;
  Vector mv(static_cast<std::size_t>(n));
  for (int it = 0; it < iters; ++it) {
    for (int i = 0; i < n; ++i)
      mv[static_cast<std::size_t>(i)] = kern::dot(m.row(i), v.data(), static_cast<std::size_t>(n));
    nv = norm2(mv);
    if (nv == 0.0) return 0.0;
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = mv[static_cast<std::size_t>(i)] / nv;
  }
  return nv;
}

double spectral_norm_rect(const std::vector<double>& w, int rows, int cols, int iters) {
  if (rows <= 0 || cols <= 0) return 0.0;
  Vector v(static_cast<std::size_t>(cols));
  for (int i = 0; i < cols; ++i) v[static_cast<std::size_t>(i)] = 1.0 / (i + 1.0) + 0.3 * (i % 2);
  double nv = norm2(v);
  for (double& e : v) e /= nv;
  Vector u(static_cast<std::size_t>(rows));
  for (int it = 0; it < iters; ++it) {
    for (int i = 0; i < rows; ++i)
      u[static_cast<std::size_t>(i)] = kern::dot(w.data() + static_cast<std::size_t>(i) * cols,
                                                 v.data(), static_cast<std::size_t>(cols));
    Vector vt(static_cast<std::size_t>(cols), 0.0);
    for (int i = 0; i < rows; ++i)
      kern::axpy(u[static_cast<std::size_t>(i)], w.data() + static_cast<std::size_t>(i) * cols,
                 vt.data(), static_cast<std::size_t>(cols));
    nv = norm2(vt);
    if (nv == 0.0) return 0.0;
    for (int i = 0; i < cols; ++i) v[static_cast<std::size_t>(i)] = vt[static_cast<std::size_t>(i)] / nv;
  }
  return norm2(u);
}

double hessian_norm_bound(const BlackBoxModel& model, const Vector& x, double radius, int n_probe,
                          RngStream rng) {
  if (radius < 0.0) throw std::invalid_argument("hessian_norm_bound: negative radius");
  if (const auto* q = std::get_if<QuadraticModel>(&model.impl))
    return spectral_norm_sym(q->h, 50);
  double best = spectral_norm_sym(fd_hessian(model, x), 50);
  for (int p = 0; p < n_probe; ++p) {
    RngStream s = rng.fork(static_cast<std::uint64_t>(p));
    const Vector y = sample_uniform_box(s, x, radius);
    best = std::max(best, spectral_norm_sym(fd_hessian(model, y), 50));
  }
  return best;
}

double softplus_sensitivity_bound(const MlpModel& model, double radius) {
  if (radius < 0.0) throw std::invalid_argument("softplus_sensitivity_bound: negative radius");
  double prod = 1.0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const MlpLayer& ly = model.layers[l];
    if (ly.act != Activation::softplus)
      throw std::invalid_argument("softplus_sensitivity_bound: layer " + std::to_string(l) +
                                  " is not softplus");
    for (double bv : ly.b)
      if (bv != 0.0)
        throw std::invalid_argument("softplus_sensitivity_bound: layer " + std::to_string(l) +
                                    " has nonzero bias");
    const double sn = spectral_norm_rect(ly.w, ly.out, ly.in);
    prod *= sn * sn / 4.0;
  }
  return prod * radius;
}

MlpModel randomize_layer(const MlpModel& model, int layer_index, RngStream rng) {
  if (layer_index < 0 || layer_index >= static_cast<int>(model.layers.size()))
    throw std::invalid_argument("randomize_layer: layer index out of range");
  MlpModel out = model;
  MlpLayer& ly = out.layers[static_cast<std::size_t>(layer_index)];
  double mean = 0.0;
  for (double v : ly.w) mean += v;
  mean /= static_cast<double>(ly.w.size());
  double var = 0.0;
  for (double v : ly.w) var += (v - mean) * (v - mean);
  var /= static_cast<double>(ly.w.size());
  const double sd = std::sqrt(var);
  for (double& v : ly.w) v = sd * rng.normal();
  return out;
}

// ---------------------------------------------------------------------------
// JSON I/O

namespace {

using nlohmann::json;

Activation parse_activation(const std::string& s, std::size_t layer) {
  if (s == "softplus") return Activation::softplus;
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw std::runtime_error("model parse: layer " + std::to_string(layer) +
                           ": unknown activation '" + s + "'");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::softplus: return "softplus";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
  }
  return "?";
}

Vector parse_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::runtime_error("model parse: " + what + " must be an array");
  Vector v;
  v.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) throw std::runtime_error("model parse: " + what + " has a non-number");
    v.push_back(e.get<double>());
  }
  return v;
}

}  // namespace

BlackBoxModel parse_model_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("model parse: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type"))
    throw std::runtime_error("model parse: missing \"type\"");
  const std::string type = j["type"].get<std::string>();

  if (type == "toy") return make_toy();

  if (type == "quadratic") {
    if (!j.contains("H") || !j.contains("w"))
      throw std::runtime_error("model parse: quadratic needs \"H\" and \"w\"");
    const json& jh = j["H"];
    const int d = static_cast<int>(jh.size());
    SquareMatrix h(d);
    for (int i = 0; i < d; ++i) {
      Vector row = parse_vector(jh[static_cast<std::size_t>(i)], "H row " + std::to_string(i));
      if (static_cast<int>(row.size()) != d)
        throw std::runtime_error("model parse: H row " + std::to_string(i) + " has wrong length");
      for (int c = 0; c < d; ++c) h.at(i, c) = row[static_cast<std::size_t>(c)];
    }
    QuadraticModel q;
    q.h = std::move(h);
    q.w = parse_vector(j["w"], "w");
    if (static_cast<int>(q.w.size()) != d)
      throw std::runtime_error("model parse: w length does not match H");
    q.c = j.value("c", 0.0);
    return make_model(std::move(q));
  }

  if (type == "mlp") {
    if (!j.contains("input_dim") || !j.contains("layers"))
      throw std::runtime_error("model parse: mlp needs \"input_dim\" and \"layers\"");
    MlpModel m;
    m.input_dim = j["input_dim"].get<int>();
    const json& jl = j["layers"];
    for (std::size_t l = 0; l < jl.size(); ++l) {
      const json& layer = jl[l];
      if (!layer.contains("weights"))
        throw std::runtime_error("model parse: layer " + std::to_string(l) +
                                 ": missing weights array");
      if (!layer.contains("bias"))
        throw std::runtime_error("model parse: layer " + std::to_string(l) +
                                 ": missing bias array");
      MlpLayer ly;
      const json& jw = layer["weights"];
      ly.out = static_cast<int>(jw.size());
      if (ly.out == 0)
        throw std::runtime_error("model parse: layer " + std::to_string(l) + ": empty weights");
      for (std::size_t r = 0; r < jw.size(); ++r) {
        Vector row = parse_vector(jw[r], "layer " + std::to_string(l) + " weights row");
        if (r == 0) ly.in = static_cast<int>(row.size());
        if (static_cast<int>(row.size()) != ly.in)
          throw std::runtime_error("model parse: layer " + std::to_string(l) +
                                   ": ragged weight rows");
        ly.w.insert(ly.w.end(), row.begin(), row.end());
      }
      ly.b = parse_vector(layer["bias"], "layer " + std::to_string(l) + " bias");
      if (static_cast<int>(ly.b.size()) != ly.out)
        throw std::runtime_error("model parse: layer " + std::to_string(l) +
                                 ": bias length does not match weight rows");
      ly.act = parse_activation(layer.value("activation", "softplus"), l);
      m.layers.push_back(std::move(ly));
    }
    const int out_index = j.value("output_index", 0);
    try {
      return make_model(std::move(m), out_index);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(std::string("model parse: ") + e.what());
    }
  }
  throw std::runtime_error("model parse: unknown type '" + type + "'");
}

std::string model_to_json(const BlackBoxModel& model) {
  json j;
  if (const auto* m = std::get_if<MlpModel>(&model.impl)) {
    j["type"] = "mlp";
    j["input_dim"] = m->input_dim;
    j["output_index"] = model.output_index;
    json layers = json::array();
    for (const MlpLayer& ly : m->layers) {
      json rows = json::array();
      for (int i = 0; i < ly.out; ++i) {
        json row = json::array();
        for (int c = 0; c < ly.in; ++c) row.push_back(ly.w[static_cast<std::size_t>(i) * ly.in + c]);
        rows.push_back(std::move(row));
      }
      layers.push_back({{"weights", std::move(rows)},
                        {"bias", ly.b},
                        {"activation", activation_name(ly.act)}});
    }
    j["layers"] = std::move(layers);
  } else if (const auto* q = std::get_if<QuadraticModel>(&model.impl)) {
    j["type"] = "quadratic";
    json rows = json::array();
    for (int i = 0; i < q->h.n; ++i) {
      json row = json::array();
      for (int c = 0; c < q->h.n; ++c) row.push_back(q->h.at(i, c));
      rows.push_back(std::move(row));
    }
    j["H"] = std::move(rows);
    j["w"] = q->w;
    j["c"] = q->c;
  } else {
    j["type"] = "toy";
  }
  return j.dump(2);
}

BlackBoxModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("model parse: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model_json(ss.str());
}

void save_model(const BlackBoxModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
  out << model_to_json(model) << "\n";
}

}  // namespace xinfid
