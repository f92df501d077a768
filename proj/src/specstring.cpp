#include "xinfid/specstring.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace xinfid {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

struct KvSpec {
  std::string name;
  std::vector<std::pair<std::string, std::string>> kv;

  const std::string* find(const std::string& key) const {
    for (const auto& [k, v] : kv)
      if (k == key) return &v;
    return nullptr;
  }
  double num(const std::string& key, double fallback) const {
    const std::string* v = find(key);
    return v ? std::stod(*v) : fallback;
  }
  double require_num(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) throw std::invalid_argument("spec '" + name + "': missing " + key + "=...");
    return std::stod(*v);
  }
};

KvSpec parse_kv(const std::string& spec) {
  KvSpec out;
  const auto colon = spec.find(':');
  out.name = spec.substr(0, colon);
  if (colon == std::string::npos) return out;
  for (const std::string& part : split(spec.substr(colon + 1), ',')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("spec '" + spec + "': expected key=value, got '" + part + "'");
    out.kv.emplace_back(part.substr(0, eq), part.substr(eq + 1));
  }
  return out;
}

Vector parse_point(const std::string& text, int d, const std::string& what) {
  if (text == "zero") return zeros(d);
  Vector v;
  for (const std::string& cell : split(text, ';')) v.push_back(std::stod(cell));
  if (static_cast<int>(v.size()) != d)
    throw std::invalid_argument(what + ": expected " + std::to_string(d) + " entries, got " +
                                std::to_string(v.size()));
  return v;
}

}  // namespace

PerturbationFamily make_family(const std::string& spec, int d) {
  const KvSpec kv = parse_kv(spec);
  const std::string& n = kv.name;
  if (n == "baseline") {
    return BaselineDiff{parse_point(kv.find("x0") ? *kv.find("x0") : "zero", d, "baseline x0")};
  }
  if (n == "subset") {
    const std::string* idx = kv.find("indices");
    if (!idx) throw std::invalid_argument("subset: missing indices=i;j;...");
    SubsetBaseline f;
    for (const std::string& cell : split(*idx, ';')) f.subset.push_back(std::stoi(cell));
    f.x0 = parse_point(kv.find("x0") ? *kv.find("x0") : "zero", d, "subset x0");
    return f;
  }
  if (n == "noisy-baseline") {
    NoisyBaseline f;
    f.sigma = kv.num("sigma", 0.5);
    f.x0 = parse_point(kv.find("x0") ? *kv.find("x0") : "zero", d, "noisy-baseline x0");
    return f;
  }
  if (n == "multi") {
    const std::string* bl = kv.find("baselines");
    if (!bl) throw std::invalid_argument("multi: missing baselines=v;v|v;v");
    MultiBaseline f;
    for (const std::string& one : split(*bl, '|'))
      f.baselines.push_back(parse_point(one, d, "multi baseline"));
    if (const std::string* w = kv.find("weights")) {
      for (const std::string& cell : split(*w, ';')) f.weights.push_back(std::stod(cell));
    } else {
      f.weights.assign(f.baselines.size(), 1.0 / static_cast<double>(f.baselines.size()));
    }
    return f;
  }
  if (n == "coord-eps") return CoordinateEps{kv.num("eps", 1e-3)};
  if (n == "coord-x") return CoordinateTimesX{};
  if (n == "shapley") return ShapleyKernel{};
  if (n == "square") {
    SquareRemoval f;
    f.height = static_cast<int>(kv.require_num("h"));
    f.width = static_cast<int>(kv.require_num("w"));
    f.smin = static_cast<int>(kv.num("smin", 1));
    f.smax = static_cast<int>(kv.num("smax", std::min(10.0, static_cast<double>(std::min(f.height, f.width)))));
    return f;
  }
  throw std::invalid_argument("unknown perturbation family '" + n + "'");
}

SmoothingKernel make_kernel(const std::string& spec) {
  const KvSpec kv = parse_kv(spec);
  if (kv.name == "gaussian") return GaussianKernel{kv.num("sigma", 0.2)};
  if (kv.name == "box") return UniformBoxKernel{kv.num("radius", 0.2)};
  throw std::invalid_argument("unknown kernel '" + kv.name + "' (expected gaussian|box)");
}

std::vector<MethodSpec> parse_methods(const std::string& list) {
  std::vector<MethodSpec> out;
  for (std::string name : split(list, ',')) {
    if (name.empty()) continue;
    MethodSpec m;
    if (name.size() > 3 && name.substr(name.size() - 3) == "-sg") {
      m.smoothed = true;
      name = name.substr(0, name.size() - 3);
    }
    if (name == "occ") name = "occlusion";
    if (name != "grad" && name != "ig" && name != "occlusion" && name != "shapley" &&
        name != "optimal" && name != "optimal-masked" && name != "constant")
      throw std::invalid_argument("unknown method '" + name + "'");
    m.base = name;
    out.push_back(std::move(m));
  }
  if (out.empty()) throw std::invalid_argument("no methods given");
  return out;
}

Explainer build_explainer(const MethodSpec& m, int d, const ExplainerBuildOptions& opts) {
  Explainer e;
  if (m.base == "grad") {
    e.cfg = GradientExplainer{};
  } else if (m.base == "ig") {
    e.cfg = IntGradExplainer{{}, opts.ig_steps};
  } else if (m.base == "occlusion") {
    e.cfg = OcclusionExplainer{};
  } else if (m.base == "shapley") {
    e.cfg = ShapleyExactExplainer{};
  } else if (m.base == "optimal") {
    e.cfg = OptimalExplainer{make_family(opts.perturbation_spec, d), opts.optimal_samples,
                             opts.lambda};
  } else if (m.base == "optimal-masked") {
    e.cfg = OptimalMaskedExplainer{make_family(opts.perturbation_spec, d), opts.optimal_samples,
                                   opts.lambda};
  } else if (m.base == "constant") {
    Vector v(static_cast<std::size_t>(d));
    std::iota(v.begin(), v.end(), 1.0);
    e.cfg = ConstantExplainer{std::move(v), Locality::local};
  } else {
    throw std::invalid_argument("unknown method '" + m.base + "'");
  }
  if (m.smoothed) return smooth(std::move(e), make_kernel(opts.kernel_spec), opts.sg_samples);
  return e;
}

}  // namespace xinfid
