#include "xinfid/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace xinfid {

using nlohmann::json;

void atomic_write(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename '" + tmp + "' to '" + path + "'");
}

std::vector<Vector> read_inputs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open inputs file '" + path + "'");
  std::vector<Vector> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    Vector row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (row.empty()) continue;
    if (!rows.empty() && rows.front().size() != row.size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": inconsistent row length");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no input rows");
  return rows;
}

namespace {

std::string format_double(double v) {
  // Shortest round-trip representation, same policy as the JSON writer.
  return json(v).dump();
}

}  // namespace

void write_attribution_csv(const std::string& path, const Attribution& attr, std::uint64_t seed) {
  std::ostringstream os;
  os << "# method=" << attr.method_tag
     << " locality=" << (attr.locality == Locality::local ? "local" : "global")
     << " seed=" << seed << "\n";
  os << "index,value\n";
  for (std::size_t i = 0; i < attr.values.size(); ++i)
    os << i << "," << format_double(attr.values[i]) << "\n";
  atomic_write(path, os.str());
}

Vector read_attribution_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open attribution file '" + path + "'");
  Vector values;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // index,value header
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(path + ": malformed row '" + line + "'");
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  if (values.empty()) throw std::runtime_error(path + ": no attribution rows");
  return values;
}

std::string render_pgm(const Vector& values, int height, int width) {
  if (static_cast<std::size_t>(height) * width != values.size())
    throw std::invalid_argument("render: height*width does not match attribution length");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  const double sd = std::sqrt(var);

  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.reserve(out.size() + values.size());
  for (double v : values) {
    int g = 128;
    if (sd > 0.0) {
      const double z = (v - mean) / sd;
      g = static_cast<int>(std::lround((z + 3.0) / 6.0 * 255.0));
      g = std::min(255, std::max(0, g));
    }
    out.push_back(static_cast<char>(static_cast<unsigned char>(g)));
  }
  return out;
}

void write_pgm(const std::string& path, const Vector& values, int height, int width) {
  atomic_write(path, render_pgm(values, height, width));
}

namespace {

json report_record_json(const ReportRecord& r) {
  json j;
  j["input_index"] = r.input_index;
  j["method"] = r.report.method_tag;
  j["infidelity"] = r.report.infidelity;
  j["infidelity_se"] = r.report.infidelity_se;
  j["sens_max"] = r.report.sens_max;
  if (r.report.sens_grad) j["sens_grad"] = *r.report.sens_grad;
  if (r.report.sens_lips) j["sens_lips"] = *r.report.sens_lips;
  if (r.report.rinfd) j["rinfd"] = *r.report.rinfd;
  j["scaling_alpha"] = r.report.scaling_alpha;
  j["n_infd"] = r.report.n_infd_used;
  j["n_sens"] = r.report.n_sens_used;
  j["seed"] = r.report.seed;
  j["zero_attr_unnormalized"] = r.report.zero_attr_unnormalized;
  return j;
}

}  // namespace

std::string report_to_json(const std::vector<ReportRecord>& records, const MeasureConfig& cfg,
                           const std::string& family_spec) {
  json j;
  j["format_version"] = 1;
  j["config"] = {{"n_infd", cfg.n_infd},
                 {"n_sens", cfg.n_sens},
                 {"radius_r", cfg.radius_r},
                 {"ball_norm", cfg.ball_norm == BallNorm::linf ? "inf" : "l2"},
                 {"optimal_scaling", cfg.apply_optimal_scaling},
                 {"unit_normalization", cfg.apply_unit_normalization},
                 {"seed", cfg.seed},
                 {"perturbation", family_spec}};
  json recs = json::array();
  for (const ReportRecord& r : records) recs.push_back(report_record_json(r));
  j["records"] = std::move(recs);

  // Per-method means over inputs.
  std::vector<std::string> order;
  json agg = json::array();
  for (const ReportRecord& r : records) {
    bool seen = false;
    for (const auto& m : order) seen = seen || m == r.report.method_tag;
    if (!seen) order.push_back(r.report.method_tag);
  }
  for (const std::string& m : order) {
    double infd = 0.0, sm = 0.0;
    int n = 0;
    for (const ReportRecord& r : records)
      if (r.report.method_tag == m) {
        infd += r.report.infidelity;
        sm += r.report.sens_max;
        ++n;
      }
    agg.push_back({{"method", m},
                   {"mean_infidelity", infd / n},
                   {"mean_sens_max", sm / n},
                   {"n_inputs", n}});
  }
  j["aggregates"] = std::move(agg);
  return j.dump(2) + "\n";
}

std::string check_result_to_json_line(const CheckResult& r) {
  json j;
  j["check"] = r.name;
  j["applicable"] = r.applicable;
  j["passed"] = r.passed;
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["slack"] = r.slack_used;
  j["kind"] = r.kind == CheckKind::equality ? "equality" : "inequality";
  j["context"] = r.context;
  return j.dump();
}

std::string check_results_to_json(const std::vector<CheckResult>& results, std::uint64_t seed) {
  json j;
  j["format_version"] = 1;
  j["seed"] = seed;
  json recs = json::array();
  for (const CheckResult& r : results) recs.push_back(json::parse(check_result_to_json_line(r)));
  j["checks"] = std::move(recs);
  j["all_passed"] = suite_passed(results);
  return j.dump(2) + "\n";
}

}  // namespace xinfid
