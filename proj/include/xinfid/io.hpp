#pragma once

// File formats: input CSV batches, attribution CSVs, the evaluation report
// document, and binary graymap rendering. All writes are atomic
// (temp file + rename).

#include "xinfid/verify.hpp"

namespace xinfid {

void atomic_write(const std::string& path, const std::string& bytes);

// One input vector per row; '#' lines are comments.
std::vector<Vector> read_inputs_csv(const std::string& path);

// index,value rows; the leading comment records method/locality/seed.
void write_attribution_csv(const std::string& path, const Attribution& attr, std::uint64_t seed);
Vector read_attribution_csv(const std::string& path);

// Binary PGM (P5, maxval 255): standardize to zero mean / unit variance and
// map +-3 sigma onto [0,255]; constant inputs render mid-gray (128).
std::string render_pgm(const Vector& values, int height, int width);
void write_pgm(const std::string& path, const Vector& values, int height, int width);

struct ReportRecord {
  int input_index = 0;
  MeasureReport report;
};

// Versioned report document (JSON).
std::string report_to_json(const std::vector<ReportRecord>& records, const MeasureConfig& cfg,
                           const std::string& family_spec);
std::string check_results_to_json(const std::vector<CheckResult>& results, std::uint64_t seed);
std::string check_result_to_json_line(const CheckResult& r);

}  // namespace xinfid
