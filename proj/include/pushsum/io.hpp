#pragma once

// CSV and JSON emitters shared by the CLI and tests. CSV reals use 17 significant
// digits with '.' as decimal separator; missing values are empty cells. JSON
// reals are shortest round-trip; NaN, infinities and missing values are null.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "pushsum/optimizer.hpp"
#include "pushsum/rate.hpp"
#include "pushsum/simulator.hpp"

namespace pushsum {

using Json = nlohmann::ordered_json;

std::string format_real(double v);
std::string format_real(const std::optional<double>& v);

Json json_real(double v);
Json json_real(const std::optional<double>& v);

std::string to_string(RootBranch b);

Json to_json(const CorrelationParams& p);
Json to_json(const RatePoint& pt);
Json to_json(const OptimizationResult& r);
Json to_json(const SweepTable& t);
Json to_json(const MomentEstimate& m);

void write_rate_csv(std::ostream& out, const RatePoint& pt);
void write_optimize_csv(std::ostream& out, const OptimizationResult& r);
/// Columns q, xi1, gamma_half, derivative, convexity_flag.
void write_sweep_csv(std::ostream& out, const SweepTable& t);
/// Header line for write_run_csv.
void write_run_csv_header(std::ostream& out);
/// Rows run, t, error, log_error, sum_x, sum_w, min_w for every `stride`-th step
/// (the last step is always written).
void write_run_csv(std::ostream& out, std::size_t run_index, const PushSumRun& run, std::size_t stride = 1);

/// Pretty JSON with a trailing newline.
std::string dump_json(const Json& j);

/// Writes text to `path`, or to stdout when path is empty or "-". Throws IoError.
void write_output(const std::string& path, const std::string& text);

} // namespace pushsum
