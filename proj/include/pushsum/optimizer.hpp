#pragma once

// Tuning the transmission intensity q. For alpha >= 0 the map q -> xi1(q) is
// convex, so the sign of xi1'(q) alone brackets the minimiser.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pushsum/rate.hpp"

namespace pushsum {

enum class OptimizeMethod { derivative_bisection, golden_section };
enum class Boundary { interior, lower, upper };

std::string to_string(OptimizeMethod m);
std::string to_string(Boundary b);

struct OptimizationResult {
    double q_star = 0.0;
    double xi1_star = 0.0;
    std::optional<double> derivative_at_q_star;
    std::size_t iterations = 0;
    double q_lo = 0.0;
    double q_hi = 0.0;
    /// Derivative signs at the final bracket ends (-1, 0, +1); 0 when unknown.
    int sign_lo = 0;
    int sign_hi = 0;
    Boundary boundary = Boundary::interior;
    OptimizeMethod method = OptimizeMethod::derivative_bisection;
    /// Every b_j (j>1) was zero: xi1 = max Delta_j, no secular branch.
    bool degenerate = false;
    std::string note;
};

struct SearchInterval {
    double lo;
    double hi;
};

/// [1e-6, min(1 - 1e-6, (1 - 1e-9)/sqrt(u))].
SearchInterval search_interval(const CorrelationParams& p);

/// Derivative-sign bisection on the search interval, golden-section fallback
/// when a derivative evaluation is unavailable. tol must lie in (0, 1e-3].
OptimizationResult minimize_rate(const Spectrum& s, const CorrelationParams& p, double c, double tol = 1e-8,
                                 CoefficientForm form = CoefficientForm::theorem);

/// Golden-section search on xi1 alone. Exposed for tests.
OptimizationResult golden_section_rate(const Spectrum& s, const CorrelationParams& p, double c, double tol,
                                       CoefficientForm form = CoefficientForm::theorem);

struct SweepRow {
    double q = 0.0;
    std::optional<RatePoint> point;
    std::string error;
    /// Interior rows: generalized second difference >= -1e-9. Always true at the ends.
    bool convexity_ok = true;
    /// -1 decreasing, +1 increasing, 0 flat or unknown (sign of xi1').
    int trend = 0;
};

struct SweepTable {
    std::vector<SweepRow> rows;
};

/// One RatePoint per grid value (grid sorted, in (0,1)); rows are evaluated in
/// parallel and emitted in grid order. Failures are recorded per row.
SweepTable sweep(const Spectrum& s, const CorrelationParams& p, double c, const std::vector<double>& q_grid,
                 CoefficientForm form = CoefficientForm::theorem);

namespace serial {
SweepTable sweep(const Spectrum& s, const CorrelationParams& p, double c, const std::vector<double>& q_grid,
                 CoefficientForm form = CoefficientForm::theorem);
}

/// Evenly spaced grid of `points` values from lo to hi inclusive.
std::vector<double> linear_grid(double lo, double hi, std::size_t points);

struct ConvexityReport {
    std::vector<std::size_t> violations; // row indices
    double min_second_difference = 0.0;
    bool ok() const { return violations.empty(); }
};

/// Generalized second difference
///   d_i = 2 (h_r y_{i-1} + h_l y_{i+1} - (h_l + h_r) y_i) / (h_l + h_r)
/// (the usual y_{i-1} - 2 y_i + y_{i+1} on uniform grids) must be >= -1e-9.
/// Needs at least 3 points.
ConvexityReport convexity_probe(const std::vector<double>& q, const std::vector<double>& y);
ConvexityReport convexity_probe(const SweepTable& table);

} // namespace pushsum
