#pragma once

// Rate bound for homogeneous push-sum protocols: secular coefficients, the
// largest root xi1 of the rate polynomial, and its derivative in q.
//
// With lambda_1 = 1 >= lambda_2 >= ... >= lambda_N the spectrum of P,
//
//   Delta_j = 1 - 2 q sqrt(u) (1 - lambda_j) + alpha q^2 (1 - lambda_j)^2
//   b_j     = (1 - lambda_j) ((beta - alpha)(1 - lambda_j) - beta c + 2 r^2)
//
// and xi1 is the largest root of
//
//   f(xi) = prod_{j>1} (xi - Delta_j) * sigma(xi),
//   sigma(xi) = 1 - (q^2 / N) sum_{j>1} b_j / (xi - Delta_j).
//
// The almost-sure error decays at least like exp(t * log(xi1) / 2).
//
// Index 0 of every vector below is lambda_1; "j > 1" means indices 1..N-1.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pushsum/graph.hpp"
#include "pushsum/types.hpp"

namespace pushsum {

/// Second-order moment parameters of the message matrix C(t):
///   E[c_ji]                    = sqrt(u) q_i p_ji
///   E[c_ji^2]                  = q_i^2 r_i^2 p_ji
///   E[c_li c_ji], l != j       = beta q_i^2 p_li p_ji   (same sender)
///   E[c_li c_jk], k != i       = alpha q_i q_k p_li p_jk (different senders)
struct CorrelationParams {
    double q = 0.0;
    double r = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double u = 1.0;
    /// Optional per-node q_i, r_i. Only the Phi* operator reads these.
    std::vector<double> node_q;
    std::vector<double> node_r;
};

struct ConstraintViolation {
    std::string name;
    std::string detail;
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<ConstraintViolation> v);
    ValidationError(std::string name, std::string detail);
    const std::vector<ConstraintViolation>& violations() const noexcept { return violations_; }

private:
    std::vector<ConstraintViolation> violations_;
};

/// Lists every violated constraint; empty means valid. Names used:
/// "q in [0,1]", "r>0", "u>0", "alpha>=0", "beta*c<=r^2", "q*sqrt(u)<1",
/// "beta-alpha>=-1", "b_j>=0", "beta!=0 needs {0,c} mixing", "c in (0,1]",
/// "node_q", "node_r".
std::vector<ConstraintViolation> check_params(const CorrelationParams& p, double c, bool two_valued_mixing = true);

/// Throws ValidationError listing all violations.
const CorrelationParams& validate_params(const CorrelationParams& p, double c, bool two_valued_mixing = true);

/// Which b_j closed form to use.
///  - theorem: the printed coefficient with "- beta c".
///  - moment_exact: "- 2 beta c", the coefficient the Phi* moment algebra produces
///    for {0,c} matrices. Identical when beta = 0; otherwise theorem >= exact,
///    so the theorem bound is the more conservative one.
enum class CoefficientForm { theorem, moment_exact };

std::string to_string(CoefficientForm f);
CoefficientForm parse_coefficient_form(const std::string& name);

struct SecularCoefficients {
    Vector lambda;      // spectrum the coefficients came from
    Vector delta;       // Delta_j(q)
    Vector delta_slope; // d Delta_j / dq at q
    Vector b;           // b_j
    double q = 0.0;
    std::size_t n = 0;
};

SecularCoefficients secular_coefficients(const Spectrum& s, const CorrelationParams& p, double c, double q,
                                         CoefficientForm form = CoefficientForm::theorem);

/// sigma(xi). Throws NumericalError at a pole (xi == Delta_j with b_j != 0).
double secular_value(double xi, const SecularCoefficients& coeffs);
/// d sigma / d xi = (q^2/N) sum_{j>1} b_j / (xi - Delta_j)^2.
double secular_slope(double xi, const SecularCoefficients& coeffs);

/// (N-1)x(N-1) matrix diag(Delta_2..Delta_N) + (q^2/N) b 1^T.
Matrix companion_matrix(const SecularCoefficients& coeffs);

struct RootOptions {
    /// Delta values closer than this are merged (b weights summed) before root finding.
    double merge_tolerance = 1e-13;
};

/// Which part of f produced xi1.
enum class RootBranch {
    secular,    // zero of sigma to the right of every pole
    pole,       // a Delta_j carrying zero weight sits above the secular root
    degenerate, // q = 0 or every b_j (j>1) is zero
};

struct RatePoint {
    double q = 0.0;
    double xi1 = 0.0;
    /// log(xi1)/2 when xi1 in (0,1].
    std::optional<double> gamma_half;
    double spectral_radius = 0.0;
    /// xi1'(q); empty when the separation precondition fails.
    std::optional<double> derivative;
    RootBranch branch = RootBranch::secular;
    /// xi1 = anchor + gap, anchor = largest pole. gap is computed directly so
    /// xi1 - Delta_j = gap + (anchor - Delta_j) keeps full relative accuracy.
    double anchor = 0.0;
    double gap = 0.0;
    /// xi1 <= 0 or xi1 > 1: no log bound emitted.
    bool warning = false;
    int bisection_steps = 0;
    int newton_steps = 0;
};

/// Largest root of the rate polynomial at q (bracketed bisection plus Newton
/// polish), companion spectral radius and, when defined, xi1'(q). Throws
/// ValidationError if some b_j < 0 for this spectrum.
RatePoint largest_root(const Spectrum& s, const CorrelationParams& p, double c, double q,
                       CoefficientForm form = CoefficientForm::theorem, const RootOptions& opts = {});

/// Same, starting from precomputed coefficients.
RatePoint largest_root(const SecularCoefficients& coeffs, const RootOptions& opts = {});

/// Implicit-function derivative
///   xi1' = [2q sum b/(xi1-Delta) + q^2 sum b Delta'/(xi1-Delta)^2] / [q^2 sum b/(xi1-Delta)^2]
/// At q = 0 returns the right limit Delta'_{j0}(0) = -2 sqrt(u) (1 - lambda_2).
/// Throws NumericalError when the root sits closer than 1e-13 to a pole.
double xi_derivative(const RatePoint& point, const SecularCoefficients& coeffs);

struct EndpointSlopes {
    double at_zero = 0.0; // xi1'(0) = -2 sqrt(u) (1 - lambda_2)
    /// xi1'(1) quotient: the derivative formula evaluated at (xi, q) = (1, 1).
    /// Informational only; it is not a certified bound.
    double at_one = 0.0;
    /// u != 1: printed slope formulas assume sqrt(u) = 1, these are the exact
    /// derivatives of the general Delta_j instead.
    bool extrapolated = false;
    double tangent_lower(double q) const { return 1.0 + at_zero * q; }
};

/// Requires lambda_j > -1 for all j.
EndpointSlopes endpoint_slopes(const Spectrum& s, const CorrelationParams& p, double c,
                               CoefficientForm form = CoefficientForm::theorem);

/// alpha <= 2 sqrt(u) / (3 + 1/(N-1)): sufficient for argmax_j Delta_j to sit at
/// the largest lambda_j, j>1. Diagnostic only.
bool delta_argmax_check(const Spectrum& s, const CorrelationParams& p);

} // namespace pushsum
