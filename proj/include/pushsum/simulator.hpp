#pragma once

// Monte Carlo push-sum with two concrete message protocols, moment fitting, a
// sampled Phi*, and empirical decay-rate measurement.
//
// Each step, node i activates independently with probability q_i.
//   broadcast: an active node sends weight w to every neighbour.
//   unicast:   an active node sends weight w to one uniformly chosen neighbour.
// c_ji is the mass sent from i to j and A = I - D + C with D = diag(1^T C).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pushsum/graph.hpp"
#include "pushsum/phi.hpp"
#include "pushsum/rate.hpp"
#include "pushsum/rng.hpp"
#include "pushsum/types.hpp"

namespace pushsum {

enum class ProtocolKind { broadcast, unicast };

std::string to_string(ProtocolKind k);
ProtocolKind parse_protocol(const std::string& name);

struct ProtocolSpec {
    ProtocolKind kind = ProtocolKind::broadcast;
    double w = 0.0;
    std::uint64_t seed = 0;
};

/// Checks w > 0, sent mass w * degree <= 1 (broadcast) or w <= 1 (unicast), and
/// a regular graph for unicast. Throws ValidationError.
void validate_protocol(const ProtocolSpec& spec, const MixingMatrix& mix);

/// Closed-form moment parameters of a protocol on a {0,c} mixing matrix with
/// row-stochastic P (c = 1/degree) for broadcast and unicast alike:
///   broadcast: sqrt(u) = w/c, r^2 = w^2/(q c), alpha = w^2/c^2, beta = w^2/(q c^2)
///   unicast:   sqrt(u) = w,   r^2 = w^2/q,     alpha = w^2,     beta = 0
/// With node_q given (unicast only), r_i^2 = w^2/q_i per node.
CorrelationParams analytic_protocol_params(const ProtocolSpec& spec, const MixingMatrix& mix, double q,
                                           const std::vector<double>& node_q = {});

/// Draws C(t). Neighbour lists are taken from the nonzero pattern of P.
class ProtocolSampler {
public:
    ProtocolSampler(const ProtocolSpec& spec, const MixingMatrix& mix, std::vector<double> activation);
    ProtocolSampler(const ProtocolSpec& spec, const MixingMatrix& mix, double q);

    std::size_t n() const noexcept { return neighbors_.size(); }
    void sample(Rng& rng, Matrix& c) const;
    Matrix sample(Rng& rng) const;
    const std::vector<std::vector<std::size_t>>& neighbors() const noexcept { return neighbors_; }

private:
    ProtocolSpec spec_;
    std::vector<double> activation_;
    std::vector<std::vector<std::size_t>> neighbors_;
};

inline Matrix sample_c(const ProtocolSpec& spec, const MixingMatrix& mix, double q, Rng& rng) {
    return ProtocolSampler(spec, mix, q).sample(rng);
}

/// A = I - D + C. Throws NumericalError if a column of C sums above 1.
Matrix build_a(const Matrix& c);

struct PushSumOptions {
    bool record_trajectory = false; // keep x(t), w(t)
    bool record_a = false;          // keep every sampled A(t)
};

struct PushSumRun {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    /// Entry t refers to time t = 0..T.
    std::vector<double> log_error;    // log max_i |x_i/w_i - xbar|; -inf exact zero; NaN missing
    std::vector<double> log_dev_sq;   // log ||x(t) - xbar w(t)||^2
    std::vector<double> sum_x, sum_w, min_w;
    std::vector<Vector> x, w;         // when record_trajectory
    std::vector<Matrix> a_log;        // when record_a
    double xbar = 0.0;

    /// exp(log_error[t]); underflows to 0 for long runs, use log_error for fitting.
    double error(std::size_t t) const;
};

/// x(t) = A(t) x(t-1), w(t) = A(t) w(t-1), w(0) = 1. The deviation
/// y(t) = x(t) - xbar w(t) is propagated separately and renormalised every step,
/// so the error is resolved far below double precision of x itself.
PushSumRun run_pushsum(const ProtocolSampler& sampler, const Vector& x0, std::size_t t_max, Rng& rng,
                       const PushSumOptions& opts = {});

/// Least-squares slope of log error over the trailing `window` fraction,
/// skipping missing and -inf entries. Needs >= 10 finite entries in the window
/// unless all entries are exact zeros, in which case returns -inf.
double fit_log_slope(std::span<const double> log_error, double window = 0.5);
double empirical_rate(const PushSumRun& run, double window = 0.5);

struct EnsembleResult {
    std::vector<double> slopes; // per run, in run order
    double median_slope = 0.0;
    std::vector<PushSumRun> runs; // only when keep_runs
};

/// `runs` independent runs; run k uses RNG stream k of spec.seed and a standard
/// normal x0 drawn from that stream. Parallel over runs.
EnsembleResult run_ensemble(const ProtocolSampler& sampler, std::uint64_t seed, std::size_t runs, std::size_t t_max,
                            double window = 0.5, bool keep_runs = false);

struct MomentEstimate {
    std::size_t samples = 0;
    double q = 0.0;
    double u_hat = 0.0, u_se = 0.0;
    double r2_hat = 0.0, r2_se = 0.0;
    double alpha_hat = 0.0, alpha_se = 0.0;
    std::optional<double> beta_hat; // empty when no node has two neighbours
    double beta_se = 0.0;
    /// Residual of the homogeneous model: for each moment class (mean, square,
    /// same-sender pairs, sender pairs) the RMS z-score of per-entry sample means
    /// around the fitted prediction; `residual` is the largest class value.
    double residual = 0.0;
    double residual_max_z = 0.0;

    CorrelationParams params() const;
};

/// Fits u, r^2, beta, alpha from `samples` draws of C. Parallel over fixed
/// blocks of samples with one RNG stream per block; block sums are reduced in
/// block order. Throws ValidationError when q = 0 (nothing identifiable).
MomentEstimate estimate_moments(const ProtocolSpec& spec, const MixingMatrix& mix, double q, std::size_t samples);

struct PhiEstimate {
    Matrix mean;
    Matrix se;
};

/// Sample mean and per-entry standard error of A X A^T.
PhiEstimate phi_star_mc(const ProtocolSampler& sampler, const Matrix& x, std::size_t samples, std::uint64_t seed);

namespace serial {
EnsembleResult run_ensemble(const ProtocolSampler& sampler, std::uint64_t seed, std::size_t runs, std::size_t t_max,
                            double window = 0.5, bool keep_runs = false);
MomentEstimate estimate_moments(const ProtocolSpec& spec, const MixingMatrix& mix, double q, std::size_t samples);
PhiEstimate phi_star_mc(const ProtocolSampler& sampler, const Matrix& x, std::size_t samples, std::uint64_t seed);
} // namespace serial

double median(std::vector<double> v);

} // namespace pushsum
