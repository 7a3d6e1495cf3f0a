#pragma once

// The covariance operator Phi*(X) = E[A X A^T] for A = I - D + C, where c_ji is
// the mass node i sends to node j and D = diag(column sums of C), in closed form
// from the first and second moments of C. Supports per-node Q = diag(q_i) and
// R = diag(r_i).
//
// With S = diag(column sums of P), psi(X) the diagonal of X as a vector,
// psi_inv(v) = diag(v), Xd = psi_inv(psi(X)) and X0 = X - Xd:
//
//   E[D X C^T] = a S Q X0 Q P^T + b S Q Xd Q P^T - b Q Xd Q (P.P)^T + Q R Xd R Q P^T
//   E[D X D]   = a S Q X0 Q S + b Xd Q^2 (S^2 - psi_inv((P.P)^T 1)) + Q R Xd R Q S
//   E[C X C^T] = a P Q X0 Q P^T + b P Q Xd Q P^T - b psi_inv((P.P) psi(Q^2 X))
//                + psi_inv(P psi((QR)^2 X))
//
// (a = alpha, b = beta, P.P the Hadamard square). For column-stochastic P, S = I.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pushsum/graph.hpp"
#include "pushsum/rate.hpp"
#include "pushsum/types.hpp"

namespace pushsum {

struct PhiModel {
    Matrix p;
    Vector qdiag;
    Vector rdiag;
    double alpha = 0.0;
    double beta = 0.0;
    double c = 0.0;
    /// E[C] = sqrt_u * P Q.
    double sqrt_u = 1.0;

    std::size_t n() const noexcept { return static_cast<std::size_t>(p.rows()); }
    bool homogeneous() const;
};

/// Uses params.node_q / node_r when present, q / r otherwise. Throws
/// ValidationError if beta != 0 on a weighted mixing matrix or sizes disagree.
PhiModel make_phi_model(const MixingMatrix& mix, const CorrelationParams& params);

Vector psi(const Matrix& x);
Matrix psi_inv(const Vector& v);
/// X0 = X - psi_inv(psi(X)).
Matrix off_diagonal(const Matrix& x);

Matrix expect_dxc(const PhiModel& m, const Matrix& x);
Matrix expect_dxd(const PhiModel& m, const Matrix& x);
Matrix expect_cxc(const PhiModel& m, const Matrix& x);

/// E[D - C] = sqrt(u) (S - P) Q.
Matrix expect_drift(const PhiModel& m);

/// X - E[D-C] X - X E[D-C]^T + E[DXD] - E[DXC^T] - E[DX^TC^T]^T + E[CXC^T].
Matrix phi_star(const PhiModel& m, const Matrix& x);

struct PhiIterateOptions {
    bool keep_states = true;
    /// Called with (t, X_t) every `dump_every` steps when > 0.
    std::size_t dump_every = 0;
    std::function<void(std::size_t, const Matrix&)> dump;
};

struct PhiTrajectory {
    std::vector<Matrix> states; // X_0..X_T when keep_states
    std::vector<double> trace;  // trace(X_t), t = 0..T
    bool diverged = false;      // trace exceeded 1e300
    /// Least-squares slope of log trace over the last half of the trajectory.
    std::optional<double> empirical_rate;
};

/// X_0 = I - J, X_t = Phi*(X_{t-1}) for t = 1..t_max.
PhiTrajectory iterate_phi(const PhiModel& m, std::size_t t_max, const PhiIterateOptions& opts = {});

struct MuTrajectory {
    std::vector<Vector> mu; // mu_0..mu_T
    Vector lambda;
    double trace(std::size_t t) const { return mu.at(t).sum(); }
};

/// mu_{t+1,j} = Delta_j mu_{t,j} + (q^2 b_j / N) sum_i mu_{t,i}.
MuTrajectory eigen_recursion(const SecularCoefficients& coeffs, const Vector& mu0, std::size_t t_max);

/// mu_0 for X_0 = I - J: 0 on the lambda_1 = 1 (all-ones) direction, 1 elsewhere.
Vector initial_mu(std::size_t n);

struct PropertyFailure {
    std::string property;
    std::size_t trial = 0;
    double value = 0.0;
    Matrix witness;
};

struct PropertyReport {
    std::size_t trials = 0;
    std::size_t checks = 0;
    std::vector<PropertyFailure> failures;
    bool ok() const { return failures.empty(); }
};

/// Randomized checks of Phi*: nonnegativity on entrywise-nonnegative inputs,
/// Phi*(X^T) = Phi*(X)^T, PSD preservation, J-annihilation on both sides, and
/// X_t in {X = X^T, XJ = 0, X PSD} along a short trajectory from a random PSD
/// seed in that set. Trials run in parallel; trial i uses RNG stream i of `seed`.
PropertyReport check_phi_properties(const PhiModel& m, std::size_t trials, std::uint64_t seed);

namespace serial {
PropertyReport check_phi_properties(const PhiModel& m, std::size_t trials, std::uint64_t seed);
}

/// Smallest eigenvalue of a symmetric matrix (Jacobi for n <= 32, otherwise the
/// minimum over 64 random Rayleigh quotients, which is an upper estimate).
double min_eigenvalue(const Matrix& x, std::uint64_t seed = 0);

} // namespace pushsum
