#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pushsum/phi.hpp"
#include "pushsum/simulator.hpp"

using namespace pushsum;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

PhiModel homogeneous_model(const MixingMatrix& mix, double q, double r, double alpha, double beta, double u = 1.0) {
    CorrelationParams p;
    p.q = q;
    p.r = r;
    p.alpha = alpha;
    p.beta = beta;
    p.u = u;
    return make_phi_model(mix, p);
}

PhiModel random_model(Rng& rng, std::size_t n_max) { return oracle::random_phi_model(rng, n_max); }

} // namespace

TEST_CASE("diagonal extraction") {
    const auto n = 4;
    const Matrix i = Matrix::Identity(n, n);
    const Matrix j = Matrix::Constant(n, n, 1.0 / n);
    CHECK(psi(i) == Vector::Ones(n));
    CHECK((psi(j) - Vector::Constant(n, 0.25)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((psi(i - j) - Vector::Constant(n, 0.75)).cwiseAbs().maxCoeff() <= 1e-16);
    CHECK(psi_inv(Vector::Ones(n)) == i);
    CHECK(psi_inv(Vector::Zero(n)) == Matrix::Zero(n, n));

    Rng rng = make_stream(1, 0);
    const Matrix x = oracle::random_matrix(5, rng);
    CHECK(psi_inv(psi(x)) + off_diagonal(x) == x);
    const Vector v = Vector::Random(5);
    CHECK(psi(psi_inv(v)) == v);
}

TEST_CASE("expectation formulas on hand-reducible inputs") {
    const auto mix = build_mixing_matrix(graphs::ring(5), MixingMode::row_stochastic_regular);
    const Matrix i = Matrix::Identity(5, 5);
    const double q = 0.3, r = 0.7;
    const auto m0 = homogeneous_model(mix, q, r, 0.0, 0.0);

    CHECK(max_abs(expect_dxc(m0, Matrix::Zero(5, 5))) == 0.0);
    CHECK(max_abs(expect_dxd(m0, Matrix::Zero(5, 5))) == 0.0);
    CHECK(max_abs(expect_cxc(m0, Matrix::Zero(5, 5))) == 0.0);

    CHECK(max_abs(expect_dxc(m0, i) - q * q * r * r * mix.entries.transpose()) <= 1e-15);
    CHECK(max_abs(expect_dxd(m0, i) - q * q * r * r * i) <= 1e-15);
    const Matrix rows = mix.entries.rowwise().sum().asDiagonal();
    CHECK(max_abs(expect_cxc(m0, i) - q * q * r * r * rows) <= 1e-15);

    const auto ma = homogeneous_model(mix, q, r, 0.4, 0.0);
    Rng rng = make_stream(2, 0);
    const Matrix x = off_diagonal(oracle::random_symmetric(5, rng));
    CHECK(max_abs(expect_dxd(ma, x) - 0.4 * q * q * x) <= 1e-15);
}

TEST_CASE("brute-force index sums") {
    Rng rng = make_stream(3, 0);
    for (int trial = 0; trial < 30; ++trial) {
        const auto m = random_model(rng, 6);
        const Matrix x = oracle::random_matrix(m.n(), rng);
        CHECK(max_abs(expect_dxc(m, x) - oracle::brute_dxc(m, x)) <= 1e-12);
        CHECK(max_abs(expect_dxd(m, x) - oracle::brute_dxd(m, x)) <= 1e-12);
        CHECK(max_abs(expect_cxc(m, x) - oracle::brute_cxc(m, x)) <= 1e-12);
        // E[C X D] through the transpose identity
        CHECK(max_abs(expect_dxc(m, x.transpose()).transpose() - oracle::brute_cxd(m, x)) <= 1e-12);
        CHECK(max_abs(phi_star(m, x) - oracle::brute_phi(m, x)) <= 1e-12);
    }
}

TEST_CASE("q = 0 leaves X unchanged") {
    const auto mix = build_mixing_matrix(graphs::petersen(), MixingMode::row_stochastic_regular);
    const auto m = homogeneous_model(mix, 0.0, 0.5, 0.3, 0.1);
    Rng rng = make_stream(4, 0);
    const Matrix x = oracle::random_matrix(10, rng);
    CHECK(max_abs(phi_star(m, x) - x) == 0.0);
}

TEST_CASE("property: linearity and transpose equivariance") {
    Rng rng = make_stream(5, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = random_model(rng, 8);
        const Matrix x = oracle::random_matrix(m.n(), rng), y = oracle::random_matrix(m.n(), rng);
        const double a = 2 * uniform01(rng) - 1, b = 2 * uniform01(rng) - 1;
        CHECK(max_abs(phi_star(m, a * x + b * y) - a * phi_star(m, x) - b * phi_star(m, y)) <= 1e-12);
        CHECK(max_abs(phi_star(m, x.transpose()) - phi_star(m, x).transpose()) <= 1e-12);
    }
}

TEST_CASE("heterogeneous vectors with equal entries reproduce the homogeneous operator") {
    const auto mix = build_mixing_matrix(graphs::ring(7), MixingMode::row_stochastic_regular);
    CorrelationParams p;
    p.q = 0.4;
    p.r = 0.6;
    p.alpha = 0.2;
    p.beta = 0.3;
    const auto hom = make_phi_model(mix, p);
    CHECK(hom.homogeneous());
    CorrelationParams h = p;
    h.node_q.assign(7, 0.4);
    h.node_r.assign(7, 0.6);
    const auto het = make_phi_model(mix, h);
    Rng rng = make_stream(6, 0);
    const Matrix x = oracle::random_matrix(7, rng);
    CHECK(phi_star(hom, x) == phi_star(het, x));
}

TEST_CASE("iteration from I - J") {
    const auto mix = build_mixing_matrix(graphs::ring(6), MixingMode::row_stochastic_regular);
    // unicast with w = 0.5 at q = 0.3: u = w^2, r^2 = w^2/q, alpha = w^2
    const auto p = analytic_protocol_params({ProtocolKind::unicast, 0.5, 0}, mix, 0.3);
    const auto m = make_phi_model(mix, p);
    const auto traj = iterate_phi(m, 60);
    CHECK(std::abs(traj.trace[0] - 5.0) <= 1e-14);
    CHECK(traj.states.size() == 61);
    CHECK_FALSE(traj.diverged);

    const Matrix j = Matrix::Constant(6, 6, 1.0 / 6);
    for (std::size_t t = 0; t <= 50; ++t) {
        const Matrix& x = traj.states[t];
        CHECK(max_abs(x - x.transpose()) <= 1e-13);
        CHECK(max_abs(x * j) <= 1e-13);
        CHECK(min_eigenvalue(x) >= -1e-12);
        // constant diagonal on a vertex-transitive graph
        CHECK((x.diagonal().array() - x.diagonal().mean()).abs().maxCoeff() <= 1e-10);
    }

    // trace against the eigenvalue recursion
    const auto s = symmetric_eigen(mix);
    const auto coeffs = secular_coefficients(s, p, 0.5, 0.3);
    const auto mu = eigen_recursion(coeffs, initial_mu(6), 50);
    for (std::size_t t = 0; t <= 50; ++t)
        CHECK(std::abs(traj.trace[t] - mu.trace(t)) <= 1e-8 * mu.trace(t));

    // slope of log trace approaches log of the companion spectral radius
    const auto pt = largest_root(coeffs);
    REQUIRE(traj.empirical_rate);
    CHECK(*traj.empirical_rate <= std::log(pt.xi1) + 1e-6);
    const auto long_run = iterate_phi(m, 400, {false, 0, {}});
    CAPTURE(pt.spectral_radius);
    CHECK(std::abs(*long_run.empirical_rate - std::log(pt.spectral_radius)) <= 1e-3);
}

TEST_CASE("dump callback") {
    const auto mix = build_mixing_matrix(graphs::complete(4), MixingMode::row_stochastic_regular);
    const auto m = homogeneous_model(mix, 0.3, 0.6, 0.1, 0.0);
    std::vector<std::size_t> seen;
    PhiIterateOptions opts;
    opts.keep_states = false;
    opts.dump_every = 5;
    opts.dump = [&](std::size_t t, const Matrix&) { seen.push_back(t); };
    const auto traj = iterate_phi(m, 12, opts);
    CHECK(traj.states.empty());
    CHECK(traj.trace.size() == 13);
    CHECK(seen == std::vector<std::size_t>{0, 5, 10});
}

TEST_CASE("divergence guard") {
    const auto mix = build_mixing_matrix(graphs::complete(4), MixingMode::row_stochastic_regular);
    const auto m = homogeneous_model(mix, 0.9, 1e60, 0.0, 0.0);
    const auto traj = iterate_phi(m, 100);
    CHECK(traj.diverged);
    CHECK(traj.trace.size() < 101);
}

TEST_CASE("eigen recursion special cases") {
    const auto s = symmetric_eigen(build_mixing_matrix(graphs::complete(3), MixingMode::row_stochastic_regular));
    CorrelationParams p;
    p.q = 0.2;
    p.r = 0.5;
    const auto k = secular_coefficients(s, p, 0.5, 0.2);
    const auto mu = eigen_recursion(k, initial_mu(3), 3);
    CHECK(mu.mu[0] == Vector(Eigen::Vector3d(0, 1, 1)));
    CHECK(std::abs(mu.mu[1](1) - 0.42) <= 1e-15);
    CHECK(std::abs(mu.mu[1](2) - 0.42) <= 1e-15);

    SecularCoefficients no_b = k;
    no_b.b.setZero();
    const auto decoupled = eigen_recursion(no_b, initial_mu(3), 4);
    CHECK(std::abs(decoupled.mu[4](1) - std::pow(0.4, 4)) <= 1e-16);

    const auto still = eigen_recursion(secular_coefficients(s, p, 0.5, 0.0), initial_mu(3), 5);
    CHECK(still.mu[5] == still.mu[0]);

    // against powers of the companion matrix on the j > 1 block
    const Matrix c = companion_matrix(k);
    Vector v = Vector::Ones(2);
    for (int t = 0; t < 3; ++t) v = c * v;
    CHECK(std::abs(v(0) - mu.mu[3](1)) <= 1e-12);
    CHECK(std::abs(v(1) - mu.mu[3](2)) <= 1e-12);
}

TEST_CASE("commutation with P on transitive instances") {
    const auto mix = build_mixing_matrix(graphs::petersen(), MixingMode::row_stochastic_regular);
    const auto m = homogeneous_model(mix, 0.4, 0.8, 0.2, 0.3);
    // polynomials in P commute with P and have constant diagonal here
    const Matrix& p = mix.entries;
    const Matrix x = 0.3 * Matrix::Identity(10, 10) + 0.5 * p - 0.2 * p * p;
    const Matrix y = phi_star(m, x);
    CHECK(max_abs(p * y - y * p) <= 1e-10);
}

TEST_CASE("property checks on realizable models") {
    const auto mix = build_mixing_matrix(graphs::ring(6), MixingMode::row_stochastic_regular);
    const auto p = analytic_protocol_params({ProtocolKind::broadcast, 0.25, 0}, mix, 0.3);
    const auto rep = check_phi_properties(make_phi_model(mix, p), 100, 42);
    CHECK(rep.trials == 100);
    CHECK(rep.ok());

    // explicit instances
    const auto m = make_phi_model(mix, p);
    CHECK(min_eigenvalue(phi_star(m, Matrix::Identity(6, 6))) >= -1e-12);
    Matrix e = Matrix::Zero(6, 6);
    e(0, 1) = e(1, 0) = 2.0;
    CHECK(phi_star(m, e).minCoeff() >= -1e-15);
}

TEST_CASE("property checks catch a broken model") {
    const auto mix = build_mixing_matrix(graphs::ring(6), MixingMode::row_stochastic_regular);
    // r far below what any protocol with these means can produce: Phi* stops being PSD-preserving
    auto m = homogeneous_model(mix, 0.9, 0.05, 0.0, 0.0);
    const auto rep = check_phi_properties(m, 20, 1);
    CHECK_FALSE(rep.ok());
    REQUIRE_FALSE(rep.failures.empty());
    CHECK(rep.failures.front().witness.rows() == 6);
}
