#include "pushsum/phi.hpp"

#include <algorithm>
#include <cmath>

#include "pushsum/rng.hpp"

namespace pushsum {

bool PhiModel::homogeneous() const {
    return (qdiag.array() == qdiag(0)).all() && (rdiag.array() == rdiag(0)).all();
}

PhiModel make_phi_model(const MixingMatrix& mix, const CorrelationParams& params) {
    const auto n = static_cast<Eigen::Index>(mix.n());
    if (params.beta != 0.0 && !mix.two_valued())
        throw ValidationError("beta!=0 needs {0,c} mixing", "weighted mixing matrix with beta != 0");
    auto vec = [&](const std::vector<double>& v, double fallback, const char* name) {
        if (v.empty()) return Vector(Vector::Constant(n, fallback));
        if (static_cast<Eigen::Index>(v.size()) != n)
            throw ValidationError(name, "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
        return Vector(Eigen::Map<const Vector>(v.data(), n));
    };
    PhiModel m;
    m.p = mix.entries;
    m.qdiag = vec(params.node_q, params.q, "node_q");
    m.rdiag = vec(params.node_r, params.r, "node_r");
    m.alpha = params.alpha;
    m.beta = params.beta;
    m.c = mix.c;
    m.sqrt_u = std::sqrt(params.u);
    return m;
}

Vector psi(const Matrix& x) { return x.diagonal(); }

Matrix psi_inv(const Vector& v) { return v.asDiagonal(); }

Matrix off_diagonal(const Matrix& x) {
    Matrix out = x;
    out.diagonal().setZero();
    return out;
}

namespace {

Vector column_sums(const Matrix& p) { return p.colwise().sum().transpose(); }

} // namespace

Matrix expect_dxc(const PhiModel& m, const Matrix& x) {
    const Vector& q = m.qdiag;
    const Vector& r = m.rdiag;
    const Vector s = column_sums(m.p);
    const Vector xd = psi(x);
    const Matrix pt = m.p.transpose();
    const Matrix ppt = m.p.cwiseProduct(m.p).transpose();

    const Vector q2xd = q.cwiseProduct(q).cwiseProduct(xd);
    Matrix out = m.alpha * (s.cwiseProduct(q).asDiagonal() * off_diagonal(x) * q.asDiagonal() * pt);
    out += (m.beta * s.cwiseProduct(q2xd) + q2xd.cwiseProduct(r).cwiseProduct(r)).asDiagonal() * pt;
    out -= m.beta * (q2xd.asDiagonal() * ppt);
    return out;
}

Matrix expect_dxd(const PhiModel& m, const Matrix& x) {
    const Vector& q = m.qdiag;
    const Vector& r = m.rdiag;
    const Vector s = column_sums(m.p);
    const Vector xd = psi(x);
    const Vector sq = s.cwiseProduct(q);
    const Vector pp_col = column_sums(m.p.cwiseProduct(m.p));

    Matrix out = m.alpha * (sq.asDiagonal() * off_diagonal(x) * sq.asDiagonal());
    const Vector q2xd = q.cwiseProduct(q).cwiseProduct(xd);
    out.diagonal() += m.beta * q2xd.cwiseProduct(s.cwiseProduct(s) - pp_col) +
                      q2xd.cwiseProduct(r).cwiseProduct(r).cwiseProduct(s);
    return out;
}

Matrix expect_cxc(const PhiModel& m, const Matrix& x) {
    const Vector& q = m.qdiag;
    const Vector& r = m.rdiag;
    const Vector xd = psi(x);
    const Matrix pt = m.p.transpose();
    const Vector q2xd = q.cwiseProduct(q).cwiseProduct(xd);

    Matrix out = m.alpha * (m.p * q.asDiagonal() * off_diagonal(x) * q.asDiagonal() * pt);
    out += m.beta * (m.p * q2xd.asDiagonal() * pt);
    out.diagonal() -= m.beta * (m.p.cwiseProduct(m.p) * q2xd);
    out.diagonal() += m.p * q2xd.cwiseProduct(r).cwiseProduct(r);
    return out;
}

Matrix expect_drift(const PhiModel& m) {
    Matrix l = -m.p;
    l.diagonal() += column_sums(m.p);
    return m.sqrt_u * (l * m.qdiag.asDiagonal());
}

Matrix phi_star(const PhiModel& m, const Matrix& x) {
    const Matrix l = expect_drift(m);
    const Matrix lx = l * x;
    Matrix out = x - lx - x * l.transpose();
    out += expect_dxd(m, x);
    out -= expect_dxc(m, x);
    out -= expect_dxc(m, x.transpose()).transpose();
    out += expect_cxc(m, x);
    return out;
}

PhiTrajectory iterate_phi(const PhiModel& m, std::size_t t_max, const PhiIterateOptions& opts) {
    const auto n = static_cast<Eigen::Index>(m.n());
    PhiTrajectory out;
    Matrix x = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
    out.trace.push_back(x.trace());
    if (opts.keep_states) out.states.push_back(x);
    if (opts.dump_every && opts.dump) opts.dump(0, x);
    // X_t J = 0 holds exactly (A is column stochastic). Rounding that leaks onto the
    // all-ones direction would never decay, so project it out each step.
    auto project = [](Matrix& y) {
        const Vector row = y.rowwise().mean();
        const Vector col = y.colwise().mean().transpose();
        const double all = row.mean();
        y.colwise() -= row;
        y.rowwise() -= col.transpose();
        y.array() += all;
    };
    for (std::size_t t = 1; t <= t_max; ++t) {
        x = phi_star(m, x);
        project(x);
        const double tr = x.trace();
        out.trace.push_back(tr);
        if (opts.keep_states) out.states.push_back(x);
        if (opts.dump_every && opts.dump && t % opts.dump_every == 0) opts.dump(t, x);
        if (!std::isfinite(tr) || std::abs(tr) > 1e300) {
            out.diverged = true;
            break;
        }
    }

    // Least-squares slope of log trace over t in [T/2, T].
    const std::size_t last = out.trace.size() - 1;
    const std::size_t first = last / 2;
    if (!out.diverged && last >= 2) {
        double st = 0, sy = 0, stt = 0, sty = 0;
        std::size_t cnt = 0;
        bool positive = true;
        for (std::size_t t = first; t <= last; ++t) {
            if (!(out.trace[t] > 0.0)) {
                positive = false;
                break;
            }
            const double y = std::log(out.trace[t]);
            const double tt = static_cast<double>(t);
            st += tt;
            sy += y;
            stt += tt * tt;
            sty += tt * y;
            ++cnt;
        }
        if (positive && cnt >= 2) {
            const double k = static_cast<double>(cnt);
            out.empirical_rate = (k * sty - st * sy) / (k * stt - st * st);
        }
    }
    return out;
}

Vector initial_mu(std::size_t n) {
    Vector mu = Vector::Ones(static_cast<Eigen::Index>(n));
    mu(0) = 0.0;
    return mu;
}

MuTrajectory eigen_recursion(const SecularCoefficients& k, const Vector& mu0, std::size_t t_max) {
    MuTrajectory out;
    out.lambda = k.lambda;
    out.mu.reserve(t_max + 1);
    out.mu.push_back(mu0);
    const Vector w = (k.q * k.q / static_cast<double>(k.n)) * k.b;
    for (std::size_t t = 0; t < t_max; ++t) {
        const Vector& prev = out.mu.back();
        out.mu.push_back(k.delta.cwiseProduct(prev) + w * prev.sum());
    }
    return out;
}

double min_eigenvalue(const Matrix& x, std::uint64_t seed) {
    const Matrix sym = 0.5 * (x + x.transpose());
    if (sym.rows() <= 32) return symmetric_eigen(sym).values.minCoeff();
    Rng rng = make_stream(seed, 0xE16);
    double best = sym.diagonal().minCoeff();
    for (int k = 0; k < 64; ++k) {
        Vector w(sym.rows());
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = standard_normal(rng);
        best = std::min(best, w.dot(sym * w) / w.squaredNorm());
    }
    return best;
}

namespace {

Matrix random_normal(Rng& rng, Eigen::Index n) {
    Matrix m(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) m(i, j) = standard_normal(rng);
    return m;
}

std::vector<PropertyFailure> run_trial(const PhiModel& m, std::size_t trial, std::uint64_t seed, std::size_t& checks) {
    std::vector<PropertyFailure> fails;
    Rng rng = make_stream(seed, trial);
    const auto n = static_cast<Eigen::Index>(m.n());
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    const Matrix j = Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
    const Matrix center = Matrix::Identity(n, n) - j;
    auto fail = [&](const char* name, double value, const Matrix& witness) {
        fails.push_back({name, trial, value, witness});
    };

    // 1. entrywise nonnegativity
    {
        Matrix x(n, n);
        for (Eigen::Index c = 0; c < n; ++c)
            for (Eigen::Index r = 0; r < n; ++r) x(r, c) = uniform01(rng);
        const double lo = phi_star(m, x).minCoeff();
        if (lo < -1e-12) fail("nonnegativity", lo, x);
        ++checks;
    }
    // 2. transpose equivariance
    {
        const Matrix x = random_normal(rng, n);
        const double err = (phi_star(m, x.transpose()) - phi_star(m, x).transpose()).cwiseAbs().maxCoeff();
        if (err > 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff())) fail("transpose", err, x);
        ++checks;
    }
    // 3. PSD preservation: Jacobi minimum eigenvalue (small n) plus random quadratic forms
    {
        const Matrix g = random_normal(rng, n) * inv_sqrt_n;
        const Matrix x = g.transpose() * g;
        const Matrix y = phi_star(m, x);
        double lo = n <= 32 ? symmetric_eigen(Matrix(0.5 * (y + y.transpose()))).values.minCoeff() : 0.0;
        for (int k = 0; k < 8; ++k) {
            Vector w(n);
            for (Eigen::Index i = 0; i < n; ++i) w(i) = standard_normal(rng);
            lo = std::min(lo, w.dot(y * w) / w.squaredNorm());
        }
        if (lo < -1e-10) fail("psd", lo, x);
        ++checks;
    }
    // 4. J-annihilation from the left and from the right
    {
        const Matrix x = center * random_normal(rng, n);
        const double err = (j * phi_star(m, x)).cwiseAbs().maxCoeff();
        if (err > 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff())) fail("J-annihilation-left", err, x);
        const Matrix xr = random_normal(rng, n) * center;
        const double err_r = (phi_star(m, xr) * j).cwiseAbs().maxCoeff();
        if (err_r > 1e-12 * std::max(1.0, xr.cwiseAbs().maxCoeff())) fail("J-annihilation-right", err_r, xr);
        checks += 2;
    }
    // 5. trajectory stays in {X = X^T, XJ = 0, X >= 0}
    {
        const Matrix g = random_normal(rng, n) * inv_sqrt_n;
        Matrix x = center * g.transpose() * g * center;
        const Matrix seed_x = x;
        for (int t = 1; t <= 5; ++t) {
            x = phi_star(m, x);
            const double scale = std::max(1e-300, x.cwiseAbs().maxCoeff());
            const double asym = (x - x.transpose()).cwiseAbs().maxCoeff();
            const double xj = (x * j).cwiseAbs().maxCoeff();
            if (asym > 1e-12 * scale) fail("trajectory-symmetry", asym, seed_x);
            if (xj > 1e-12 * std::max(1.0, scale)) fail("trajectory-XJ", xj, seed_x);
            if (n <= 32) {
                const double lo = symmetric_eigen(Matrix(0.5 * (x + x.transpose()))).values.minCoeff();
                if (lo < -1e-10) fail("trajectory-psd", lo, seed_x);
            }
            checks += 3;
        }
    }
    return fails;
}

} // namespace

PropertyReport check_phi_properties(const PhiModel& m, std::size_t trials, std::uint64_t seed) {
    std::vector<std::vector<PropertyFailure>> per_trial(trials);
    std::vector<std::size_t> checks(trials, 0);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(trials); ++t) {
        const auto i = static_cast<std::size_t>(t);
        per_trial[i] = run_trial(m, i, seed, checks[i]);
    }
    PropertyReport rep;
    rep.trials = trials;
    for (std::size_t i = 0; i < trials; ++i) {
        rep.checks += checks[i];
        for (auto& f : per_trial[i]) rep.failures.push_back(std::move(f));
    }
    return rep;
}

namespace serial {
PropertyReport check_phi_properties(const PhiModel& m, std::size_t trials, std::uint64_t seed) {
    PropertyReport rep;
    rep.trials = trials;
    for (std::size_t i = 0; i < trials; ++i) {
        auto f = run_trial(m, i, seed, rep.checks);
        for (auto& e : f) rep.failures.push_back(std::move(e));
    }
    return rep;
}
} // namespace serial

} // namespace pushsum
