#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace oracle {

using Eigen::Index;

double moment(const pushsum::PhiModel& m, Index a, Index b, Index g, Index h) {
    const auto& p = m.p;
    const auto& q = m.qdiag;
    if (b != h) return m.alpha * q(b) * q(h) * p(a, b) * p(g, h);
    if (a != g) return m.beta * q(b) * q(b) * p(a, b) * p(g, b);
    return q(b) * q(b) * m.rdiag(b) * m.rdiag(b) * p(a, b);
}

// d_ii = sum_{l != i} c_li
Matrix brute_dxc(const pushsum::PhiModel& m, const Matrix& x) {
    const Index n = x.rows();
    Matrix out = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < n; ++k) {
            double s = 0.0;
            for (Index j = 0; j < n; ++j)
                for (Index l = 0; l < n; ++l)
                    if (l != i) s += x(i, j) * moment(m, l, i, k, j);
            out(i, k) = s;
        }
    return out;
}

Matrix brute_dxd(const pushsum::PhiModel& m, const Matrix& x) {
    const Index n = x.rows();
    Matrix out = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < n; ++k) {
            double s = 0.0;
            for (Index l = 0; l < n; ++l)
                for (Index mm = 0; mm < n; ++mm)
                    if (l != i && mm != k) s += moment(m, l, i, mm, k);
            out(i, k) = x(i, k) * s;
        }
    return out;
}

Matrix brute_cxc(const pushsum::PhiModel& m, const Matrix& x) {
    const Index n = x.rows();
    Matrix out = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < n; ++k) {
            double s = 0.0;
            for (Index j = 0; j < n; ++j)
                for (Index l = 0; l < n; ++l) s += x(j, l) * moment(m, i, j, k, l);
            out(i, k) = s;
        }
    return out;
}

Matrix brute_cxd(const pushsum::PhiModel& m, const Matrix& x) {
    const Index n = x.rows();
    Matrix out = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < n; ++k) {
            double s = 0.0;
            for (Index j = 0; j < n; ++j)
                for (Index l = 0; l < n; ++l)
                    if (l != k) s += x(j, k) * moment(m, i, j, l, k);
            out(i, k) = s;
        }
    return out;
}

Matrix brute_phi(const pushsum::PhiModel& m, const Matrix& x) {
    const Index n = x.rows();
    // E[D - C]: (D)_ii = sum_{l != i} E[c_li], C_ab = E[c_ab].
    Matrix ec(n, n);
    for (Index a = 0; a < n; ++a)
        for (Index b = 0; b < n; ++b) ec(a, b) = m.sqrt_u * m.qdiag(b) * m.p(a, b);
    Matrix ed = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index l = 0; l < n; ++l)
            if (l != i) ed(i, i) += ec(l, i);
    const Matrix drift = ed - ec;
    return x - drift * x - x * drift.transpose() + brute_dxd(m, x) - brute_dxc(m, x) - brute_cxd(m, x) +
           brute_cxc(m, x);
}

double delta(double lambda, double q, double u, double alpha) {
    const double x = 1.0 - lambda;
    return 1.0 - 2.0 * q * std::sqrt(u) * x + alpha * q * q * x * x;
}

double bcoef(double lambda, double r, double alpha, double beta, double c, bool exact) {
    const double x = 1.0 - lambda;
    return x * ((beta - alpha) * x - (exact ? 2.0 : 1.0) * beta * c + 2.0 * r * r);
}

namespace {

using Poly = std::vector<double>; // coefficients, lowest degree first

Poly mul_linear(const Poly& p, double root) {
    Poly out(p.size() + 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        out[i + 1] += p[i];
        out[i] -= root * p[i];
    }
    return out;
}

double eval(const Poly& p, double x) {
    double v = 0.0;
    for (std::size_t i = p.size(); i-- > 0;) v = v * x + p[i];
    return v;
}

} // namespace

double charpoly_largest_root(const std::vector<double>& d, const std::vector<double>& b, double q, std::size_t n) {
    const std::size_t k = d.size();
    Poly full{1.0};
    for (double di : d) full = mul_linear(full, di);
    Poly sum(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        Poly part{1.0};
        for (std::size_t i = 0; i < k; ++i)
            if (i != j) part = mul_linear(part, d[i]);
        for (std::size_t i = 0; i < part.size(); ++i) sum[i] += b[j] * part[i];
    }
    const double w = q * q / static_cast<double>(n);
    for (std::size_t i = 0; i < sum.size(); ++i) full[i] -= w * sum[i];

    // Leading coefficient 1: the polynomial is positive beyond every root.
    double bsum = 0.0;
    for (double v : b) bsum += std::abs(v);
    double hi = *std::max_element(d.begin(), d.end()) + w * bsum + 1.0;
    const double lo_limit = *std::min_element(d.begin(), d.end()) - 1.0;
    const int scan = 200000;
    const double step = (hi - lo_limit) / scan;
    double x = hi, fx = eval(full, x);
    for (int s = 0; s < scan; ++s) {
        const double y = x - step, fy = eval(full, y);
        if (fy == 0.0) return y;
        if ((fy < 0.0) != (fx < 0.0)) {
            double a = y, c = x;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (a + c);
                if ((eval(full, mid) < 0.0) == (eval(full, a) < 0.0)) a = mid;
                else c = mid;
            }
            return 0.5 * (a + c);
        }
        x = y;
        fx = fy;
    }
    // No sign change: even-multiplicity top root; fall back to the largest d.
    return *std::max_element(d.begin(), d.end());
}

double power_iteration_max(const Matrix& m, double shift, int iters, double tol) {
    const Matrix s = m - shift * Matrix::Identity(m.rows(), m.cols());
    Vector v = Vector::Ones(m.rows()) / std::sqrt(static_cast<double>(m.rows()));
    double val = 0.0;
    for (int i = 0; i < iters; ++i) {
        Vector w = s * v;
        const double next = v.dot(w);
        w.normalize();
        v = w;
        if (i > 10 && std::abs(next - val) <= tol * std::max(1.0, std::abs(next))) {
            val = next;
            break;
        }
        val = next;
    }
    return val + shift;
}

double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

pushsum::Graph random_connected_graph(std::size_t n, double extra, pushsum::Rng& rng) {
    std::vector<pushsum::Edge> edges;
    std::vector<std::vector<bool>> has(n, std::vector<bool>(n, false));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[pushsum::uniform_index(rng, i)]);
    for (std::size_t i = 1; i < n; ++i) {
        const auto a = order[i], b = order[pushsum::uniform_index(rng, i)];
        edges.emplace_back(std::min(a, b), std::max(a, b));
        has[a][b] = has[b][a] = true;
    }
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (!has[a][b] && pushsum::uniform01(rng) < extra) edges.emplace_back(a, b);
    return pushsum::Graph(n, edges);
}

Matrix random_matrix(std::size_t n, pushsum::Rng& rng) {
    Matrix m(n, n);
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = 2.0 * pushsum::uniform01(rng) - 1.0;
    return m;
}

Matrix random_symmetric(std::size_t n, pushsum::Rng& rng) {
    const Matrix m = random_matrix(n, rng);
    return 0.5 * (m + m.transpose());
}

std::vector<double> cycle_eigenvalues(std::size_t n) {
    std::vector<double> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back(std::cos(2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n)));
    std::sort(out.rbegin(), out.rend());
    return out;
}

pushsum::CorrelationParams random_valid_params(double c, pushsum::Rng& rng, bool allow_beta, double u_max) {
    for (;;) {
        pushsum::CorrelationParams p;
        p.u = 0.25 + (u_max - 0.25) * pushsum::uniform01(rng);
        p.r = 0.2 + 1.3 * pushsum::uniform01(rng);
        p.alpha = 1.5 * pushsum::uniform01(rng);
        p.beta = allow_beta && pushsum::uniform01(rng) < 0.7 ? p.r * p.r / c * pushsum::uniform01(rng) : 0.0;
        p.q = 0.05 + 0.9 * pushsum::uniform01(rng) * std::min(1.0, 1.0 / std::sqrt(p.u));
        if (pushsum::check_params(p, c).empty()) return p;
    }
}

Instance random_instance(pushsum::Rng& rng, std::size_t n_lo, std::size_t n_hi, bool allow_beta, double u_max) {
    using namespace pushsum;
    const std::size_t n = n_lo + uniform_index(rng, n_hi - n_lo + 1);
    const auto g = random_connected_graph(n, 0.3, rng);
    auto mix = build_mixing_matrix(g, MixingMode::uniform_c);
    auto s = symmetric_eigen(mix);
    for (;;) {
        auto p = random_valid_params(mix.c, rng, allow_beta, u_max);
        try {
            largest_root(s, p, mix.c, p.q);
            return {s, mix, p};
        } catch (const ValidationError&) {
        }
    }
}

double max_real_eigenvalue(const Matrix& m) {
    Eigen::EigenSolver<Matrix> es(m, false);
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()(i).imag()) < 1e-9) best = std::max(best, es.eigenvalues()(i).real());
    return best;
}

pushsum::PhiModel random_phi_model(pushsum::Rng& rng, std::size_t n_max) {
    using namespace pushsum;
    const std::size_t n = 2 + uniform_index(rng, n_max - 1);
    const auto g = random_connected_graph(n, 0.4, rng);
    MixingMatrix mix;
    const bool weighted = uniform01(rng) < 0.3;
    if (weighted) {
        Matrix w = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (const auto& [a, b] : g.edges())
            w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                w(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = 0.1 + uniform01(rng);
        w /= w.rowwise().sum().maxCoeff();
        mix = mixing_from_weights(w);
    } else {
        mix = build_mixing_matrix(g, MixingMode::uniform_c, (0.5 + 0.5 * uniform01(rng)) / static_cast<double>(g.max_degree()));
    }
    CorrelationParams p;
    p.u = 0.3 + uniform01(rng);
    p.q = 0.5;
    p.r = 0.5;
    p.alpha = uniform01(rng);
    p.beta = mix.two_valued() ? uniform01(rng) * 0.2 : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p.node_q.push_back(0.05 + 0.9 * uniform01(rng));
        p.node_r.push_back(0.2 + uniform01(rng));
    }
    return make_phi_model(mix, p);
}

} // namespace oracle
