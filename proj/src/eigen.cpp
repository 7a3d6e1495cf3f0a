// Cyclic Jacobi eigensolver for dense symmetric matrices.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pushsum/graph.hpp"

namespace pushsum {

namespace {

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    const auto n = a.rows();
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

// Rotate rows/columns p < q so that a(p,q) becomes zero. The two columns are
// updated in one branch-free pass, then mirrored into rows p and q.
void rotate(Matrix& a, Matrix& v, Eigen::Index p, Eigen::Index q) {
    const double apq = a(p, q), app = a(p, p), aqq = a(q, q);
    const double theta = (aqq - app) / (2.0 * apq);
    const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;

    const auto n = a.rows();
    double* colp = a.col(p).data();
    double* colq = a.col(q).data();
    for (Eigen::Index k = 0; k < n; ++k) {
        const double akp = colp[k], akq = colq[k];
        colp[k] = c * akp - s * akq;
        colq[k] = s * akp + c * akq;
    }
    colp[p] = app - t * apq;
    colq[q] = aqq + t * apq;
    colp[q] = colq[p] = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        a(p, k) = colp[k];
        a(q, k) = colq[k];
    }

    double* vp = v.col(p).data();
    double* vq = v.col(q).data();
    for (Eigen::Index k = 0; k < n; ++k) {
        const double x = vp[k], y = vq[k];
        vp[k] = c * x - s * y;
        vq[k] = s * x + c * y;
    }
}

} // namespace

Spectrum symmetric_eigen(const Matrix& p) {
    if (p.rows() != p.cols()) throw NumericalError("symmetric_eigen: matrix is not square");
    const auto n = p.rows();
    const double scale = p.cwiseAbs().maxCoeff();
    if (n > 0 && (p - p.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300))
        throw NumericalError("symmetric_eigen: matrix is not symmetric");

    Matrix a = 0.5 * (p + p.transpose());
    Matrix v = Matrix::Identity(n, n);
    const double target = 1e-14 * a.norm();

    constexpr int max_sweeps = 100;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        const double off = off_diagonal_norm(a);
        if (off <= target) break;
        // Early sweeps only rotate the larger entries; later ones drop entries that
        // no longer change either diagonal element.
        const double threshold = sweep < 3 ? 0.2 * off / static_cast<double>(n * n) : 0.0;
        for (Eigen::Index i = 0; i < n - 1; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double aij = std::abs(a(i, j));
                if (aij == 0.0) continue;
                if (sweep >= 3 && std::abs(a(i, i)) + 100.0 * aij == std::abs(a(i, i)) &&
                    std::abs(a(j, j)) + 100.0 * aij == std::abs(a(j, j))) {
                    a(i, j) = a(j, i) = 0.0;
                    continue;
                }
                if (aij > threshold) rotate(a, v, i, j);
            }
    }
    if (sweep == max_sweeps) throw NumericalError("symmetric_eigen: Jacobi sweeps did not converge");

    // Descending order; stable sort keeps degenerate pairs in sweep order.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });

    Spectrum s;
    s.values.resize(n);
    s.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto src = order[static_cast<std::size_t>(k)];
        s.values(k) = a(src, src);
        Vector col = v.col(src);
        // First entry that is clearly nonzero is made positive.
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(col(i)) > 1e-12) {
                if (col(i) < 0) col = -col;
                break;
            }
        }
        s.vectors.col(k) = col;
    }
    return s;
}

} // namespace pushsum
