#include "pushsum/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pushsum {

std::string to_string(OptimizeMethod m) {
    return m == OptimizeMethod::derivative_bisection ? "derivative-bisection" : "golden-section";
}

std::string to_string(Boundary b) {
    switch (b) {
    case Boundary::interior: return "interior";
    case Boundary::lower: return "lower";
    case Boundary::upper: return "upper";
    }
    return "?";
}

SearchInterval search_interval(const CorrelationParams& p) {
    return {1e-6, std::min(1.0 - 1e-6, (1.0 - 1e-9) / std::sqrt(p.u))};
}

namespace {

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

void check_tol(double tol) {
    if (!(tol > 0.0 && tol <= 1e-3))
        throw ValidationError("tol", "tolerance must lie in (0, 1e-3], got " + std::to_string(tol));
}

} // namespace

OptimizationResult golden_section_rate(const Spectrum& s, const CorrelationParams& p, double c, double tol,
                                       CoefficientForm form) {
    check_tol(tol);
    const auto iv = search_interval(p);
    auto xi = [&](double q) { return largest_root(s, p, c, q, form).xi1; };
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;

    OptimizationResult res;
    res.method = OptimizeMethod::golden_section;
    double a = iv.lo, b = iv.hi;
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = xi(x1), f2 = xi(x2);
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = xi(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = xi(x2);
        }
        ++res.iterations;
    }
    // The ends are candidates too: monotone instances converge onto a boundary.
    double best_q = 0.5 * (a + b), best = xi(best_q);
    for (double cand : {iv.lo, iv.hi}) {
        const double v = xi(cand);
        if (v < best) {
            best = v;
            best_q = cand;
        }
    }
    res.q_star = best_q;
    res.xi1_star = best;
    res.q_lo = best_q == iv.lo || best_q == iv.hi ? best_q : a;
    res.q_hi = best_q == iv.lo || best_q == iv.hi ? best_q : b;
    res.boundary = best_q == iv.lo ? Boundary::lower : best_q == iv.hi ? Boundary::upper : Boundary::interior;
    res.derivative_at_q_star = largest_root(s, p, c, best_q, form).derivative;
    return res;
}

OptimizationResult minimize_rate(const Spectrum& s, const CorrelationParams& p, double c, double tol,
                                 CoefficientForm form) {
    check_tol(tol);
    validate_params(p, c);
    const auto iv = search_interval(p);

    auto eval = [&](double q) { return largest_root(s, p, c, q, form); };
    const auto lo_pt = eval(iv.lo);
    const auto hi_pt = eval(iv.hi);

    auto fallback = [&](std::string why, bool degenerate) {
        auto res = golden_section_rate(s, p, c, tol, form);
        res.degenerate = degenerate;
        res.note = std::move(why);
        return res;
    };
    if (lo_pt.branch == RootBranch::degenerate) return fallback("all b_j zero; xi1 = max Delta_j", true);
    if (!lo_pt.derivative || !hi_pt.derivative) return fallback("derivative unavailable at an interval end", false);

    OptimizationResult res;
    res.method = OptimizeMethod::derivative_bisection;
    const double d_lo = *lo_pt.derivative, d_hi = *hi_pt.derivative;
    if (d_lo >= 0.0) {
        res.boundary = Boundary::lower;
        res.q_star = res.q_lo = res.q_hi = iv.lo;
        res.xi1_star = lo_pt.xi1;
        res.derivative_at_q_star = d_lo;
        res.sign_lo = res.sign_hi = sign_of(d_lo);
        return res;
    }
    if (d_hi <= 0.0) {
        res.boundary = Boundary::upper;
        res.q_star = res.q_lo = res.q_hi = iv.hi;
        res.xi1_star = hi_pt.xi1;
        res.derivative_at_q_star = d_hi;
        res.sign_lo = res.sign_hi = sign_of(d_hi);
        return res;
    }

    double a = iv.lo, b = iv.hi;
    double da = d_lo, db = d_hi;
    while (b - a > tol) {
        const double mid = 0.5 * (a + b);
        const auto pt = eval(mid);
        ++res.iterations;
        if (!pt.derivative) return fallback("derivative unavailable inside the interval", false);
        const double d = *pt.derivative;
        if (d == 0.0) {
            a = b = mid;
            da = db = 0.0;
            break;
        }
        if (d < 0.0) {
            a = mid;
            da = d;
        } else {
            b = mid;
            db = d;
        }
    }
    res.q_lo = a;
    res.q_hi = b;
    res.sign_lo = sign_of(da);
    res.sign_hi = sign_of(db);
    res.q_star = 0.5 * (a + b);
    const auto star = eval(res.q_star);
    res.xi1_star = star.xi1;
    res.derivative_at_q_star = star.derivative;
    return res;
}

namespace {

SweepRow evaluate_row(const Spectrum& s, const CorrelationParams& p, double c, double q, CoefficientForm form) {
    SweepRow row;
    row.q = q;
    try {
        row.point = largest_root(s, p, c, q, form);
        if (row.point->derivative) row.trend = sign_of(*row.point->derivative);
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

void attach_convexity(SweepTable& t) {
    std::vector<double> q, y;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (!t.rows[i].point) continue;
        q.push_back(t.rows[i].q);
        y.push_back(t.rows[i].point->xi1);
        idx.push_back(i);
    }
    if (q.size() < 3) return;
    for (auto v : convexity_probe(q, y).violations) t.rows[idx[v]].convexity_ok = false;
}

void check_grid(const std::vector<double>& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(g[i] > 0.0 && g[i] < 1.0)) throw ValidationError("q_grid", "grid values must lie in (0,1)");
        if (i && !(g[i] > g[i - 1])) throw ValidationError("q_grid", "grid must be strictly increasing");
    }
}

} // namespace

SweepTable sweep(const Spectrum& s, const CorrelationParams& p, double c, const std::vector<double>& q_grid,
                 CoefficientForm form) {
    check_grid(q_grid);
    SweepTable t;
    t.rows.resize(q_grid.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(q_grid.size()); ++i)
        t.rows[static_cast<std::size_t>(i)] = evaluate_row(s, p, c, q_grid[static_cast<std::size_t>(i)], form);
    attach_convexity(t);
    return t;
}

namespace serial {
SweepTable sweep(const Spectrum& s, const CorrelationParams& p, double c, const std::vector<double>& q_grid,
                 CoefficientForm form) {
    check_grid(q_grid);
    SweepTable t;
    for (double q : q_grid) t.rows.push_back(evaluate_row(s, p, c, q, form));
    attach_convexity(t);
    return t;
}
} // namespace serial

std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
    std::vector<double> g;
    if (points == 0) return g;
    if (points == 1) return {lo};
    g.reserve(points);
    for (std::size_t i = 0; i < points; ++i)
        g.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
    return g;
}

ConvexityReport convexity_probe(const std::vector<double>& q, const std::vector<double>& y) {
    if (q.size() != y.size() || q.size() < 3)
        throw std::invalid_argument("convexity_probe needs at least 3 matching points");
    ConvexityReport rep;
    rep.min_second_difference = INFINITY;
    for (std::size_t i = 1; i + 1 < q.size(); ++i) {
        const double hl = q[i] - q[i - 1], hr = q[i + 1] - q[i];
        const double d = 2.0 * (hr * y[i - 1] + hl * y[i + 1] - (hl + hr) * y[i]) / (hl + hr);
        rep.min_second_difference = std::min(rep.min_second_difference, d);
        if (d < -1e-9) rep.violations.push_back(i);
    }
    return rep;
}

ConvexityReport convexity_probe(const SweepTable& table) {
    std::vector<double> q, y;
    for (const auto& r : table.rows) {
        if (!r.point) continue;
        q.push_back(r.q);
        y.push_back(r.point->xi1);
    }
    return convexity_probe(q, y);
}

} // namespace pushsum
