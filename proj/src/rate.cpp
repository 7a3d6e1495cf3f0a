#include "pushsum/rate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace pushsum {

namespace {

std::string fmt(double x) {
    std::ostringstream ss;
    ss.precision(6);
    ss << x;
    return ss.str();
}

std::string join_violations(const std::vector<ConstraintViolation>& v) {
    std::string s = "parameter validation failed:";
    for (const auto& e : v) s += " [" + e.name + ": " + e.detail + "]";
    return s;
}

} // namespace

ValidationError::ValidationError(std::vector<ConstraintViolation> v)
    : std::runtime_error(join_violations(v)), violations_(std::move(v)) {}

ValidationError::ValidationError(std::string name, std::string detail)
    : ValidationError(std::vector<ConstraintViolation>{{std::move(name), std::move(detail)}}) {}

std::vector<ConstraintViolation> check_params(const CorrelationParams& p, double c, bool two_valued_mixing) {
    std::vector<ConstraintViolation> out;
    auto add = [&](std::string name, std::string detail) { out.push_back({std::move(name), std::move(detail)}); };

    if (!(p.q >= 0.0 && p.q <= 1.0)) add("q in [0,1]", "q = " + fmt(p.q));
    if (!(p.r > 0.0) || !std::isfinite(p.r)) add("r>0", "r = " + fmt(p.r));
    if (!(p.u > 0.0) || !std::isfinite(p.u)) add("u>0", "u = " + fmt(p.u));
    if (!(p.alpha >= 0.0)) add("alpha>=0", "alpha = " + fmt(p.alpha));
    if (!std::isfinite(p.beta)) add("beta finite", "beta = " + fmt(p.beta));
    if (!(c >= 0.0 && c <= 1.0) || (p.beta != 0.0 && c == 0.0)) add("c in (0,1]", "c = " + fmt(c));
    if (p.beta != 0.0 && !two_valued_mixing)
        add("beta!=0 needs {0,c} mixing", "beta = " + fmt(p.beta) + " with a weighted mixing matrix");
    // Relative slack: realizable broadcast moments sit exactly on this boundary.
    if (p.beta * c > p.r * p.r * (1.0 + 1e-12)) add("beta*c<=r^2", fmt(p.beta * c) + " > " + fmt(p.r * p.r));
    if (p.u > 0.0 && !(p.q * std::sqrt(p.u) < 1.0)) add("q*sqrt(u)<1", "q*sqrt(u) = " + fmt(p.q * std::sqrt(p.u)));
    if (p.beta - p.alpha < -1.0) add("beta-alpha>=-1", "beta-alpha = " + fmt(p.beta - p.alpha));

    // b_j / (1 - lambda_j) is affine in x = 1 - lambda_j on [0, 2]; both ends must be >= 0.
    const double r2 = p.r * p.r;
    const double at0 = 2.0 * r2 - p.beta * c;
    const double at2 = 2.0 * (p.beta - p.alpha) - p.beta * c + 2.0 * r2;
    if (std::min(at0, at2) < 0.0)
        add("b_j>=0", "need 2r^2 >= 2(alpha-beta) + beta*c; got " + fmt(2.0 * r2) + " < " +
                          fmt(2.0 * (p.alpha - p.beta) + p.beta * c));

    for (std::size_t i = 0; i < p.node_q.size(); ++i) {
        const double qi = p.node_q[i];
        if (!(qi >= 0.0 && qi <= 1.0) || (p.u > 0.0 && !(qi * std::sqrt(p.u) < 1.0)))
            add("node_q", "q_" + std::to_string(i) + " = " + fmt(qi));
    }
    for (std::size_t i = 0; i < p.node_r.size(); ++i)
        if (!(p.node_r[i] > 0.0)) add("node_r", "r_" + std::to_string(i) + " = " + fmt(p.node_r[i]));
    return out;
}

const CorrelationParams& validate_params(const CorrelationParams& p, double c, bool two_valued_mixing) {
    auto v = check_params(p, c, two_valued_mixing);
    if (!v.empty()) throw ValidationError(std::move(v));
    return p;
}

std::string to_string(CoefficientForm f) { return f == CoefficientForm::theorem ? "theorem" : "moment-exact"; }

CoefficientForm parse_coefficient_form(const std::string& name) {
    if (name == "theorem") return CoefficientForm::theorem;
    if (name == "moment-exact" || name == "exact") return CoefficientForm::moment_exact;
    throw ValidationError("b-form", "unknown coefficient form '" + name + "'");
}

SecularCoefficients secular_coefficients(const Spectrum& s, const CorrelationParams& p, double c, double q,
                                         CoefficientForm form) {
    const auto n = s.n();
    SecularCoefficients out;
    out.lambda = s.values;
    out.delta.resize(static_cast<Eigen::Index>(n));
    out.delta_slope.resize(static_cast<Eigen::Index>(n));
    out.b.resize(static_cast<Eigen::Index>(n));
    out.q = q;
    out.n = n;
    const double su = std::sqrt(p.u);
    const double beta_c = (form == CoefficientForm::theorem ? 1.0 : 2.0) * p.beta * c;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n); ++j) {
        const double x = 1.0 - s.values(j);
        out.delta(j) = 1.0 - 2.0 * q * su * x + p.alpha * q * q * x * x;
        out.delta_slope(j) = -2.0 * su * x + 2.0 * p.alpha * q * x * x;
        out.b(j) = x * ((p.beta - p.alpha) * x - beta_c + 2.0 * p.r * p.r);
    }
    return out;
}

double secular_value(double xi, const SecularCoefficients& k) {
    double sum = 0.0;
    for (std::size_t j = 1; j < k.n; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (k.b(jj) == 0.0) continue;
        const double d = xi - k.delta(jj);
        if (std::abs(d) < 1e-300) throw NumericalError("secular_value: xi coincides with a pole");
        sum += k.b(jj) / d;
    }
    return 1.0 - k.q * k.q / static_cast<double>(k.n) * sum;
}

double secular_slope(double xi, const SecularCoefficients& k) {
    double sum = 0.0;
    for (std::size_t j = 1; j < k.n; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (k.b(jj) == 0.0) continue;
        const double d = xi - k.delta(jj);
        if (std::abs(d) < 1e-300) throw NumericalError("secular_slope: xi coincides with a pole");
        sum += k.b(jj) / (d * d);
    }
    return k.q * k.q / static_cast<double>(k.n) * sum;
}

Matrix companion_matrix(const SecularCoefficients& k) {
    const auto m = static_cast<Eigen::Index>(k.n) - 1;
    Matrix out = Matrix::Zero(m, m);
    const double scale = k.q * k.q / static_cast<double>(k.n);
    for (Eigen::Index i = 0; i < m; ++i) {
        out.row(i).setConstant(scale * k.b(i + 1));
        out(i, i) += k.delta(i + 1);
    }
    return out;
}

namespace {

struct Cluster {
    double delta;  // largest Delta in the cluster
    double weight; // (q^2/N) * sum of b
    double slope;  // largest Delta' among members at the top value
    std::size_t count;
};

// Clusters of Delta_j, j > 1, in descending order.
std::vector<Cluster> build_clusters(const SecularCoefficients& k, double merge_tol) {
    std::vector<std::size_t> idx(k.n - 1);
    std::iota(idx.begin(), idx.end(), std::size_t{1});
    auto at = [&](const Vector& v, std::size_t j) { return v(static_cast<Eigen::Index>(j)); };
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return at(k.delta, a) > at(k.delta, b); });

    const double scale = k.q * k.q / static_cast<double>(k.n);
    std::vector<Cluster> out;
    for (auto j : idx) {
        const double d = at(k.delta, j);
        const double w = scale * std::max(at(k.b, j), 0.0);
        if (!out.empty() && out.back().delta - d <= merge_tol) {
            out.back().weight += w;
            ++out.back().count;
            if (out.back().delta == d) out.back().slope = std::max(out.back().slope, at(k.delta_slope, j));
        } else {
            out.push_back({d, w, at(k.delta_slope, j), 1});
        }
    }
    return out;
}

// sigma expressed in the gap s = xi - anchor, over the weighted clusters.
struct GapSecular {
    const std::vector<const Cluster*>& poles;
    double anchor;

    double value(double s) const {
        double sum = 0.0;
        for (const auto* p : poles) sum += p->weight / (s + (anchor - p->delta));
        return 1.0 - sum;
    }
    double slope(double s) const {
        double sum = 0.0;
        for (const auto* p : poles) {
            const double d = s + (anchor - p->delta);
            sum += p->weight / (d * d);
        }
        return sum;
    }
};

struct GapRoot {
    double gap;
    int bisections;
    int newtons;
};

// Root of sigma on gap interval (0, hi): sigma -> -inf at 0+ and sigma(hi) > 0.
GapRoot solve_gap(const GapSecular& f, double hi) {
    double lo = 0.0;
    GapRoot r{0.0, 0, 0};
    // Bisection down to relative width 1e-12 in the gap (absolute 1e-12 at unit scale).
    while (hi - lo > 1e-12 * std::min(1.0, hi) && hi > 1e-300) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (f.value(mid) < 0.0) lo = mid;
        else hi = mid;
        ++r.bisections;
    }
    double s = 0.5 * (lo + hi);
    for (int it = 0; it < 5; ++it) {
        const double v = f.value(s);
        if (std::abs(v) <= 1e-14) break;
        if (v < 0.0) lo = s;
        else hi = s;
        double next = s - v / f.slope(s);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        s = next;
        ++r.newtons;
    }
    r.gap = s;
    return r;
}

} // namespace

RatePoint largest_root(const SecularCoefficients& k, const RootOptions& opts) {
    if (k.n < 2) throw NumericalError("largest_root: need at least two nodes");
    const double bscale = std::max(1.0, k.b.cwiseAbs().maxCoeff());
    for (std::size_t j = 1; j < k.n; ++j) {
        const double bj = k.b(static_cast<Eigen::Index>(j));
        if (bj < -1e-12 * bscale)
            throw ValidationError("b_j>=0", "b_" + std::to_string(j + 1) + " = " + fmt(bj) + " at lambda = " +
                                                  fmt(k.lambda(static_cast<Eigen::Index>(j))));
    }

    RatePoint pt;
    pt.q = k.q;
    const auto clusters = build_clusters(k, opts.merge_tolerance);
    std::vector<const Cluster*> poles;
    for (const auto& c : clusters)
        if (c.weight > 0.0) poles.push_back(&c);

    double max_silent = -std::numeric_limits<double>::infinity();
    for (const auto& c : clusters)
        if (c.weight == 0.0) max_silent = std::max(max_silent, c.delta);

    if (poles.empty()) {
        pt.branch = RootBranch::degenerate;
        pt.xi1 = clusters.front().delta;
        pt.anchor = pt.xi1;
        pt.gap = 0.0;
    } else {
        GapSecular f{poles, poles.front()->delta};
        double total = 0.0;
        for (const auto* p : poles) total += p->weight;
        const auto root = solve_gap(f, total + 1.0);
        pt.bisection_steps = root.bisections;
        pt.newton_steps = root.newtons;
        pt.anchor = f.anchor;
        pt.gap = root.gap;
        pt.xi1 = f.anchor + root.gap;
        pt.branch = RootBranch::secular;
        if (max_silent > pt.xi1) {
            pt.branch = RootBranch::pole;
            pt.xi1 = max_silent;
            pt.anchor = max_silent;
            pt.gap = 0.0;
        }
    }

    // Every eigenvalue of the companion matrix is real and lies in [min Delta, xi1],
    // so only the smallest one can compete with xi1 for the spectral radius.
    const double min_delta = clusters.back().delta;
    double min_eig = pt.xi1;
    if (min_delta < -std::abs(pt.xi1)) {
        for (const auto& c : clusters) {
            const std::size_t leftover = c.weight > 0.0 ? c.count - 1 : c.count;
            if (leftover > 0) min_eig = std::min(min_eig, c.delta);
        }
        if (poles.size() >= 2) {
            const Cluster* low = poles.back();
            const Cluster* next = poles[poles.size() - 2];
            GapSecular g{poles, low->delta};
            // sigma on (low, next): -inf -> +inf; reuse the gap solver on that window.
            double lo = 0.0, hi = next->delta - low->delta;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(low->delta)); ++it) {
                const double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                if (g.value(mid) < 0.0) lo = mid;
                else hi = mid;
            }
            min_eig = std::min(min_eig, low->delta + 0.5 * (lo + hi));
        }
    }
    pt.spectral_radius = std::max(std::abs(pt.xi1), std::abs(min_eig));

    pt.warning = !(pt.xi1 > 0.0 && pt.xi1 <= 1.0);
    if (!pt.warning) pt.gamma_half = 0.5 * std::log(pt.xi1);

    try {
        pt.derivative = xi_derivative(pt, k);
    } catch (const NumericalError&) {
        pt.derivative.reset();
    }
    return pt;
}

RatePoint largest_root(const Spectrum& s, const CorrelationParams& p, double c, double q, CoefficientForm form,
                       const RootOptions& opts) {
    auto k = secular_coefficients(s, p, c, q, form);
    return largest_root(k, opts);
}

double xi_derivative(const RatePoint& pt, const SecularCoefficients& k) {
    if (k.n < 2) throw NumericalError("xi_derivative: need at least two nodes");
    auto idx = [](std::size_t j) { return static_cast<Eigen::Index>(j); };

    if (k.q == 0.0 || pt.branch != RootBranch::secular) {
        // Right derivative of max_j Delta_j: steepest ascent among the maximisers.
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 1; j < k.n; ++j) top = std::max(top, k.delta(idx(j)));
        double slope = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 1; j < k.n; ++j)
            if (top - k.delta(idx(j)) <= 1e-13) slope = std::max(slope, k.delta_slope(idx(j)));
        return slope;
    }

    if (!(pt.gap >= 1e-13))
        throw NumericalError("xi_derivative: root separation " + fmt(pt.gap) + " below 1e-13");
    double s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t j = 1; j < k.n; ++j) {
        const double b = k.b(idx(j));
        if (b <= 0.0) continue;
        const double d = pt.gap + (pt.anchor - k.delta(idx(j)));
        s1 += b / d;
        s2 += b / (d * d);
        s3 += b * k.delta_slope(idx(j)) / (d * d);
    }
    const double q = k.q;
    return (2.0 * q * s1 + q * q * s3) / (q * q * s2);
}

EndpointSlopes endpoint_slopes(const Spectrum& s, const CorrelationParams& p, double c, CoefficientForm form) {
    const auto n = s.n();
    if (n < 2) throw NumericalError("endpoint_slopes: need at least two nodes");
    if (!(s.values(static_cast<Eigen::Index>(n) - 1) > -1.0 + 1e-12))
        throw ValidationError("lambda_j>-1", "smallest eigenvalue " + fmt(s.values(static_cast<Eigen::Index>(n) - 1)));

    EndpointSlopes out;
    out.extrapolated = p.u != 1.0;
    out.at_zero = -2.0 * std::sqrt(p.u) * (1.0 - s.values(1));

    const auto k = secular_coefficients(s, p, c, 1.0, form);
    double s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (k.b(jj) <= 0.0) continue;
        const double d = 1.0 - k.delta(jj);
        if (d == 0.0) throw NumericalError("endpoint_slopes: Delta_j(1) = 1 makes the q=1 slope undefined");
        s1 += k.b(jj) / d;
        s2 += k.b(jj) / (d * d);
        s3 += k.b(jj) * k.delta_slope(jj) / (d * d);
    }
    out.at_one = s2 > 0.0 ? (2.0 * s1 + s3) / s2 : 0.0;
    return out;
}

bool delta_argmax_check(const Spectrum& s, const CorrelationParams& p) {
    const auto n = static_cast<double>(s.n());
    if (n < 2) return true;
    return p.alpha <= 2.0 * std::sqrt(p.u) / (3.0 + 1.0 / (n - 1.0));
}

} // namespace pushsum
