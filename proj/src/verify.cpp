#include "pushsum/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "pushsum/io.hpp"
#include "pushsum/optimizer.hpp"
#include "pushsum/phi.hpp"
#include "pushsum/simulator.hpp"

namespace pushsum {

bool VerifyReport::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::vector<std::string> VerifyReport::failing() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
        if (!c.passed) out.push_back(c.name);
    return out;
}

std::vector<VerifyInstance> builtin_instances() {
    std::vector<VerifyInstance> out;

    auto k3 = graphs::complete(3);
    auto k3mix = build_mixing_matrix(k3, MixingMode::row_stochastic_regular);
    CorrelationParams hand;
    hand.q = 0.2;
    hand.r = 0.5;
    out.push_back({"K3", k3, k3mix, hand, CoefficientForm::theorem, false});

    auto c6 = graphs::ring(6);
    auto c6mix = build_mixing_matrix(c6, MixingMode::row_stochastic_regular);
    auto bc = analytic_protocol_params({ProtocolKind::broadcast, 0.25, 0}, c6mix, 0.3);
    out.push_back({"C6-broadcast", c6, c6mix, bc, CoefficientForm::moment_exact, true});

    auto pg = graphs::petersen();
    auto pmix = build_mixing_matrix(pg, MixingMode::row_stochastic_regular);
    auto uc = analytic_protocol_params({ProtocolKind::unicast, 0.5, 0}, pmix, 0.5);
    out.push_back({"Petersen-unicast", pg, pmix, uc, CoefficientForm::theorem, true});
    return out;
}

namespace {

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
}

std::vector<double> probe_grid(const CorrelationParams& p, std::size_t points) {
    const auto iv = search_interval(p);
    return linear_grid(std::max(0.02, iv.lo), std::min(0.98, iv.hi), points);
}

double max_real_eigenvalue(const Matrix& m) {
    if (m.rows() == 0) return -INFINITY;
    Eigen::EigenSolver<Matrix> es(m, false);
    double best = -INFINITY;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const auto z = es.eigenvalues()(i);
        if (std::abs(z.imag()) <= 1e-9 * std::max(1.0, std::abs(z.real()))) best = std::max(best, z.real());
    }
    return best;
}

CheckResult check_companion(const VerifyInstance& in, const Spectrum& s, const VerifyOptions& opts) {
    CheckResult r{in.name + "/companion", true, 0.0, ""};
    RootOptions ro;
    ro.merge_tolerance = opts.merge_tolerance;
    for (double q : probe_grid(in.params, 9)) {
        const auto coeffs = secular_coefficients(s, in.params, in.mix.c, q, in.form);
        const double root = largest_root(coeffs, ro).xi1;
        const double eig = max_real_eigenvalue(companion_matrix(coeffs));
        const double err = std::abs(root - eig);
        r.value = std::max(r.value, err);
        if (!(err <= 1e-10)) {
            r.passed = false;
            r.detail = "q=" + fmt(q) + " root " + format_real(root) + " vs eigenvalue " + format_real(eig);
        }
    }
    return r;
}

CheckResult check_recursion(const VerifyInstance& in, const Spectrum& s) {
    CheckResult r{in.name + "/trace-recursion", true, 0.0, ""};
    const auto hom = check_homogeneity(in.graph);
    if (hom.recursion_approximate || !in.mix.row_stochastic()) {
        r.detail = "skipped: recursion needs a vertex-transitive graph with row-stochastic P";
        return r;
    }
    const std::size_t steps = 30;
    const auto traj = iterate_phi(make_phi_model(in.mix, in.params), steps, {false, 0, {}});
    // The operator's own algebra yields the exact coefficient form.
    const auto coeffs = secular_coefficients(s, in.params, in.mix.c, in.params.q, CoefficientForm::moment_exact);
    const auto mu = eigen_recursion(coeffs, initial_mu(in.graph.n()), steps);
    for (std::size_t t = 0; t <= steps; ++t) {
        const double a = traj.trace[t], b = mu.trace(t);
        const double rel = std::abs(a - b) / std::max(std::abs(b), 1e-300);
        r.value = std::max(r.value, rel);
        if (!(rel <= 1e-8)) {
            r.passed = false;
            r.detail = "t=" + std::to_string(t) + " trace " + format_real(a) + " vs " + format_real(b);
            break;
        }
    }
    return r;
}

CheckResult check_properties(const VerifyInstance& in, const VerifyOptions& opts) {
    CheckResult r{in.name + "/phi-properties", true, 0.0, ""};
    if (!in.realizable) {
        r.detail = "skipped: parameters not derived from a protocol";
        return r;
    }
    const auto rep = check_phi_properties(make_phi_model(in.mix, in.params), opts.property_trials, opts.seed);
    r.value = static_cast<double>(rep.failures.size());
    r.passed = rep.ok();
    if (!rep.ok()) r.detail = rep.failures.front().property + " in trial " + std::to_string(rep.failures.front().trial);
    return r;
}

CheckResult check_convexity(const VerifyInstance& in, const Spectrum& s) {
    CheckResult r{in.name + "/convexity", true, 0.0, ""};
    if (in.params.alpha < 0.0) {
        r.detail = "skipped: alpha < 0";
        return r;
    }
    const auto table = sweep(s, in.params, in.mix.c, probe_grid(in.params, 64), in.form);
    std::vector<double> q, y;
    for (const auto& row : table.rows) {
        if (!row.point) {
            r.passed = false;
            r.detail = "q=" + fmt(row.q) + ": " + row.error;
            return r;
        }
        q.push_back(row.q);
        y.push_back(row.point->xi1);
    }
    const auto rep = convexity_probe(q, y);
    r.value = rep.min_second_difference;
    if (!rep.ok()) {
        r.passed = false;
        r.detail = std::to_string(rep.violations.size()) + " second-difference violations";
        return r;
    }
    if (s.values.minCoeff() > -1.0 + 1e-12) {
        const auto slopes = endpoint_slopes(s, in.params, in.mix.c, in.form);
        for (std::size_t i = 0; i < q.size(); ++i)
            if (y[i] < slopes.tangent_lower(q[i]) - 1e-12) {
                r.passed = false;
                r.detail = "tangent bound fails at q=" + fmt(q[i]);
                return r;
            }
    }
    return r;
}

CheckResult check_gradient(const VerifyInstance& in, const Spectrum& s) {
    CheckResult r{in.name + "/gradient", true, 0.0, ""};
    const double h = 1e-5;
    for (double q : probe_grid(in.params, 7)) {
        const auto pt = largest_root(s, in.params, in.mix.c, q, in.form);
        if (!pt.derivative) continue;
        const double fd = (largest_root(s, in.params, in.mix.c, q + h, in.form).xi1 -
                           largest_root(s, in.params, in.mix.c, q - h, in.form).xi1) /
                          (2 * h);
        const double err = std::abs(fd - *pt.derivative);
        r.value = std::max(r.value, err);
        if (!(err <= 1e-6)) {
            r.passed = false;
            r.detail = "q=" + fmt(q) + " derivative " + format_real(*pt.derivative) + " vs difference " + format_real(fd);
        }
    }
    return r;
}

std::vector<CheckResult> check_timing() {
    using clock = std::chrono::steady_clock;
    const auto g = graphs::ring(120);
    CorrelationParams p;
    p.q = 0.5;
    p.r = 1.0;
    p.alpha = 0.25;

    const auto t0 = clock::now();
    const auto mix = build_mixing_matrix(g, MixingMode::row_stochastic_regular);
    const auto s = symmetric_eigen(mix);
    const auto pt = largest_root(s, p, mix.c, p.q);
    const auto t1 = clock::now();
    const auto table = sweep(s, p, mix.c, linear_grid(0.005, 0.995, 200));
    const auto t2 = clock::now();
    (void)pt;
    (void)table;

    const double bound_s = std::chrono::duration<double>(t1 - t0).count();
    const double sweep_s = std::chrono::duration<double>(t2 - t1).count();
    return {{"ring120/bound-time", bound_s < 0.1, bound_s, fmt(bound_s * 1e3) + " ms (limit 100 ms)"},
            {"ring120/sweep-time", sweep_s < 1.0, sweep_s, fmt(sweep_s * 1e3) + " ms (limit 1000 ms)"}};
}

CheckResult guarded(const std::string& name, const std::function<CheckResult()>& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        return {name, false, 0.0, e.what()};
    }
}

} // namespace

VerifyReport run_verify(const std::vector<VerifyInstance>& instances, const VerifyOptions& opts) {
    VerifyReport rep;
    for (const auto& in : instances) {
        Spectrum s;
        try {
            validate_params(in.params, in.mix.c, in.mix.two_valued());
            s = symmetric_eigen(in.mix);
        } catch (const std::exception& e) {
            rep.checks.push_back({in.name + "/setup", false, 0.0, e.what()});
            continue;
        }
        rep.checks.push_back(guarded(in.name + "/companion", [&] { return check_companion(in, s, opts); }));
        rep.checks.push_back(guarded(in.name + "/trace-recursion", [&] { return check_recursion(in, s); }));
        rep.checks.push_back(guarded(in.name + "/phi-properties", [&] { return check_properties(in, opts); }));
        rep.checks.push_back(guarded(in.name + "/convexity", [&] { return check_convexity(in, s); }));
        rep.checks.push_back(guarded(in.name + "/gradient", [&] { return check_gradient(in, s); }));
    }
    if (opts.timing)
        for (auto& c : check_timing()) rep.checks.push_back(std::move(c));
    return rep;
}

} // namespace pushsum
