#include "pushsum/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace pushsum {

std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

Json json_real(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
Json json_real(const std::optional<double>& v) { return v ? json_real(*v) : Json(nullptr); }

std::string to_string(RootBranch b) {
    switch (b) {
    case RootBranch::secular: return "secular";
    case RootBranch::pole: return "pole";
    case RootBranch::degenerate: return "degenerate";
    }
    return "?";
}

Json to_json(const CorrelationParams& p) {
    Json j{{"q", json_real(p.q)},         {"r", json_real(p.r)}, {"alpha", json_real(p.alpha)},
           {"beta", json_real(p.beta)},   {"u", json_real(p.u)}};
    if (!p.node_q.empty()) j["node_q"] = p.node_q;
    if (!p.node_r.empty()) j["node_r"] = p.node_r;
    return j;
}

Json to_json(const RatePoint& pt) {
    return Json{{"q", json_real(pt.q)},
                {"xi1", json_real(pt.xi1)},
                {"gamma_half", json_real(pt.gamma_half)},
                {"derivative", json_real(pt.derivative)},
                {"spectral_radius", json_real(pt.spectral_radius)},
                {"branch", to_string(pt.branch)},
                {"warning", pt.warning}};
}

Json to_json(const OptimizationResult& r) {
    return Json{{"q_star", json_real(r.q_star)},
                {"xi1_star", json_real(r.xi1_star)},
                {"gamma_half", r.xi1_star > 0.0 && r.xi1_star <= 1.0 ? json_real(0.5 * std::log(r.xi1_star))
                                                                      : Json(nullptr)},
                {"derivative", json_real(r.derivative_at_q_star)},
                {"certificate",
                 {{"q_lo", json_real(r.q_lo)}, {"q_hi", json_real(r.q_hi)}, {"sign_lo", r.sign_lo}, {"sign_hi", r.sign_hi}}},
                {"boundary", to_string(r.boundary)},
                {"method", to_string(r.method)},
                {"iterations", r.iterations},
                {"degenerate", r.degenerate},
                {"note", r.note}};
}

Json to_json(const SweepTable& t) {
    Json rows = Json::array();
    for (const auto& r : t.rows) {
        Json row{{"q", json_real(r.q)}};
        if (r.point) {
            row["xi1"] = json_real(r.point->xi1);
            row["gamma_half"] = json_real(r.point->gamma_half);
            row["derivative"] = json_real(r.point->derivative);
        } else {
            row["xi1"] = row["gamma_half"] = row["derivative"] = nullptr;
        }
        row["convexity_flag"] = r.convexity_ok;
        row["trend"] = r.trend;
        if (!r.error.empty()) row["error"] = r.error;
        rows.push_back(std::move(row));
    }
    return rows;
}

Json to_json(const MomentEstimate& m) {
    return Json{{"samples", m.samples},
                {"u_hat", json_real(m.u_hat)},
                {"u_se", json_real(m.u_se)},
                {"r2_hat", json_real(m.r2_hat)},
                {"r2_se", json_real(m.r2_se)},
                {"alpha_hat", json_real(m.alpha_hat)},
                {"alpha_se", json_real(m.alpha_se)},
                {"beta_hat", json_real(m.beta_hat)},
                {"beta_se", m.beta_hat ? json_real(m.beta_se) : Json(nullptr)},
                {"residual", json_real(m.residual)},
                {"residual_max_z", json_real(m.residual_max_z)}};
}

void write_rate_csv(std::ostream& out, const RatePoint& pt) {
    out << "q,xi1,gamma_half,derivative,spectral_radius,branch,warning\n"
        << format_real(pt.q) << ',' << format_real(pt.xi1) << ',' << format_real(pt.gamma_half) << ','
        << format_real(pt.derivative) << ',' << format_real(pt.spectral_radius) << ',' << to_string(pt.branch) << ','
        << (pt.warning ? 1 : 0) << '\n';
}

void write_optimize_csv(std::ostream& out, const OptimizationResult& r) {
    out << "q_star,xi1_star,derivative,q_lo,q_hi,sign_lo,sign_hi,boundary,method,iterations,degenerate\n"
        << format_real(r.q_star) << ',' << format_real(r.xi1_star) << ',' << format_real(r.derivative_at_q_star)
        << ',' << format_real(r.q_lo) << ',' << format_real(r.q_hi) << ',' << r.sign_lo << ',' << r.sign_hi << ','
        << to_string(r.boundary) << ',' << to_string(r.method) << ',' << r.iterations << ','
        << (r.degenerate ? 1 : 0) << '\n';
}

void write_sweep_csv(std::ostream& out, const SweepTable& t) {
    out << "q,xi1,gamma_half,derivative,convexity_flag\n";
    for (const auto& r : t.rows) {
        out << format_real(r.q) << ',';
        if (r.point)
            out << format_real(r.point->xi1) << ',' << format_real(r.point->gamma_half) << ','
                << format_real(r.point->derivative);
        else
            out << ",,";
        out << ',' << (r.convexity_ok ? 1 : 0) << '\n';
    }
}

void write_run_csv_header(std::ostream& out) { out << "run,t,error,log_error,sum_x,sum_w,min_w\n"; }

void write_run_csv(std::ostream& out, std::size_t run_index, const PushSumRun& run, std::size_t stride) {
    if (stride == 0) stride = 1;
    const std::size_t n = run.log_error.size();
    for (std::size_t t = 0; t < n; ++t) {
        if (t % stride != 0 && t + 1 != n) continue;
        const double le = run.log_error[t];
        out << run_index << ',' << t << ',' << (std::isnan(le) ? std::string() : format_real(std::exp(le))) << ','
            << (std::isnan(le) ? std::string() : format_real(le)) << ',' << format_real(run.sum_x[t]) << ','
            << format_real(run.sum_w[t]) << ',' << format_real(run.min_w[t]) << '\n';
    }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw IoError("write to '" + path + "' failed");
}

} // namespace pushsum
