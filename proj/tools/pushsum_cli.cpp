// pushsum: rate bounds, q tuning, sweeps, protocol simulation and self-checks.
//
// Exit codes: 0 ok, 1 invalid input, 2 I/O, 3 bound outside (0,1], 4 verify failure.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pushsum/graph.hpp"
#include "pushsum/io.hpp"
#include "pushsum/optimizer.hpp"
#include "pushsum/rate.hpp"
#include "pushsum/simulator.hpp"
#include "pushsum/verify.hpp"

using namespace pushsum;

namespace {

enum Exit { ok = 0, invalid = 1, io_failure = 2, bound_warning = 3, verify_failure = 4 };

struct Config {
    std::string graph;
    std::string graph_format = "edge-list";
    std::string mixing = "row-stochastic";
    std::optional<double> c;
    std::optional<double> q;
    double r = 1.0;
    double alpha = 0.0;
    double beta = 0.0;
    double u = 1.0;
    std::uint64_t seed = 1;
    std::string output = "csv";
    std::string out;
    std::string b_form = "theorem";

    double tol = 1e-8;
    bool verify_grid = false;

    double grid_lo = 0.05;
    double grid_hi = 0.95;
    double grid_step = 0.05;
    std::size_t grid_points = 0;

    std::string protocol = "broadcast";
    std::optional<double> w;
    std::size_t runs = 32;
    std::size_t steps = 10000;
    double window = 0.5;
    std::size_t samples = 100000;
    std::size_t stride = 1;

    double inject_merge_tol = 1e-13;
    bool no_timing = false;
};

struct Instance {
    Graph graph;
    MixingMatrix mix;
};

Instance load_instance(const Config& cfg) {
    if (cfg.graph.empty()) throw ValidationError("graph", "--graph is required for this command");
    const auto format = parse_graph_format(cfg.graph_format);
    const auto mode = parse_mixing_mode(cfg.mixing);
    auto g = load_graph_file(cfg.graph, format);
    if (mode != MixingMode::weighted) {
        auto mix = build_mixing_matrix(g, mode, cfg.c);
        return {std::move(g), std::move(mix)};
    }
    if (format != GraphFormat::adjacency) throw ValidationError("mixing", "weighted mixing needs --graph-format adjacency");
    std::ifstream f(cfg.graph);
    if (!f) throw IoError("cannot open '" + cfg.graph + "'");
    auto mix = mixing_from_weights(read_dense_matrix(f));
    return {std::move(g), std::move(mix)};
}

CorrelationParams params_of(const Config& cfg) {
    CorrelationParams p;
    p.q = cfg.q.value_or(0.0);
    p.r = cfg.r;
    p.alpha = cfg.alpha;
    p.beta = cfg.beta;
    p.u = cfg.u;
    return p;
}

bool json_out(const Config& cfg) { return cfg.output == "json"; }

Json header(const std::string& command, const Config& cfg, const Instance& in) {
    return Json{{"command", command},
                {"seed", cfg.seed},
                {"graph", {{"path", cfg.graph}, {"n", in.graph.n()}, {"mixing", to_string(in.mix.mode)}, {"c", json_real(in.mix.c)}}},
                {"b_form", cfg.b_form}};
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

int cmd_rate(const Config& cfg) {
    if (!cfg.q) throw ValidationError("q", "--q is required for rate");
    const auto in = load_instance(cfg);
    const auto p = params_of(cfg);
    validate_params(p, in.mix.c, in.mix.two_valued());
    const auto form = parse_coefficient_form(cfg.b_form);
    const auto pt = largest_root(symmetric_eigen(in.mix), p, in.mix.c, *cfg.q, form);

    if (json_out(cfg)) {
        auto j = header("rate", cfg, in);
        j["params"] = to_json(p);
        j["extrapolated"] = p.u != 1.0;
        j["result"] = to_json(pt);
        write_output(cfg.out, dump_json(j));
    } else {
        std::ostringstream s;
        write_rate_csv(s, pt);
        write_output(cfg.out, s.str());
    }
    if (pt.warning) {
        std::cerr << "warning: xi1 = " << format_real(pt.xi1) << " lies outside (0,1]; no rate bound\n";
        return bound_warning;
    }
    return ok;
}

// Two-level grid search, independent of the derivative.
std::pair<double, double> grid_minimum(const Spectrum& s, const CorrelationParams& p, double c, CoefficientForm form) {
    const auto iv = search_interval(p);
    auto xi = [&](double q) { return largest_root(s, p, c, q, form).xi1; };
    double lo = iv.lo, hi = iv.hi, best_q = lo, best = xi(lo);
    for (int level = 0; level < 3; ++level) {
        const auto grid = linear_grid(lo, hi, 2001);
        for (double q : grid) {
            const double v = xi(q);
            if (v < best) {
                best = v;
                best_q = q;
            }
        }
        const double h = (hi - lo) / 2000.0;
        lo = std::max(iv.lo, best_q - h);
        hi = std::min(iv.hi, best_q + h);
    }
    return {best_q, best};
}

int cmd_optimize(const Config& cfg) {
    const auto in = load_instance(cfg);
    const auto p = params_of(cfg);
    const auto form = parse_coefficient_form(cfg.b_form);
    const auto s = symmetric_eigen(in.mix);
    const auto res = minimize_rate(s, p, in.mix.c, cfg.tol, form);

    std::optional<std::pair<double, double>> grid;
    bool grid_ok = true;
    if (cfg.verify_grid) {
        grid = grid_minimum(s, p, in.mix.c, form);
        grid_ok = std::abs(grid->second - res.xi1_star) <= 1e-6;
    }
    if (json_out(cfg)) {
        auto j = header("optimize", cfg, in);
        j["params"] = to_json(p);
        j["tol"] = cfg.tol;
        j["result"] = to_json(res);
        if (grid) j["grid_check"] = {{"q", json_real(grid->first)}, {"xi1", json_real(grid->second)}, {"passed", grid_ok}};
        write_output(cfg.out, dump_json(j));
    } else {
        std::ostringstream s;
        write_optimize_csv(s, res);
        write_output(cfg.out, s.str());
    }
    if (grid) {
        std::cerr << "grid check: xi1 " << format_real(grid->second) << " at q " << format_real(grid->first)
                  << (grid_ok ? " (agrees)" : " (DISAGREES)") << '\n';
        if (!grid_ok) return verify_failure;
    }
    return ok;
}

int cmd_sweep(const Config& cfg) {
    const auto in = load_instance(cfg);
    const auto p = params_of(cfg);
    validate_params(p, in.mix.c, in.mix.two_valued());
    const auto form = parse_coefficient_form(cfg.b_form);
    if (!(cfg.grid_hi > cfg.grid_lo)) throw ValidationError("grid", "grid-hi must exceed grid-lo");
    std::size_t points = cfg.grid_points;
    if (points == 0) {
        if (!(cfg.grid_step > 0.0)) throw ValidationError("grid", "grid-step must be positive");
        points = static_cast<std::size_t>(std::llround((cfg.grid_hi - cfg.grid_lo) / cfg.grid_step)) + 1;
    }
    const auto table = sweep(symmetric_eigen(in.mix), p, in.mix.c, linear_grid(cfg.grid_lo, cfg.grid_hi, points), form);

    if (json_out(cfg)) {
        auto j = header("sweep", cfg, in);
        j["params"] = to_json(p);
        j["rows"] = to_json(table);
        write_output(cfg.out, dump_json(j));
    } else {
        std::ostringstream s;
        write_sweep_csv(s, table);
        write_output(cfg.out, s.str());
    }
    return ok;
}

int cmd_simulate(const Config& cfg) {
    if (cfg.steps < 1) throw ValidationError("steps", "--steps must be at least 1");
    if (cfg.runs < 1) throw ValidationError("runs", "--runs must be at least 1");
    if (!cfg.q) throw ValidationError("q", "--q is required for simulate");
    if (!cfg.w) throw ValidationError("w", "--w is required for simulate");
    const auto in = load_instance(cfg);
    const ProtocolSpec spec{parse_protocol(cfg.protocol), *cfg.w, cfg.seed};
    const ProtocolSampler sampler(spec, in.mix, *cfg.q);
    const auto form = parse_coefficient_form(cfg.b_form);

    std::optional<MomentEstimate> fit;
    CorrelationParams p;
    if (cfg.samples > 0) {
        fit = estimate_moments(spec, in.mix, *cfg.q, cfg.samples);
        p = fit->params();
    } else {
        p = analytic_protocol_params(spec, in.mix, *cfg.q);
    }
    validate_params(p, in.mix.c, in.mix.two_valued());
    const auto pt = largest_root(symmetric_eigen(in.mix), p, in.mix.c, *cfg.q, form);

    const bool csv = !json_out(cfg);
    const auto ens = run_ensemble(sampler, cfg.seed, cfg.runs, cfg.steps, cfg.window, csv);
    std::optional<double> margin;
    if (pt.gamma_half && std::isfinite(ens.median_slope)) margin = *pt.gamma_half - ens.median_slope;

    if (csv) {
        std::ostringstream s;
        write_run_csv_header(s);
        for (std::size_t k = 0; k < ens.runs.size(); ++k) write_run_csv(s, k, ens.runs[k], cfg.stride);
        write_output(cfg.out, s.str());
    } else {
        auto j = header("simulate", cfg, in);
        j["protocol"] = {{"kind", cfg.protocol}, {"w", *cfg.w}, {"q", *cfg.q}};
        j["runs"] = cfg.runs;
        j["steps"] = cfg.steps;
        j["window"] = cfg.window;
        j["params_source"] = fit ? "fitted" : "analytic";
        j["params"] = to_json(p);
        j["moments"] = fit ? to_json(*fit) : Json(nullptr);
        j["xi1"] = json_real(pt.xi1);
        j["bound"] = json_real(pt.gamma_half);
        Json slopes = Json::array();
        for (double v : ens.slopes) slopes.push_back(json_real(v));
        j["slopes"] = slopes;
        j["slope"] = json_real(ens.median_slope);
        j["margin"] = json_real(margin);
        write_output(cfg.out, dump_json(j));
    }
    std::cerr << "bound " << format_real(pt.gamma_half) << "  median slope " << format_real(ens.median_slope)
              << "  margin " << format_real(margin) << '\n';
    if (pt.warning) return bound_warning;
    return ok;
}

int cmd_verify(const Config& cfg) {
    auto instances = builtin_instances();
    if (!cfg.graph.empty()) {
        const auto in = load_instance(cfg);
        auto p = params_of(cfg);
        if (!cfg.q) p.q = std::min(0.5, 0.5 / std::sqrt(p.u));
        instances.push_back({"configured", in.graph, in.mix, p, parse_coefficient_form(cfg.b_form), false});
    }
    VerifyOptions opts;
    opts.seed = cfg.seed;
    opts.merge_tolerance = cfg.inject_merge_tol;
    opts.timing = !cfg.no_timing;
    const auto rep = run_verify(instances, opts);

    // Timings go to stderr so the report itself stays reproducible.
    auto is_timing = [](const CheckResult& c) { return c.name.ends_with("-time"); };
    for (const auto& c : rep.checks)
        if (is_timing(c)) std::cerr << c.name << ": " << c.detail << '\n';

    if (json_out(cfg)) {
        Json checks = Json::array();
        for (const auto& c : rep.checks) {
            Json row{{"name", c.name}, {"passed", c.passed}};
            row["value"] = is_timing(c) ? Json(nullptr) : json_real(c.value);
            row["detail"] = is_timing(c) ? std::string() : c.detail;
            checks.push_back(std::move(row));
        }
        write_output(cfg.out, dump_json(Json{{"command", "verify"}, {"seed", cfg.seed}, {"passed", rep.ok()}, {"checks", checks}}));
    } else {
        std::ostringstream s;
        s << "check,passed,value,detail\n";
        for (const auto& c : rep.checks)
            s << c.name << ',' << (c.passed ? 1 : 0) << ',' << (is_timing(c) ? std::string() : format_real(c.value)) << ','
              << csv_quote(is_timing(c) ? std::string() : c.detail) << '\n';
        write_output(cfg.out, s.str());
    }
    if (!rep.ok()) {
        std::cerr << "verify failed:";
        for (const auto& n : rep.failing()) std::cerr << ' ' << n;
        std::cerr << '\n';
        return verify_failure;
    }
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    Config cfg;
    CLI::App app{"Push-sum convergence-rate bounds"};
    app.set_config("--config", "", "flat key=value file; command-line flags take precedence");
    app.allow_config_extras(false);
    app.require_subcommand(1, 1);

    app.add_option("--graph", cfg.graph, "graph file");
    app.add_option("--graph-format", cfg.graph_format, "edge-list | adjacency")
        ->check(CLI::IsMember({"edge-list", "adjacency"}));
    app.add_option("--mixing", cfg.mixing, "row-stochastic | uniform-c | weighted")
        ->check(CLI::IsMember({"row-stochastic", "uniform-c", "uniform", "weighted"}));
    app.add_option("--c", cfg.c, "edge weight for uniform-c mixing (default 1/max degree)");
    app.add_option("--q", cfg.q, "transmission intensity");
    app.add_option("--r", cfg.r, "second-moment constant")->capture_default_str();
    app.add_option("--alpha", cfg.alpha, "cross-sender moment")->capture_default_str();
    app.add_option("--beta", cfg.beta, "same-sender moment")->capture_default_str();
    app.add_option("--u", cfg.u, "mean constant, E[c_ji] = q sqrt(u) p_ji")->capture_default_str();
    app.add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
    app.add_option("--output", cfg.output, "csv | json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    app.add_option("--out", cfg.out, "output path (default stdout)");
    app.add_option("--b-form", cfg.b_form, "theorem | moment-exact")
        ->check(CLI::IsMember({"theorem", "moment-exact", "exact"}))
        ->capture_default_str();

    app.add_option("--tol", cfg.tol, "optimize: tolerance in q")->capture_default_str();
    app.add_flag("--verify-grid", cfg.verify_grid, "optimize: cross-check against a grid search");
    app.add_option("--grid-lo", cfg.grid_lo, "sweep: first q")->capture_default_str();
    app.add_option("--grid-hi", cfg.grid_hi, "sweep: last q")->capture_default_str();
    app.add_option("--grid-step", cfg.grid_step, "sweep: spacing")->capture_default_str();
    app.add_option("--grid-points", cfg.grid_points, "sweep: number of points (overrides step)");
    app.add_option("--protocol", cfg.protocol, "simulate: broadcast | unicast")
        ->check(CLI::IsMember({"broadcast", "unicast"}))
        ->capture_default_str();
    app.add_option("--w", cfg.w, "simulate: message weight");
    app.add_option("--runs", cfg.runs, "simulate: ensemble size")->capture_default_str();
    app.add_option("--steps", cfg.steps, "simulate: steps per run")->capture_default_str();
    app.add_option("--window", cfg.window, "simulate: trailing fraction used for the slope")->capture_default_str();
    app.add_option("--samples", cfg.samples, "simulate: moment-fit samples (0 = closed-form moments)")
        ->capture_default_str();
    app.add_option("--stride", cfg.stride, "simulate: CSV row stride")->capture_default_str();
    app.add_option("--inject-merge-tol", cfg.inject_merge_tol, "verify: root-finder merge tolerance (test hook)");
    app.add_flag("--no-timing", cfg.no_timing, "verify: skip the N=120 timing checks");

    app.add_subcommand("rate", "rate bound at one q")->fallthrough();
    app.add_subcommand("optimize", "minimise the bound over q")->fallthrough();
    app.add_subcommand("sweep", "bound over a q grid")->fallthrough();
    app.add_subcommand("simulate", "Monte Carlo push-sum against the bound")->fallthrough();
    app.add_subcommand("verify", "self-check suite")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::FileError& e) {
        std::cerr << e.what() << '\n';
        return io_failure;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : invalid;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        if (cmd == "rate") return cmd_rate(cfg);
        if (cmd == "optimize") return cmd_optimize(cfg);
        if (cmd == "sweep") return cmd_sweep(cfg);
        if (cmd == "simulate") return cmd_simulate(cfg);
        return cmd_verify(cfg);
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return invalid;
    } catch (const GraphError& e) {
        std::cerr << "invalid graph: " << e.what() << '\n';
        return invalid;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return io_failure;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return io_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return invalid;
    }
}
