#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pushsum/optimizer.hpp"

using namespace pushsum;

namespace {

Spectrum spectrum_of(const Graph& g) { return symmetric_eigen(build_mixing_matrix(g, MixingMode::row_stochastic_regular)); }

CorrelationParams params(double r, double alpha, double beta, double u = 1.0) {
    CorrelationParams p;
    p.r = r;
    p.alpha = alpha;
    p.beta = beta;
    p.u = u;
    return p;
}

// Brute grid minimum of xi1 over [lo, hi].
std::pair<double, double> grid_min(const Spectrum& s, const CorrelationParams& p, double c, double lo, double hi,
                                   std::size_t points) {
    double best_q = lo, best = 2.0;
    for (std::size_t i = 0; i < points; ++i) {
        const double q = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        const double v = largest_root(s, p, c, q).xi1;
        if (v < best) {
            best = v;
            best_q = q;
        }
    }
    return {best_q, best};
}

} // namespace

TEST_CASE("monotone hand instance pins the upper end") {
    const auto s = spectrum_of(graphs::complete(3));
    const auto p = params(0.5, 0.0, 0.0);
    const auto res = minimize_rate(s, p, 0.5, 1e-8);
    const auto iv = search_interval(p);
    CHECK(res.boundary == Boundary::upper);
    CHECK(res.q_star == iv.hi);
    // xi1(q) = 1 - 3q + q^2/2 on this instance
    CHECK(std::abs(res.xi1_star - (1 - 3 * iv.hi + 0.5 * iv.hi * iv.hi)) <= 1e-12);
    REQUIRE(res.derivative_at_q_star);
    CHECK(*res.derivative_at_q_star < 0.0);
    CHECK(res.sign_hi == -1);
    CHECK(res.method == OptimizeMethod::derivative_bisection);
}

TEST_CASE("interior optima agree with a dense grid") {
    const auto s = spectrum_of(graphs::ring(6));
    const double tol = 1e-8;
    for (double r : {1.0, 1.5})
        for (double alpha : {0.0, 0.5, 1.0})
            for (double beta : {0.0, 0.5}) {
                const auto p = params(r, alpha, beta);
                CAPTURE(r);
                CAPTURE(alpha);
                CAPTURE(beta);
                const auto res = minimize_rate(s, p, 0.5, tol);
                CHECK(res.boundary == Boundary::interior);
                CHECK(res.method == OptimizeMethod::derivative_bisection);
                CHECK(res.iterations <= static_cast<std::size_t>(std::ceil(std::log2(1.0 / tol))) + 2);
                CHECK(res.q_hi - res.q_lo <= tol);
                CHECK(res.sign_lo == -1);
                CHECK(res.sign_hi == 1);
                REQUIRE(res.derivative_at_q_star);
                CHECK(std::abs(*res.derivative_at_q_star) <= 1e-5);

                const auto iv = search_interval(p);
                const auto [gq, gv] = grid_min(s, p, 0.5, iv.lo, iv.hi, 200);
                CHECK(res.xi1_star <= gv + 1e-12);
                CHECK(std::abs(res.q_star - gq) <= (iv.hi - iv.lo) / 199.0);
                // refine the grid around the grid minimum
                const double h = (iv.hi - iv.lo) / 199.0;
                const auto fine = grid_min(s, p, 0.5, gq - h, gq + h, 2001);
                CHECK(std::abs(res.xi1_star - fine.second) <= 1e-8);

                const auto gs = golden_section_rate(s, p, 0.5, tol);
                CHECK(std::abs(gs.xi1_star - res.xi1_star) <= 1e-10);
            }
}

TEST_CASE("property: random instances match the grid") {
    Rng rng = make_stream(31, 0);
    int checked = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 3 + uniform_index(rng, 12);
        const auto g = oracle::random_connected_graph(n, 0.3, rng);
        const auto mix = build_mixing_matrix(g, MixingMode::uniform_c);
        const auto s = symmetric_eigen(mix);
        const auto p = oracle::random_valid_params(mix.c, rng, true, 1.0);
        OptimizationResult res;
        try {
            res = minimize_rate(s, p, mix.c, 1e-9);
        } catch (const ValidationError&) {
            continue; // b_j < 0 somewhere for this spectrum
        }
        const auto iv = search_interval(p);
        const auto coarse = grid_min(s, p, mix.c, iv.lo, iv.hi, 200);
        const double h = (iv.hi - iv.lo) / 199.0;
        const auto fine = grid_min(s, p, mix.c, std::max(iv.lo, coarse.first - h), std::min(iv.hi, coarse.first + h), 2001);
        CAPTURE(n);
        CHECK(res.xi1_star <= fine.second + 1e-8);
        ++checked;
    }
    CHECK(checked >= 10);
}

TEST_CASE("golden section on instances with every b_j zero") {
    // On K3 every lambda_j (j>1) is -1/2 and b_j = 1.5 (1.5 (beta - alpha) - beta/2 + 2 r^2).
    // With beta = 0 it vanishes at alpha = 2 r^2 / 1.5, leaving xi1 = 1 - 3q + 2.25 alpha q^2.
    // validate_params rejects these points; the root finder and golden section accept them.
    const auto s = spectrum_of(graphs::complete(3));

    const auto past_end = params(0.5, 0.5 / 1.5, 0.0); // vertex at q = 2
    CHECK(largest_root(s, past_end, 0.5, 0.3).branch == RootBranch::degenerate);
    const auto a = golden_section_rate(s, past_end, 0.5, 1e-8);
    CHECK(a.method == OptimizeMethod::golden_section);
    CHECK(a.boundary == Boundary::upper);
    CHECK(a.q_star == search_interval(past_end).hi);

    const auto inside = params(std::sqrt(0.75), 1.0, 0.0); // vertex at q = 2/3, xi1 = 0
    const auto b = golden_section_rate(s, inside, 0.5, 1e-9);
    CHECK(b.boundary == Boundary::interior);
    CHECK(std::abs(b.q_star - 2.0 / 3.0) <= 1e-6);
    CHECK(std::abs(b.xi1_star) <= 1e-12);
}

TEST_CASE("tolerance bounds") {
    const auto s = spectrum_of(graphs::complete(3));
    const auto p = params(0.5, 0.0, 0.0);
    CHECK_THROWS_AS(minimize_rate(s, p, 0.5, 0.0), ValidationError);
    CHECK_THROWS_AS(minimize_rate(s, p, 0.5, 2e-3), ValidationError);
    CHECK_THROWS_AS(minimize_rate(s, p, 0.5, -1e-8), ValidationError);
    CHECK_NOTHROW(minimize_rate(s, p, 0.5, 1e-3));
    CHECK_THROWS_AS(minimize_rate(s, params(0.5, 0.0, 1.0), 0.5, 1e-8), ValidationError);
}

TEST_CASE("search interval respects q sqrt(u) < 1") {
    const auto iv = search_interval(params(1.0, 0.0, 0.0, 4.0));
    CHECK(iv.lo == 1e-6);
    CHECK(iv.hi * 2.0 < 1.0);
    CHECK(search_interval(params(1.0, 0.0, 0.0, 1.0)).hi == 1.0 - 1e-6);
}

TEST_CASE("sweep rows") {
    const auto s = spectrum_of(graphs::complete(3));
    const auto p = params(0.5, 0.0, 0.0);
    const auto one = sweep(s, p, 0.5, {0.2});
    REQUIRE(one.rows.size() == 1);
    REQUIRE(one.rows[0].point);
    CHECK(std::abs(one.rows[0].point->xi1 - 0.42) <= 1e-14);
    CHECK(one.rows[0].trend == -1);
    CHECK(one.rows[0].convexity_ok);

    CHECK(sweep(s, p, 0.5, {}).rows.empty());
    CHECK_THROWS_AS(sweep(s, p, 0.5, {0.0, 0.5}), ValidationError);
    CHECK_THROWS_AS(sweep(s, p, 0.5, {0.5, 0.4}), ValidationError);
    CHECK_THROWS_AS(sweep(s, p, 0.5, {0.5, 1.0}), ValidationError);

    const auto grid = linear_grid(0.05, 0.95, 19);
    REQUIRE(grid.size() == 19);
    CHECK(grid.front() == 0.05);
    CHECK(grid.back() == 0.95);
    const auto t = sweep(spectrum_of(graphs::ring(6)), params(1.0, 0.5, 0.0), 0.5, grid);
    CHECK(t.rows.size() == 19);
    for (const auto& row : t.rows) {
        CHECK(row.error.empty());
        CHECK(row.convexity_ok);
    }
    CHECK(convexity_probe(t).ok());
}

TEST_CASE("convexity probe") {
    std::vector<double> q = {0.1, 0.2, 0.35, 0.5, 0.8};
    std::vector<double> quad, affine, bump;
    for (double x : q) {
        quad.push_back((x - 0.4) * (x - 0.4));
        affine.push_back(2.0 - 3.0 * x);
    }
    CHECK(convexity_probe(q, quad).ok());
    CHECK(convexity_probe(q, affine).ok());
    // affine data sit exactly at second difference 0 up to rounding
    CHECK(std::abs(convexity_probe(q, affine).min_second_difference) <= 1e-12);

    bump = quad;
    bump[2] += 0.05;
    const auto rep = convexity_probe(q, bump);
    CHECK_FALSE(rep.ok());
    CHECK(rep.violations == std::vector<std::size_t>{2});
    CHECK(rep.min_second_difference < -1e-9);

    CHECK_THROWS(convexity_probe(std::vector<double>{0.1, 0.2}, std::vector<double>{1.0, 2.0}));
}

TEST_CASE("property: xi1 is convex in q when alpha >= 0") {
    Rng rng = make_stream(32, 0);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 3 + uniform_index(rng, 20);
        const auto mix = build_mixing_matrix(oracle::random_connected_graph(n, 0.25, rng), MixingMode::uniform_c);
        const auto p = oracle::random_valid_params(mix.c, rng);
        const auto iv = search_interval(p);
        SweepTable t;
        try {
            t = sweep(symmetric_eigen(mix), p, mix.c, linear_grid(iv.lo, std::min(iv.hi, 0.999), 64));
        } catch (const ValidationError&) {
            continue;
        }
        bool all_rows = true;
        for (const auto& row : t.rows) all_rows = all_rows && row.point.has_value();
        if (!all_rows) continue;
        CAPTURE(trial);
        CHECK(convexity_probe(t).ok());
        ++checked;
    }
    CHECK(checked >= 20);
}
