#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "pushsum/io.hpp"

using namespace pushsum;

namespace {

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::size_t commas(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), ',')); }

RatePoint k3_point() {
    const auto s = symmetric_eigen(build_mixing_matrix(graphs::complete(3), MixingMode::row_stochastic_regular));
    CorrelationParams p;
    p.r = 0.5;
    return largest_root(s, p, 0.5, 0.2);
}

} // namespace

TEST_CASE("real formatting") {
    CHECK(format_real(0.5) == "0.5");
    CHECK(format_real(0.1) == "0.10000000000000001");
    CHECK(std::stod(format_real(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(format_real(-2.0) == "-2");
    CHECK(format_real(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(format_real(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_real(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(format_real(std::optional<double>{}).empty());
    CHECK(format_real(std::optional<double>{0.25}) == "0.25");

    CHECK(json_real(0.1).dump() == "0.1");
    CHECK(json_real(std::numeric_limits<double>::quiet_NaN()).is_null());
    CHECK(json_real(-std::numeric_limits<double>::infinity()).is_null());
    CHECK(json_real(std::optional<double>{}).is_null());
}

TEST_CASE("rate output") {
    const auto pt = k3_point();
    std::ostringstream csv;
    write_rate_csv(csv, pt);
    const auto l = lines(csv.str());
    REQUIRE(l.size() == 2);
    CHECK(l[0] == "q,xi1,gamma_half,derivative,spectral_radius,branch,warning");
    CHECK(commas(l[1]) == 6);
    CHECK(l[1].rfind("0.20000000000000001,", 0) == 0);

    const auto j = to_json(pt);
    CHECK(j["q"] == 0.2);
    CHECK(std::abs(j["xi1"].get<double>() - 0.42) <= 1e-15);
    CHECK(j["branch"] == "secular");
    CHECK(j["warning"] == false);
    CHECK(std::abs(j["derivative"].get<double>() + 2.8) <= 1e-12);
    // key order is part of the format
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    CHECK(keys == std::vector<std::string>{"q", "xi1", "gamma_half", "derivative", "spectral_radius", "branch", "warning"});
    CHECK(dump_json(j).back() == '\n');
}

TEST_CASE("optimize and sweep output") {
    const auto s = symmetric_eigen(build_mixing_matrix(graphs::ring(6), MixingMode::row_stochastic_regular));
    CorrelationParams p;
    p.r = 1.0;
    const auto res = minimize_rate(s, p, 0.5);
    std::ostringstream csv;
    write_optimize_csv(csv, res);
    const auto l = lines(csv.str());
    REQUIRE(l.size() == 2);
    CHECK(l[0] == "q_star,xi1_star,derivative,q_lo,q_hi,sign_lo,sign_hi,boundary,method,iterations,degenerate");
    CHECK(commas(l[1]) == 10);
    const auto j = to_json(res);
    CHECK(j["boundary"] == "interior");
    CHECK(j["method"] == "derivative-bisection");
    CHECK(j["certificate"]["sign_lo"] == -1);
    CHECK(j["certificate"]["sign_hi"] == 1);

    const auto t = sweep(s, p, 0.5, linear_grid(0.1, 0.9, 9));
    std::ostringstream sc;
    write_sweep_csv(sc, t);
    const auto sl = lines(sc.str());
    REQUIRE(sl.size() == 10);
    CHECK(sl[0] == "q,xi1,gamma_half,derivative,convexity_flag");
    for (std::size_t i = 1; i < sl.size(); ++i) CHECK(commas(sl[i]) == 4);
    const auto sj = to_json(t);
    REQUIRE(sj.is_array());
    CHECK(sj.size() == 9);
    CHECK(sj[0].contains("trend"));
}

TEST_CASE("run output") {
    const auto mix = build_mixing_matrix(graphs::ring(6), MixingMode::row_stochastic_regular);
    const ProtocolSampler s({ProtocolKind::broadcast, 0.4, 0}, mix, 0.5);
    Rng rng = make_stream(1, 0);
    const auto run = run_pushsum(s, Vector::LinSpaced(6, 0.0, 1.0), 10, rng);
    std::ostringstream out;
    write_run_csv_header(out);
    write_run_csv(out, 3, run, 4);
    const auto l = lines(out.str());
    CHECK(l[0] == "run,t,error,log_error,sum_x,sum_w,min_w");
    // t = 0, 4, 8 and the final step 10
    REQUIRE(l.size() == 5);
    CHECK(l[1].rfind("3,0,", 0) == 0);
    CHECK(l[3].rfind("3,8,", 0) == 0);
    CHECK(l[4].rfind("3,10,", 0) == 0);
}

TEST_CASE("moment estimate json") {
    const auto mix = build_mixing_matrix(graphs::ring(6), MixingMode::row_stochastic_regular);
    const auto est = estimate_moments({ProtocolKind::unicast, 0.5, 1}, mix, 0.5, 5000);
    const auto j = to_json(est);
    CHECK(j["samples"] == 5000);
    CHECK(j.contains("residual"));
    CHECK(j["beta_hat"] == 0.0);
}

TEST_CASE("output destination") {
    const std::string path = "pushsum_io_test.tmp";
    write_output(path, "abc\n");
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text == "abc\n");
    std::remove(path.c_str());
    CHECK_THROWS_AS(write_output("/nonexistent-dir/out.csv", "x"), IoError);
}
