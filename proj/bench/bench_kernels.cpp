// Serial reference vs OpenMP kernels. Set OMP_NUM_THREADS to vary the parallel side.

#include <algorithm>
#include <cmath>
#include <functional>

#include <benchmark/benchmark.h>

#include "pushsum/optimizer.hpp"
#include "pushsum/phi.hpp"
#include "pushsum/simulator.hpp"

using namespace pushsum;

namespace {

MixingMatrix ring(std::size_t n) { return build_mixing_matrix(graphs::ring(n), MixingMode::row_stochastic_regular); }

CorrelationParams sweep_params() {
    CorrelationParams p;
    p.r = 1.0;
    p.alpha = 0.5;
    p.beta = 0.2;
    return p;
}

void BM_Jacobi(benchmark::State& st) {
    const auto mix = ring(static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(symmetric_eigen(mix));
}
BENCHMARK(BM_Jacobi)->Arg(30)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);

void BM_BoundN120(benchmark::State& st) {
    const auto mix = ring(120);
    const auto p = sweep_params();
    for (auto _ : st) {
        const auto s = symmetric_eigen(mix);
        benchmark::DoNotOptimize(largest_root(s, p, mix.c, 0.3));
    }
}
BENCHMARK(BM_BoundN120)->Unit(benchmark::kMillisecond);

// Ring spectrum cos(2 pi k / n) in closed form, so large n skips the O(n^3) solver.
Spectrum ring_spectrum(std::size_t n) {
    Spectrum s;
    s.values.resize(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k)
        s.values(static_cast<Eigen::Index>(k)) = std::cos(6.283185307179586 * static_cast<double>(k) / static_cast<double>(n));
    std::sort(s.values.begin(), s.values.end(), std::greater<>());
    return s;
}

template <bool Parallel>
void BM_Sweep(benchmark::State& st) {
    const auto s = ring_spectrum(static_cast<std::size_t>(st.range(0)));
    const auto mix = ring(6);
    const auto p = sweep_params();
    const auto grid = linear_grid(0.005, 0.995, 200);
    for (auto _ : st)
        benchmark::DoNotOptimize(Parallel ? sweep(s, p, mix.c, grid) : serial::sweep(s, p, mix.c, grid));
}
BENCHMARK(BM_Sweep<false>)->Name("Sweep200/serial")->Arg(120)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sweep<true>)->Name("Sweep200/omp")->Arg(120)->Arg(4000)->Unit(benchmark::kMillisecond);

template <bool Parallel>
void BM_Ensemble(benchmark::State& st) {
    const auto mix = ring(6);
    const ProtocolSampler s({ProtocolKind::broadcast, 0.25, 1}, mix, 0.5);
    for (auto _ : st)
        benchmark::DoNotOptimize(Parallel ? run_ensemble(s, 1, 32, 2000) : serial::run_ensemble(s, 1, 32, 2000));
}
BENCHMARK(BM_Ensemble<false>)->Name("Ensemble32x2000/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ensemble<true>)->Name("Ensemble32x2000/omp")->Unit(benchmark::kMillisecond);

template <bool Parallel>
void BM_Moments(benchmark::State& st) {
    const auto mix = ring(8);
    const ProtocolSpec spec{ProtocolKind::broadcast, 0.25, 1};
    for (auto _ : st)
        benchmark::DoNotOptimize(Parallel ? estimate_moments(spec, mix, 0.5, 100000)
                                          : serial::estimate_moments(spec, mix, 0.5, 100000));
}
BENCHMARK(BM_Moments<false>)->Name("Moments1e5/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Moments<true>)->Name("Moments1e5/omp")->Unit(benchmark::kMillisecond);

template <bool Parallel>
void BM_PhiMC(benchmark::State& st) {
    const auto mix = ring(8);
    const ProtocolSampler s({ProtocolKind::unicast, 0.5, 1}, mix, 0.5);
    const Matrix x = Matrix::Identity(8, 8) - Matrix::Constant(8, 8, 1.0 / 8);
    for (auto _ : st)
        benchmark::DoNotOptimize(Parallel ? phi_star_mc(s, x, 100000, 1) : serial::phi_star_mc(s, x, 100000, 1));
}
BENCHMARK(BM_PhiMC<false>)->Name("PhiMC1e5/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PhiMC<true>)->Name("PhiMC1e5/omp")->Unit(benchmark::kMillisecond);

template <bool Parallel>
void BM_Properties(benchmark::State& st) {
    const auto mix = ring(12);
    const auto m = make_phi_model(mix, analytic_protocol_params({ProtocolKind::broadcast, 0.25, 0}, mix, 0.3));
    for (auto _ : st)
        benchmark::DoNotOptimize(Parallel ? check_phi_properties(m, 200, 1) : serial::check_phi_properties(m, 200, 1));
}
BENCHMARK(BM_Properties<false>)->Name("PhiProperties200/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Properties<true>)->Name("PhiProperties200/omp")->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
