#include "pushsum/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

namespace pushsum {

std::string to_string(ProtocolKind k) { return k == ProtocolKind::broadcast ? "broadcast" : "unicast"; }

ProtocolKind parse_protocol(const std::string& name) {
    if (name == "broadcast") return ProtocolKind::broadcast;
    if (name == "unicast") return ProtocolKind::unicast;
    throw ValidationError("protocol", "unknown protocol '" + name + "'");
}

namespace {

std::vector<std::vector<std::size_t>> neighbor_lists(const MixingMatrix& mix) {
    const auto n = mix.n();
    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (mix.entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) > 0.0) out[i].push_back(j);
    return out;
}

} // namespace

void validate_protocol(const ProtocolSpec& spec, const MixingMatrix& mix) {
    std::vector<ConstraintViolation> v;
    const auto nb = neighbor_lists(mix);
    std::size_t dmin = SIZE_MAX, dmax = 0;
    for (const auto& l : nb) {
        dmin = std::min(dmin, l.size());
        dmax = std::max(dmax, l.size());
    }
    if (!(spec.w > 0.0)) v.push_back({"w>0", "w = " + std::to_string(spec.w)});
    if (spec.kind == ProtocolKind::broadcast && spec.w * static_cast<double>(dmax) > 1.0 + 1e-12)
        v.push_back({"sent mass<=1", "broadcast needs w * max degree <= 1"});
    if (spec.kind == ProtocolKind::unicast) {
        if (spec.w > 1.0) v.push_back({"sent mass<=1", "unicast needs w <= 1"});
        if (dmin != dmax) v.push_back({"unicast needs a regular graph", "degrees range " + std::to_string(dmin) + ".." +
                                                                            std::to_string(dmax)});
    }
    if (dmin == 0) v.push_back({"no isolated nodes", "a node has no neighbours"});
    if (!v.empty()) throw ValidationError(std::move(v));
}

CorrelationParams analytic_protocol_params(const ProtocolSpec& spec, const MixingMatrix& mix, double q,
                                           const std::vector<double>& node_q) {
    validate_protocol(spec, mix);
    if (!mix.two_valued() || mix.c <= 0.0)
        throw ValidationError("beta!=0 needs {0,c} mixing", "protocol moments need a {0,c} mixing matrix");
    const double c = mix.c, w = spec.w;
    CorrelationParams p;
    if (!node_q.empty()) {
        if (spec.kind != ProtocolKind::unicast)
            throw ValidationError("node_q", "per-node activation is only representable for unicast");
        double s = 0.0;
        for (double qi : node_q) s += qi;
        q = s / static_cast<double>(node_q.size());
    }
    p.q = q;
    if (spec.kind == ProtocolKind::broadcast) {
        p.u = (w / c) * (w / c);
        p.alpha = p.u;
        p.beta = w * w / (q * c * c);
        p.r = std::sqrt(w * w / (q * c));
    } else {
        const double k = static_cast<double>(neighbor_lists(mix).front().size()) * c; // deg * c
        p.u = (w / k) * (w / k);
        p.alpha = p.u;
        p.beta = 0.0;
        p.r = std::sqrt(w * w / (q * k));
        if (!node_q.empty()) {
            p.node_q = node_q;
            for (double qi : node_q) p.node_r.push_back(std::sqrt(w * w / (qi * k)));
        }
    }
    return p;
}

ProtocolSampler::ProtocolSampler(const ProtocolSpec& spec, const MixingMatrix& mix, std::vector<double> activation)
    : spec_(spec), activation_(std::move(activation)), neighbors_(neighbor_lists(mix)) {
    validate_protocol(spec, mix);
    if (activation_.size() != neighbors_.size())
        throw ValidationError("node_q", "activation vector size does not match the graph");
    for (double a : activation_)
        if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("q in [0,1]", "activation probability out of range");
}

ProtocolSampler::ProtocolSampler(const ProtocolSpec& spec, const MixingMatrix& mix, double q)
    : ProtocolSampler(spec, mix, std::vector<double>(mix.n(), q)) {}

void ProtocolSampler::sample(Rng& rng, Matrix& c) const {
    const auto n = static_cast<Eigen::Index>(neighbors_.size());
    c.setZero(n, n);
    for (std::size_t i = 0; i < neighbors_.size(); ++i) {
        if (!(uniform01(rng) < activation_[i])) continue;
        const auto& nb = neighbors_[i];
        const auto col = static_cast<Eigen::Index>(i);
        if (spec_.kind == ProtocolKind::broadcast) {
            for (auto j : nb) c(static_cast<Eigen::Index>(j), col) = spec_.w;
        } else {
            const auto j = nb[uniform_index(rng, nb.size())];
            c(static_cast<Eigen::Index>(j), col) = spec_.w;
        }
    }
}

Matrix ProtocolSampler::sample(Rng& rng) const {
    Matrix c;
    sample(rng, c);
    return c;
}

Matrix build_a(const Matrix& c) {
    const Vector sent = c.colwise().sum().transpose();
    if ((sent.array() > 1.0 + 1e-12).any()) throw NumericalError("build_a: a column of C sends more than unit mass");
    Matrix a = c;
    a.diagonal() += Vector::Ones(c.rows()) - sent - c.diagonal();
    return a;
}

double PushSumRun::error(std::size_t t) const { return std::exp(log_error.at(t)); }

PushSumRun run_pushsum(const ProtocolSampler& sampler, const Vector& x0, std::size_t t_max, Rng& rng,
                       const PushSumOptions& opts) {
    const auto n = static_cast<Eigen::Index>(sampler.n());
    if (x0.size() != n) throw ValidationError("x0", "initial vector size does not match the graph");
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    constexpr double ninf = -std::numeric_limits<double>::infinity();

    PushSumRun run;
    run.xbar = x0.mean();
    Vector x = x0;
    Vector w = Vector::Ones(n);
    Vector y = x0.array() - run.xbar;
    double log_scale = 0.0;
    // sum(y) = 0 exactly in exact arithmetic. A preserves sums, so rounding left in
    // sum(y) never decays and would set a floor once y is rescaled; strip it each step.
    auto renormalise = [&] {
        y -= (y.sum() / w.sum()) * w;
        const double m = y.cwiseAbs().maxCoeff();
        if (m == 0.0) {
            log_scale = ninf;
            return;
        }
        y /= m;
        log_scale += std::log(m);
    };
    renormalise();

    auto record = [&] {
        run.sum_x.push_back(x.sum());
        run.sum_w.push_back(w.sum());
        run.min_w.push_back(w.minCoeff());
        if (opts.record_trajectory) {
            run.x.push_back(x);
            run.w.push_back(w);
        }
        if (log_scale == ninf) {
            run.log_error.push_back(ninf);
            run.log_dev_sq.push_back(ninf);
            return;
        }
        double worst = 0.0;
        bool missing = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!(w(i) > 0.0)) {
                missing = true;
                break;
            }
            worst = std::max(worst, std::abs(y(i)) / w(i));
        }
        run.log_error.push_back(missing ? nan : (worst > 0.0 ? log_scale + std::log(worst) : ninf));
        run.log_dev_sq.push_back(2.0 * log_scale + std::log(y.squaredNorm()));
    };
    record();

    Matrix c, a;
    for (std::size_t t = 1; t <= t_max; ++t) {
        sampler.sample(rng, c);
        a = build_a(c);
        if (opts.record_a) run.a_log.push_back(a);
        x = a * x;
        w = a * w;
        if (log_scale != ninf) {
            y = a * y;
            renormalise();
        }
        record();
    }
    return run;
}

double fit_log_slope(std::span<const double> log_error, double window) {
    if (!(window > 0.0 && window <= 1.0)) throw ValidationError("window", "window fraction must lie in (0,1]");
    const std::size_t n = log_error.size();
    const auto start = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - window)));
    double st = 0, sy = 0, stt = 0, sty = 0;
    std::size_t cnt = 0, zeros = 0;
    for (std::size_t t = start; t < n; ++t) {
        const double y = log_error[t];
        if (y == -std::numeric_limits<double>::infinity()) {
            ++zeros;
            continue;
        }
        if (!std::isfinite(y)) continue;
        const double tt = static_cast<double>(t);
        st += tt;
        sy += y;
        stt += tt * tt;
        sty += tt * y;
        ++cnt;
    }
    if (cnt == 0 && zeros > 0) return -std::numeric_limits<double>::infinity();
    if (cnt < 10) throw NumericalError("fit_log_slope: fewer than 10 valid error entries in the window");
    const double k = static_cast<double>(cnt);
    return (k * sty - st * sy) / (k * stt - st * st);
}

double empirical_rate(const PushSumRun& run, double window) { return fit_log_slope(run.log_error, window); }

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty set");
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

namespace {

PushSumRun one_run(const ProtocolSampler& sampler, std::uint64_t seed, std::size_t k, std::size_t t_max) {
    Rng rng = make_stream(seed, k);
    Vector x0(static_cast<Eigen::Index>(sampler.n()));
    for (Eigen::Index i = 0; i < x0.size(); ++i) x0(i) = standard_normal(rng);
    auto run = run_pushsum(sampler, x0, t_max, rng);
    run.seed = seed;
    run.stream = k;
    return run;
}

EnsembleResult finish_ensemble(std::vector<PushSumRun>&& runs, std::vector<double>&& slopes, bool keep) {
    EnsembleResult out;
    out.slopes = std::move(slopes);
    out.median_slope = median(out.slopes);
    if (keep) out.runs = std::move(runs);
    return out;
}

// Per-block sufficient statistics for the moment fit.
struct MomentAccumulator {
    std::size_t count = 0;
    double g[4] = {0, 0, 0, 0};  // sqrt(u), r^2, beta, alpha statistics
    double gg[4] = {0, 0, 0, 0};
    std::vector<double> e, ee; // per-entry sums and squared sums

    explicit MomentAccumulator(std::size_t entries) : e(entries, 0.0), ee(entries, 0.0) {}
    void merge(const MomentAccumulator& o) {
        count += o.count;
        for (int k = 0; k < 4; ++k) {
            g[k] += o.g[k];
            gg[k] += o.gg[k];
        }
        for (std::size_t i = 0; i < e.size(); ++i) {
            e[i] += o.e[i];
            ee[i] += o.ee[i];
        }
    }
};

struct MomentLayout {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> edges; // (receiver j, sender i)
    std::vector<double> p_edge;
    std::vector<std::size_t> deg;
    std::size_t pair_count = 0;   // sum_i deg_i (deg_i - 1)
    std::size_t sender_pairs = 0; // sum_{i != k} deg_i deg_k
    std::size_t n = 0;
    // entry layout: [means | squares | per-sender beta | sender pairs (i != k)]
    std::size_t off_sq = 0, off_beta = 0, off_alpha = 0, entries = 0;
};

MomentLayout make_layout(const MixingMatrix& mix) {
    MomentLayout L;
    L.n = mix.n();
    L.deg.assign(L.n, 0);
    for (std::size_t i = 0; i < L.n; ++i)
        for (std::size_t j = 0; j < L.n; ++j) {
            const double p = mix.entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
            if (p > 0.0) {
                L.edges.emplace_back(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
                L.p_edge.push_back(p);
                ++L.deg[i];
            }
        }
    std::size_t sdeg = 0, sdeg2 = 0;
    for (auto d : L.deg) {
        L.pair_count += d * (d - (d > 0));
        sdeg += d;
        sdeg2 += d * d;
    }
    L.sender_pairs = sdeg * sdeg - sdeg2;
    L.off_sq = L.edges.size();
    L.off_beta = 2 * L.edges.size();
    L.off_alpha = L.off_beta + L.n;
    L.entries = L.off_alpha + L.n * L.n;
    return L;
}

constexpr std::size_t kBlock = 4096;

MomentAccumulator moment_block(const ProtocolSampler& sampler, const MomentLayout& L, double q, std::uint64_t seed,
                               std::size_t block, std::size_t count) {
    MomentAccumulator acc(L.entries);
    Rng rng = make_stream(seed, block);
    Matrix c;
    std::vector<double> t(L.n), u(L.n);
    const double q2 = q * q;
    for (std::size_t s = 0; s < count; ++s) {
        sampler.sample(rng, c);
        std::fill(t.begin(), t.end(), 0.0);
        std::fill(u.begin(), u.end(), 0.0);
        double g1 = 0.0, g2 = 0.0;
        for (std::size_t k = 0; k < L.edges.size(); ++k) {
            const auto [j, i] = L.edges[k];
            const double v = c(j, i), p = L.p_edge[k];
            g1 += v / (q * p);
            g2 += v * v / (q2 * p);
            acc.e[k] += v;
            acc.ee[k] += v * v;
            acc.e[L.off_sq + k] += v * v;
            acc.ee[L.off_sq + k] += v * v * v * v;
            t[static_cast<std::size_t>(i)] += v / p;
            u[static_cast<std::size_t>(i)] += v * v / (p * p);
        }
        double g3 = 0.0, tsum = 0.0, tsq = 0.0;
        for (std::size_t i = 0; i < L.n; ++i) {
            const double pairs = t[i] * t[i] - u[i];
            g3 += pairs;
            tsum += t[i];
            tsq += t[i] * t[i];
            if (L.deg[i] > 1) {
                const double v = pairs / static_cast<double>(L.deg[i] * (L.deg[i] - 1));
                acc.e[L.off_beta + i] += v;
                acc.ee[L.off_beta + i] += v * v;
            }
            for (std::size_t k = 0; k < L.n; ++k) {
                if (k == i || L.deg[i] == 0 || L.deg[k] == 0) continue;
                const double v = t[i] * t[k] / static_cast<double>(L.deg[i] * L.deg[k]);
                acc.e[L.off_alpha + i * L.n + k] += v;
                acc.ee[L.off_alpha + i * L.n + k] += v * v;
            }
        }
        const double g4 = tsum * tsum - tsq;
        const double stats[4] = {g1 / static_cast<double>(L.edges.size()), g2 / static_cast<double>(L.edges.size()),
                                 L.pair_count ? g3 / (q2 * static_cast<double>(L.pair_count)) : 0.0,
                                 g4 / (q2 * static_cast<double>(L.sender_pairs))};
        for (int k = 0; k < 4; ++k) {
            acc.g[k] += stats[k];
            acc.gg[k] += stats[k] * stats[k];
        }
        ++acc.count;
    }
    return acc;
}

struct MeanSe {
    double mean, se;
};

MeanSe mean_se(double sum, double sumsq, std::size_t n) {
    const double k = static_cast<double>(n);
    const double mean = sum / k;
    const double var = std::max(0.0, (sumsq - k * mean * mean) / (k - 1.0));
    return {mean, std::sqrt(var / k)};
}

MomentEstimate finish_moments(const MomentAccumulator& acc, const MomentLayout& L, const MixingMatrix& mix, double q) {
    MomentEstimate est;
    est.samples = acc.count;
    est.q = q;
    const auto su = mean_se(acc.g[0], acc.gg[0], acc.count);
    const auto r2 = mean_se(acc.g[1], acc.gg[1], acc.count);
    const auto be = mean_se(acc.g[2], acc.gg[2], acc.count);
    const auto al = mean_se(acc.g[3], acc.gg[3], acc.count);
    est.u_hat = su.mean * su.mean;
    est.u_se = 2.0 * std::abs(su.mean) * su.se;
    est.r2_hat = r2.mean;
    est.r2_se = r2.se;
    est.alpha_hat = al.mean;
    est.alpha_se = al.se;
    if (L.pair_count > 0) {
        est.beta_hat = be.mean;
        est.beta_se = be.se;
    }

    // Class-wise RMS z-scores of per-entry means around the fitted predictions.
    double worst_class = 0.0, worst_z = 0.0;
    auto run_class = [&](std::size_t begin, std::size_t end, auto predicted) {
        double zz = 0.0;
        std::size_t k = 0;
        for (std::size_t e = begin; e < end; ++e) {
            const auto pred = predicted(e - begin);
            if (!pred) continue;
            const auto ms = mean_se(acc.e[e], acc.ee[e], acc.count);
            double z;
            if (ms.se > 0.0) z = (ms.mean - *pred) / ms.se;
            else if (std::abs(ms.mean - *pred) <= 1e-12 * std::max(1.0, std::abs(*pred))) z = 0.0;
            else z = std::numeric_limits<double>::infinity();
            zz += z * z;
            worst_z = std::max(worst_z, std::abs(z));
            ++k;
        }
        if (k) worst_class = std::max(worst_class, std::sqrt(zz / static_cast<double>(k)));
    };
    const double q2 = q * q;
    run_class(0, L.edges.size(), [&](std::size_t k) { return std::optional<double>(q * su.mean * L.p_edge[k]); });
    run_class(L.off_sq, L.off_beta, [&](std::size_t k) { return std::optional<double>(q2 * r2.mean * L.p_edge[k]); });
    // Aggregated entries divide out p, which is only constant on {0,c} matrices.
    if (mix.two_valued()) {
        if (L.pair_count > 0)
            run_class(L.off_beta, L.off_alpha, [&](std::size_t i) {
                return L.deg[i] > 1 ? std::optional<double>(be.mean * q2) : std::nullopt;
            });
        run_class(L.off_alpha, L.entries, [&](std::size_t e) {
            const std::size_t i = e / L.n, k = e % L.n;
            return i != k ? std::optional<double>(al.mean * q2) : std::nullopt;
        });
    }
    est.residual = worst_class;
    est.residual_max_z = worst_z;
    return est;
}

struct PhiAccumulator {
    std::size_t count = 0;
    Matrix sum, sumsq;
};

PhiAccumulator phi_block(const ProtocolSampler& sampler, const Matrix& x, std::uint64_t seed, std::size_t block,
                         std::size_t count) {
    const auto n = x.rows();
    PhiAccumulator acc{0, Matrix::Zero(n, n), Matrix::Zero(n, n)};
    Rng rng = make_stream(seed, block);
    Matrix c, a, y;
    for (std::size_t s = 0; s < count; ++s) {
        sampler.sample(rng, c);
        a = build_a(c);
        y.noalias() = a * x * a.transpose();
        acc.sum += y;
        acc.sumsq += y.cwiseProduct(y);
        ++acc.count;
    }
    return acc;
}

PhiEstimate finish_phi(const PhiAccumulator& acc) {
    const double k = static_cast<double>(acc.count);
    PhiEstimate out;
    out.mean = acc.sum / k;
    const Matrix var = ((acc.sumsq - k * out.mean.cwiseProduct(out.mean)) / (k - 1.0)).cwiseMax(0.0);
    out.se = (var / k).cwiseSqrt();
    return out;
}

std::size_t block_count(std::size_t samples) { return (samples + kBlock - 1) / kBlock; }
std::size_t block_size(std::size_t samples, std::size_t b) { return std::min(kBlock, samples - b * kBlock); }

void check_q(double q) {
    if (!(q > 0.0)) throw ValidationError("non-identifiable", "q = 0: every message moment is zero");
}

} // namespace

EnsembleResult run_ensemble(const ProtocolSampler& sampler, std::uint64_t seed, std::size_t runs, std::size_t t_max,
                            double window, bool keep_runs) {
    std::vector<PushSumRun> out(runs);
    std::vector<double> slopes(runs);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(runs); ++k) {
        const auto i = static_cast<std::size_t>(k);
        try {
            out[i] = one_run(sampler, seed, i, t_max);
            slopes[i] = empirical_rate(out[i], window);
        } catch (...) {
#pragma omp critical(pushsum_ensemble_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return finish_ensemble(std::move(out), std::move(slopes), keep_runs);
}

MomentEstimate estimate_moments(const ProtocolSpec& spec, const MixingMatrix& mix, double q, std::size_t samples) {
    check_q(q);
    if (samples < 2) throw ValidationError("samples", "need at least two samples");
    const ProtocolSampler sampler(spec, mix, q);
    const auto L = make_layout(mix);
    const std::size_t blocks = block_count(samples);
    std::vector<MomentAccumulator> parts(blocks, MomentAccumulator(L.entries));
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
        const auto i = static_cast<std::size_t>(b);
        parts[i] = moment_block(sampler, L, q, spec.seed, i, block_size(samples, i));
    }
    MomentAccumulator total(L.entries);
    for (const auto& p : parts) total.merge(p);
    return finish_moments(total, L, mix, q);
}

PhiEstimate phi_star_mc(const ProtocolSampler& sampler, const Matrix& x, std::size_t samples, std::uint64_t seed) {
    if (samples < 2) throw ValidationError("samples", "need at least two samples");
    const std::size_t blocks = block_count(samples);
    std::vector<PhiAccumulator> parts(blocks);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
        const auto i = static_cast<std::size_t>(b);
        parts[i] = phi_block(sampler, x, seed, i, block_size(samples, i));
    }
    PhiAccumulator total{0, Matrix::Zero(x.rows(), x.cols()), Matrix::Zero(x.rows(), x.cols())};
    for (const auto& p : parts) {
        total.count += p.count;
        total.sum += p.sum;
        total.sumsq += p.sumsq;
    }
    return finish_phi(total);
}

namespace serial {

EnsembleResult run_ensemble(const ProtocolSampler& sampler, std::uint64_t seed, std::size_t runs, std::size_t t_max,
                            double window, bool keep_runs) {
    std::vector<PushSumRun> out;
    std::vector<double> slopes;
    for (std::size_t k = 0; k < runs; ++k) {
        out.push_back(one_run(sampler, seed, k, t_max));
        slopes.push_back(empirical_rate(out.back(), window));
    }
    return finish_ensemble(std::move(out), std::move(slopes), keep_runs);
}

MomentEstimate estimate_moments(const ProtocolSpec& spec, const MixingMatrix& mix, double q, std::size_t samples) {
    check_q(q);
    if (samples < 2) throw ValidationError("samples", "need at least two samples");
    const ProtocolSampler sampler(spec, mix, q);
    const auto L = make_layout(mix);
    MomentAccumulator total(L.entries);
    for (std::size_t b = 0; b < block_count(samples); ++b)
        total.merge(moment_block(sampler, L, q, spec.seed, b, block_size(samples, b)));
    return finish_moments(total, L, mix, q);
}

PhiEstimate phi_star_mc(const ProtocolSampler& sampler, const Matrix& x, std::size_t samples, std::uint64_t seed) {
    if (samples < 2) throw ValidationError("samples", "need at least two samples");
    PhiAccumulator total{0, Matrix::Zero(x.rows(), x.cols()), Matrix::Zero(x.rows(), x.cols())};
    for (std::size_t b = 0; b < block_count(samples); ++b) {
        const auto p = phi_block(sampler, x, seed, b, block_size(samples, b));
        total.count += p.count;
        total.sum += p.sum;
        total.sumsq += p.sumsq;
    }
    return finish_phi(total);
}

} // namespace serial

CorrelationParams MomentEstimate::params() const {
    CorrelationParams p;
    p.q = q;
    p.u = u_hat;
    p.r = std::sqrt(std::max(r2_hat, 0.0));
    p.alpha = std::max(alpha_hat, 0.0);
    p.beta = beta_hat.value_or(0.0);
    return p;
}

} // namespace pushsum
