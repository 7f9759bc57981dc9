#include "nlvc/bench.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "nlvc/nonlocal_exact.hpp"

namespace nlvc {

namespace {

Tensor random_tensor(int c, int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Tensor t(c, h, w);
    for (double& v : t.data) v = dist(rng);
    return t;
}

double mean_ms(const std::vector<double>& samples) {
    double acc = 0.0;
    for (double s : samples) acc += s;
    return acc / static_cast<double>(samples.size());
}

}  // namespace

double BenchResult::speedup() const {
    if (!exact_ms || !approx_ms || *approx_ms <= 0.0) return 0.0;
    return *exact_ms / *approx_ms;
}

BenchResult run_bench_case(const BenchCase& c) {
    check(c.height >= 1 && c.width >= 1 && c.channels >= 1, "bench: invalid case dimensions");
    check(c.repetitions >= 1, "bench: repetitions must be >= 1");
    c.cfg.validate();

    const std::int64_t n = static_cast<std::int64_t>(c.height) * c.width;
    const Tensor f_prev = random_tensor(c.channels, c.height, c.width, mix_seed(c.seed, 0));
    const Tensor f_cur = random_tensor(c.channels, c.height, c.width, mix_seed(c.seed, 1));
    const Tensor state = random_tensor(c.channels, c.height, c.width, mix_seed(c.seed, 2));

    BenchResult r;
    r.height = c.height;
    r.width = c.width;
    r.channels = c.channels;
    r.repetitions = c.repetitions;
    r.seed = c.seed;
    r.analytic = complexity_estimate(n, c.channels, c.cfg.k, c.cfg.p);

    using clock = std::chrono::steady_clock;
    if (c.run_exact) {
        if (!c.force_exact && c.cfg.max_dense_pixels > 0 && n > c.cfg.max_dense_pixels) {
            const double bytes = 2.0 * static_cast<double>(n) * n * sizeof(double);
            throw std::runtime_error(
                "bench: exact mode at " + std::to_string(n) + " pixels needs about " +
                std::to_string(static_cast<std::uint64_t>(bytes)) +
                " bytes of dense similarity storage; rerun with the exact-mode override");
        }
        std::vector<double> times;
        for (int rep = 0; rep < c.repetitions; ++rep) {
            MacCounter macs;
            const auto t0 = clock::now();
            const Tensor out = nl_attend_streaming(f_prev, f_cur, state, c.cfg.beta, 512,
                                                   c.cfg.threads, rep == 0 ? &r.exact_macs : &macs);
            const auto t1 = clock::now();
            times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            if (out.data.empty()) throw std::runtime_error("bench: empty exact output");
        }
        r.exact_ms = mean_ms(times);
    }
    if (c.run_approx) {
        std::vector<double> times;
        for (int rep = 0; rep < c.repetitions; ++rep) {
            MacCounter macs;
            MacCounter* sink = rep == 0 ? &r.approx_macs : &macs;
            const auto t0 = clock::now();
            const SparseSimilarity sim = approx_similarity(f_prev, f_cur, c.cfg, sink);
            const Tensor out = sparse_nl_warp(state, sim, sink);
            const auto t1 = clock::now();
            times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            if (out.data.empty()) throw std::runtime_error("bench: empty approximate output");
        }
        r.approx_ms = mean_ms(times);
    }
    return r;
}

std::string bench_csv_header() {
    return "height,width,channels,k,p,repetitions,seed,"
           "exact_ms,approx_ms,speedup,"
           "measured_dense_macs,measured_stage1_macs,measured_stage2_macs,measured_approx_macs,"
           "analytic_psi_time,analytic_phi_time,analytic_psi_space,analytic_phi_space,"
           "analytic_ratio,analytic_p_optimal,analytic_ratio_min,"
           "measured_over_psi,measured_over_phi,no_savings";
}

std::string bench_csv_row(const BenchResult& r, bool with_timing) {
    const double exact_ms = with_timing && r.exact_ms ? *r.exact_ms : 0.0;
    const double approx_ms = with_timing && r.approx_ms ? *r.approx_ms : 0.0;
    const double speedup = with_timing ? r.speedup() : 0.0;
    const double over_psi =
        r.exact_macs.dense_total() > 0
            ? static_cast<double>(r.exact_macs.dense_total()) / r.analytic.psi_time
            : 0.0;
    const double over_phi =
        r.approx_macs.approx_total() > 0
            ? static_cast<double>(r.approx_macs.approx_total()) / r.analytic.phi_time
            : 0.0;
    const int no_savings =
        static_cast<double>(r.approx_macs.approx_total()) >= r.analytic.psi_time ? 1 : 0;

    char buf[768];
    std::snprintf(buf, sizeof(buf),
                  "%d,%d,%d,%d,%d,%d,%" PRIu64
                  ",%.6f,%.6f,%.3f,%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64
                  ",%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.9g,%.9g,%d",
                  r.height, r.width, r.channels, r.analytic.k, r.analytic.p, r.repetitions,
                  r.seed, exact_ms, approx_ms, speedup, r.exact_macs.dense_total(),
                  r.approx_macs.stage1_distance, r.approx_macs.stage2_total(),
                  r.approx_macs.approx_total(), r.analytic.psi_time, r.analytic.phi_time,
                  r.analytic.psi_space, r.analytic.phi_space, r.analytic.ratio,
                  r.analytic.p_optimal, r.analytic.ratio_min, over_psi, over_phi, no_savings);
    return std::string(buf);
}

}  // namespace nlvc
