#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nlvc/nonlocal_approx.hpp"

namespace nlvc {

// One benchmark configuration: the non-local stage (distance + similarity +
// state warp) over seeded random features of one resolution.
struct BenchCase {
    int height = 0;
    int width = 0;
    int channels = 0;
    NonLocalConfig cfg;
    int repetitions = 1;
    std::uint64_t seed = 1;
    bool run_exact = true;
    bool run_approx = true;
    bool force_exact = false;  // bypass the dense-memory guard
};

// Measured wall time and op counts next to the analytic model for the same
// inputs. The analytic fields are exactly complexity_estimate's outputs.
struct BenchResult {
    int height = 0;
    int width = 0;
    int channels = 0;
    int repetitions = 0;
    std::uint64_t seed = 0;
    std::optional<double> exact_ms;   // mean per repetition
    std::optional<double> approx_ms;
    MacCounter exact_macs;   // one repetition's counts
    MacCounter approx_macs;
    ComplexityEstimate analytic;

    double speedup() const;  // exact time / approximate time
};

BenchResult run_bench_case(const BenchCase& c);

// CSV shape shared by the CLI and tests. `with_timing=false` zeroes the
// wall-clock columns so the emitted file is bit-deterministic.
std::string bench_csv_header();
std::string bench_csv_row(const BenchResult& r, bool with_timing = true);

}  // namespace nlvc
