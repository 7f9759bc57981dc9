#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nlvc {

// Contract violations (bad shapes, invalid config) throw std::invalid_argument
// with a descriptive message; runtime faults (I/O, divergence) throw
// std::runtime_error.
inline void check(bool condition, const std::string& message) {
    if (!condition) {
        throw std::invalid_argument(message);
    }
}

// Deterministic 64-bit mix, used to derive per-call seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Multiply-accumulate counters for the non-local kernels. Counts cover the
// distance and warp inner loops only (exp/normalization excluded), matching
// the analytic model's accounting.
struct MacCounter {
    std::uint64_t stage1_distance = 0;  // pooled block distances
    std::uint64_t stage2_distance = 0;  // sparse pixel distances
    std::uint64_t stage2_warp = 0;      // sparse warp
    std::uint64_t dense_distance = 0;   // full-resolution dense distances
    std::uint64_t dense_warp = 0;       // dense warp

    std::uint64_t stage2_total() const { return stage2_distance + stage2_warp; }
    std::uint64_t approx_total() const { return stage1_distance + stage2_total(); }
    std::uint64_t dense_total() const { return dense_distance + dense_warp; }
};

// Runs fn(begin, end) over contiguous chunks of [0, n). With threads <= 1 the
// call is inline. Chunks are disjoint, so writers to disjoint outputs need no
// synchronization; results are independent of the thread count.
inline void parallel_for(int n, int threads,
                         const std::function<void(int, int)>& fn) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        fn(0, n);
        return;
    }
    const int workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int begin = w * chunk;
        const int end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(fn, begin, end);
    }
    for (auto& t : pool) t.join();
}

}  // namespace nlvc
