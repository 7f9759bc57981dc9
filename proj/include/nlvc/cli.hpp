#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nlvc/convlstm.hpp"

namespace nlvc {

struct EnhanceOptions {
    std::string manifest;
    std::string checkpoint;
    std::string output_dir = ".";
    WarpMode mode = WarpMode::approx;
    std::optional<int> k, p, temporal_radius;
    std::optional<double> beta;
    int threads = 1;
    bool all_frames = false;
};

struct BenchOptions {
    std::vector<std::string> sizes;  // "HxW" entries
    int channels = 16;
    int k = 4;
    int p = 10;
    double beta = 1.0;
    std::string mode = "both";  // exact | approx | both
    int repetitions = 1;
    std::uint64_t seed = 1;
    int threads = 1;
    bool force_exact = false;
    bool no_timing = false;  // zero the wall-clock columns (deterministic CSV)
    std::string out_csv;     // optional copy of the CSV
};

struct TrainToyOptions {
    int iterations = 500;
    int batch = 4;
    int patch = 16;
    std::uint64_t seed = 7;
    double lr = 1e-3;
    std::string loss = "norm";  // norm | mse
    WarpMode mode = WarpMode::exact;
    int k = 4, p = 4;
    double beta = 1.0;
    int temporal_radius = 1;
    int clips = 8;
    int height = 32, width = 32;
    int c_f = 8, c_h = 8;
    int log_every = 0;
    std::string checkpoint = "toy.ckpt";
    std::string loss_csv = "toy_loss.csv";
};

struct MetricsOptions {
    std::string manifest_a;  // frames under test
    std::string manifest_b;  // reference frames
    std::string out_csv;     // optional copy of the CSV
};

struct EstimateOptions {
    std::optional<std::int64_t> n;
    int height = 0, width = 0;
    int channels = 64;
    int k = 4;
    int p = 10;
};

int cmd_enhance(const EnhanceOptions& opts);
int cmd_bench(const BenchOptions& opts);
int cmd_train_toy(const TrainToyOptions& opts);
int cmd_metrics(const MetricsOptions& opts);
int cmd_estimate(const EstimateOptions& opts);

// Parses argv (excluding any shell quoting) and dispatches to the command
// functions above. Returns the process exit code; contract violations and
// runtime faults print to stderr and yield a nonzero code.
int run_cli(int argc, const char* const* argv);

}  // namespace nlvc
