#include "nlvc/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "nlvc/bench.hpp"
#include "nlvc/checkpoint.hpp"
#include "nlvc/frame_io.hpp"
#include "nlvc/metrics.hpp"
#include "nlvc/training.hpp"

namespace nlvc {

namespace fs = std::filesystem;

namespace {

WarpMode parse_mode(const std::string& s) {
    if (s == "exact") return WarpMode::exact;
    if (s == "approx") return WarpMode::approx;
    throw std::invalid_argument("mode must be 'exact' or 'approx', got '" + s + "'");
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write to " + path + " failed");
}

std::string format_double(double v, int precision = 10) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

}  // namespace

int cmd_enhance(const EnhanceOptions& opts) {
    const SequenceManifest manifest = load_manifest(opts.manifest);
    const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
    check(manifest.channels == ckpt.params.config.c_in,
          "enhance: manifest frames have " + std::to_string(manifest.channels) +
              " channels but the checkpoint expects " +
              std::to_string(ckpt.params.config.c_in));

    const std::vector<Tensor> frames = load_frames(manifest);
    const int total = static_cast<int>(frames.size());
    int start = 0;
    int window = total;
    if (opts.temporal_radius) {
        check(*opts.temporal_radius >= 0, "enhance: negative temporal radius");
        window = 2 * *opts.temporal_radius + 1;
        check(window <= total, "enhance: sequence has " + std::to_string(total) +
                                   " frames, fewer than the requested " +
                                   std::to_string(window));
        start = (total - window) / 2;
    } else {
        check(total % 2 == 1,
              "enhance: frame count must be odd (or pass --T to pick a window)");
    }

    NonLocalConfig nl = ckpt.nl;
    if (opts.k) nl.k = *opts.k;
    if (opts.p) nl.p = *opts.p;
    if (opts.beta) nl.beta = *opts.beta;
    nl.threads = opts.threads;
    nl.validate();

    FrameSequence seq;
    seq.frames.assign(frames.begin() + start, frames.begin() + start + window);
    seq.target_index = window / 2;
    const int global_target = start + seq.target_index;

    fs::create_directories(opts.output_dir);
    const auto out_path = [&](int global_idx) {
        return fs::path(opts.output_dir) /
               ("enhanced_" + fs::path(manifest.frames[global_idx]).filename().string());
    };

    std::vector<Tensor> enhanced_window;
    if (opts.all_frames) {
        enhanced_window = enhance_all(seq, ckpt.params, nl, opts.mode);
        for (int i = 0; i < window; ++i) {
            save_raw_frame(out_path(start + i), enhanced_window[i]);
            std::printf("wrote %s\n", out_path(start + i).string().c_str());
        }
    } else {
        enhanced_window.push_back(enhance(seq, ckpt.params, nl, opts.mode));
        save_raw_frame(out_path(global_target), enhanced_window.front());
        std::printf("wrote %s\n", out_path(global_target).string().c_str());
    }

    if (!manifest.ground_truth.empty()) {
        const Tensor truth = load_raw_frame(manifest.base_dir / manifest.ground_truth[global_target],
                                            manifest.channels, manifest.height, manifest.width);
        const Tensor& input = frames[global_target];
        const Tensor& output =
            opts.all_frames ? enhanced_window[seq.target_index] : enhanced_window.front();
        const double psnr_in = psnr(input, truth);
        const double psnr_out = psnr(output, truth);
        const double ssim_in = ssim(input, truth);
        const double ssim_out = ssim(output, truth);
        std::printf("psnr_input=%s\n", format_double(psnr_in).c_str());
        std::printf("psnr_enhanced=%s\n", format_double(psnr_out).c_str());
        std::printf("delta_psnr=%s\n", format_double(psnr_out - psnr_in).c_str());
        std::printf("ssim_input=%s\n", format_double(ssim_in).c_str());
        std::printf("ssim_enhanced=%s\n", format_double(ssim_out).c_str());
        std::printf("delta_ssim=%s\n", format_double(ssim_out - ssim_in).c_str());
    }
    return 0;
}

int cmd_bench(const BenchOptions& opts) {
    check(!opts.sizes.empty(), "bench: at least one HxW size is required");
    check(opts.mode == "both" || opts.mode == "exact" || opts.mode == "approx",
          "bench: mode must be exact, approx, or both");

    std::string csv = bench_csv_header() + "\n";
    for (std::size_t i = 0; i < opts.sizes.size(); ++i) {
        const std::string& s = opts.sizes[i];
        const auto sep = s.find('x');
        check(sep != std::string::npos && sep > 0 && sep + 1 < s.size(),
              "bench: size '" + s + "' is not of the form HxW");
        BenchCase c;
        try {
            c.height = std::stoi(s.substr(0, sep));
            c.width = std::stoi(s.substr(sep + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("bench: size '" + s + "' is not of the form HxW");
        }
        c.channels = opts.channels;
        c.cfg.k = opts.k;
        c.cfg.p = opts.p;
        c.cfg.beta = opts.beta;
        c.cfg.threads = opts.threads;
        c.repetitions = opts.repetitions;
        c.seed = mix_seed(opts.seed, i);
        c.run_exact = opts.mode != "approx";
        c.run_approx = opts.mode != "exact";
        c.force_exact = opts.force_exact;
        csv += bench_csv_row(run_bench_case(c), !opts.no_timing) + "\n";
    }
    std::fputs(csv.c_str(), stdout);
    if (!opts.out_csv.empty()) write_text_file(opts.out_csv, csv);
    return 0;
}

int cmd_train_toy(const TrainToyOptions& opts) {
    ToyDatasetConfig dc;
    dc.clips = opts.clips;
    dc.frames_per_clip = 2 * opts.temporal_radius + 1;
    dc.height = opts.height;
    dc.width = opts.width;
    dc.seed = opts.seed;
    const ToyDataset data = make_toy_dataset(dc);

    TrainConfig tc;
    tc.model.c_in = 1;
    tc.model.c_f = opts.c_f;
    tc.model.c_h = opts.c_h;
    tc.model.temporal_radius = opts.temporal_radius;
    tc.nl.k = opts.k;
    tc.nl.p = opts.p;
    tc.nl.beta = opts.beta;
    tc.mode = opts.mode;
    tc.loss = opts.loss == "mse" ? LossKind::mse : LossKind::norm;
    check(opts.loss == "norm" || opts.loss == "mse", "train-toy: loss must be norm or mse");
    tc.adam.lr = opts.lr;
    tc.iterations = opts.iterations;
    tc.batch_size = opts.batch;
    tc.patch = opts.patch;
    tc.seed = opts.seed;
    tc.log_every = opts.log_every;

    const TrainResult result = train_toy(data, tc);
    save_checkpoint(opts.checkpoint, result.params, tc.nl, &result.adam);

    std::string csv = "iteration,loss\n";
    for (std::size_t i = 0; i < result.losses.size(); ++i) {
        csv += std::to_string(i) + "," + format_double(result.losses[i], 17) + "\n";
    }
    write_text_file(opts.loss_csv, csv);
    std::printf("checkpoint=%s\n", opts.checkpoint.c_str());
    std::printf("loss_csv=%s\n", opts.loss_csv.c_str());

    if (!result.losses.empty()) {
        const std::vector<double> smoothed = smooth_curve(result.losses, 20);
        const std::size_t head = std::min<std::size_t>(smoothed.size(), 20) - 1;
        std::printf("loss_initial_smoothed=%s\n", format_double(smoothed[head]).c_str());
        std::printf("loss_final_smoothed=%s\n", format_double(smoothed.back()).c_str());
    }

    ToyDatasetConfig ec = dc;
    ec.clips = 4;
    ec.seed = mix_seed(dc.seed, 0x48454c44);  // held-out clips, disjoint from training
    const ToyDataset held_out = make_toy_dataset(ec);
    const ToyEvaluation eval = evaluate_toy(result.params, held_out, tc.nl, tc.mode);
    std::printf("heldout_psnr_degraded=%s\n", format_double(eval.psnr_degraded).c_str());
    std::printf("heldout_psnr_enhanced=%s\n", format_double(eval.psnr_enhanced).c_str());
    std::printf("heldout_delta_psnr=%s\n", format_double(eval.delta()).c_str());
    return 0;
}

int cmd_metrics(const MetricsOptions& opts) {
    const SequenceManifest ma = load_manifest(opts.manifest_a);
    const SequenceManifest mb = load_manifest(opts.manifest_b);
    check(ma.width == mb.width && ma.height == mb.height && ma.channels == mb.channels,
          "metrics: manifests disagree on frame dimensions");
    check(ma.frames.size() == mb.frames.size(),
          "metrics: manifests disagree on frame count");

    const std::vector<Tensor> fa = load_frames(ma);
    const std::vector<Tensor> fb = load_frames(mb);

    QualityCurve psnr_curve;  // finite entries only; sentinel frames excluded
    QualityCurve ssim_curve;
    std::string csv = "frame,psnr,ssim\n";
    for (std::size_t i = 0; i < fa.size(); ++i) {
        const double p = psnr(fa[i], fb[i]);
        const double s = ssim(fa[i], fb[i]);
        if (std::isfinite(p)) psnr_curve.push_back(p);
        ssim_curve.push_back(s);
        csv += std::to_string(i) + "," + format_double(p) + "," + format_double(s) + "\n";
    }

    const auto pvd_text = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string("absent");
    };
    const double psnr_std = psnr_curve.empty() ? 0.0 : curve_stddev(psnr_curve);
    const std::optional<double> psnr_pvd = peak_valley_diff(psnr_curve);
    const FluctuationStats ssim_stats = fluctuation(ssim_curve);
    csv += "summary,psnr_std," + format_double(psnr_std) + "\n";
    csv += "summary,psnr_pvd," + pvd_text(psnr_pvd) + "\n";
    csv += "summary,ssim_std," + format_double(ssim_stats.stddev) + "\n";
    csv += "summary,ssim_pvd," + pvd_text(ssim_stats.pvd) + "\n";

    std::fputs(csv.c_str(), stdout);
    if (!opts.out_csv.empty()) write_text_file(opts.out_csv, csv);
    return 0;
}

int cmd_estimate(const EstimateOptions& opts) {
    std::int64_t n = 0;
    if (opts.n) {
        n = *opts.n;
    } else {
        check(opts.height >= 1 && opts.width >= 1,
              "estimate: pass --n or both --height and --width");
        n = static_cast<std::int64_t>(opts.height) * opts.width;
    }
    const ComplexityEstimate e = complexity_estimate(n, opts.channels, opts.k, opts.p);
    std::printf("n=%lld\n", static_cast<long long>(e.n));
    std::printf("channels=%d\n", e.c);
    std::printf("k=%d\n", e.k);
    std::printf("p=%d\n", e.p);
    std::printf("psi_time=%s\n", format_double(e.psi_time, 12).c_str());
    std::printf("phi_time=%s\n", format_double(e.phi_time, 12).c_str());
    std::printf("psi_space=%s\n", format_double(e.psi_space, 12).c_str());
    std::printf("phi_space=%s\n", format_double(e.phi_space, 12).c_str());
    std::printf("ratio=%s\n", format_double(e.ratio, 12).c_str());
    std::printf("p_optimal=%s\n", format_double(e.p_optimal, 12).c_str());
    std::printf("ratio_min=%s\n", format_double(e.ratio_min, 12).c_str());
    return 0;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Non-local ConvLSTM toolkit for compressed-video artifact reduction"};
    app.require_subcommand(1);

    EnhanceOptions enhance_opts;
    std::string enhance_mode = "approx";
    CLI::App* enhance = app.add_subcommand("enhance", "Enhance a frame sequence");
    enhance->add_option("--manifest", enhance_opts.manifest, "Sequence manifest (JSON)")
        ->required();
    enhance->add_option("--checkpoint", enhance_opts.checkpoint, "Model checkpoint")->required();
    enhance->add_option("--output", enhance_opts.output_dir, "Output directory");
    enhance->add_option("--mode", enhance_mode, "exact | approx");
    enhance->add_option("--k", enhance_opts.k, "Candidate blocks per target block");
    enhance->add_option("--p", enhance_opts.p, "Pooling block size");
    enhance->add_option("--beta", enhance_opts.beta, "Softmax temperature");
    enhance->add_option("--T", enhance_opts.temporal_radius, "Temporal radius (window 2T+1)");
    enhance->add_option("--threads", enhance_opts.threads, "Worker threads");
    enhance->add_flag("--all-frames", enhance_opts.all_frames, "Write every window frame");

    BenchOptions bench_opts;
    CLI::App* bench = app.add_subcommand("bench", "Benchmark the non-local stage");
    bench->add_option("--sizes", bench_opts.sizes, "Resolutions, e.g. 64x64 120x120")
        ->required()
        ->delimiter(',');
    bench->add_option("--channels", bench_opts.channels, "Feature channels");
    bench->add_option("--k", bench_opts.k, "Candidate blocks per target block");
    bench->add_option("--p", bench_opts.p, "Pooling block size");
    bench->add_option("--beta", bench_opts.beta, "Softmax temperature");
    bench->add_option("--mode", bench_opts.mode, "exact | approx | both");
    bench->add_option("--reps", bench_opts.repetitions, "Repetitions per case");
    bench->add_option("--seed", bench_opts.seed, "Feature seed");
    bench->add_option("--threads", bench_opts.threads, "Worker threads (1 for fair timing)");
    bench->add_flag("--force-exact", bench_opts.force_exact,
                    "Run exact mode past the dense-memory guard");
    bench->add_flag("--no-timing", bench_opts.no_timing,
                    "Zero wall-clock columns for bit-reproducible CSV");
    bench->add_option("--out", bench_opts.out_csv, "Also write the CSV here");

    TrainToyOptions train_opts;
    std::string train_mode = "exact";
    CLI::App* train = app.add_subcommand("train-toy", "Train on the synthetic toy dataset");
    train->add_option("--iterations", train_opts.iterations, "Optimizer steps");
    train->add_option("--batch", train_opts.batch, "Patches per step");
    train->add_option("--patch", train_opts.patch, "Square patch size");
    train->add_option("--seed", train_opts.seed, "Master seed");
    train->add_option("--lr", train_opts.lr, "ADAM learning rate");
    train->add_option("--loss", train_opts.loss, "norm | mse");
    train->add_option("--mode", train_mode, "exact | approx");
    train->add_option("--k", train_opts.k, "Candidate blocks per target block");
    train->add_option("--p", train_opts.p, "Pooling block size");
    train->add_option("--beta", train_opts.beta, "Softmax temperature");
    train->add_option("--T", train_opts.temporal_radius, "Temporal radius");
    train->add_option("--clips", train_opts.clips, "Training clips");
    train->add_option("--height", train_opts.height, "Frame height");
    train->add_option("--width", train_opts.width, "Frame width");
    train->add_option("--cf", train_opts.c_f, "Encoder feature channels");
    train->add_option("--ch", train_opts.c_h, "Recurrent state channels");
    train->add_option("--log-every", train_opts.log_every, "Progress print period");
    train->add_option("--checkpoint", train_opts.checkpoint, "Checkpoint output path");
    train->add_option("--loss-csv", train_opts.loss_csv, "Loss curve output path");

    MetricsOptions metrics_opts;
    CLI::App* metrics = app.add_subcommand("metrics", "Per-frame PSNR/SSIM plus fluctuation");
    metrics->add_option("--a", metrics_opts.manifest_a, "Manifest of frames under test")
        ->required();
    metrics->add_option("--b", metrics_opts.manifest_b, "Manifest of reference frames")
        ->required();
    metrics->add_option("--out", metrics_opts.out_csv, "Also write the CSV here");

    EstimateOptions est_opts;
    CLI::App* estimate = app.add_subcommand("estimate", "Print the analytic complexity model");
    estimate->add_option("--n", est_opts.n, "Pixel count N");
    estimate->add_option("--height", est_opts.height, "Frame height (alternative to --n)");
    estimate->add_option("--width", est_opts.width, "Frame width (alternative to --n)");
    estimate->add_option("--channels", est_opts.channels, "Feature channels");
    estimate->add_option("--k", est_opts.k, "Candidate blocks per target block");
    estimate->add_option("--p", est_opts.p, "Pooling block size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (enhance->parsed()) {
            enhance_opts.mode = parse_mode(enhance_mode);
            return cmd_enhance(enhance_opts);
        }
        if (bench->parsed()) return cmd_bench(bench_opts);
        if (train->parsed()) {
            train_opts.mode = parse_mode(train_mode);
            return cmd_train_toy(train_opts);
        }
        if (metrics->parsed()) return cmd_metrics(metrics_opts);
        if (estimate->parsed()) return cmd_estimate(est_opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no command given\n";
    return 1;
}

}  // namespace nlvc
