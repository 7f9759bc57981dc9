#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nlvc/checkpoint.hpp"
#include "nlvc/cli.hpp"
#include "nlvc/frame_io.hpp"
#include "nlvc/nonlocal_approx.hpp"

using namespace nlvc;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case, removed up front so reruns are clean.
fs::path scratch(const std::string& name) {
    const fs::path dir = fs::path("cli_scratch") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"nlvc"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

// Runs the CLI with stdout redirected into a string (POSIX fd swap).
int run_capture(const std::vector<std::string>& args, std::string& output,
                const fs::path& dir) {
    const fs::path tmp = dir / "stdout.txt";
    std::fflush(stdout);
    const int saved = dup(fileno(stdout));
    REQUIRE(saved >= 0);
    FILE* redirected = std::freopen(tmp.string().c_str(), "w", stdout);
    REQUIRE(redirected != nullptr);
    const int rc = run(args);
    std::fflush(stdout);
    dup2(saved, fileno(stdout));
    close(saved);
    output = read_text(tmp);
    return rc;
}

Tensor random_frame(int c, int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Tensor t(c, h, w);
    for (double& v : t.data) v = dist(rng);
    return t;
}

// Writes frames (and optional ground truth) plus a manifest; returns its path.
fs::path write_sequence(const fs::path& dir, const std::string& name,
                        const std::vector<Tensor>& frames,
                        const std::vector<Tensor>& truth = {}) {
    SequenceManifest manifest;
    manifest.width = frames.at(0).width;
    manifest.height = frames.at(0).height;
    manifest.channels = frames.at(0).channels;
    manifest.base_dir = dir;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::string file = name + "_f" + std::to_string(i) + ".raw";
        save_raw_frame(dir / file, frames[i]);
        manifest.frames.push_back(file);
    }
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const std::string file = name + "_g" + std::to_string(i) + ".raw";
        save_raw_frame(dir / file, truth[i]);
        manifest.ground_truth.push_back(file);
    }
    const fs::path path = dir / (name + ".json");
    save_manifest(path.string(), manifest);
    return path;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
    return lines;
}

}  // namespace

TEST_CASE("raw frames map bytes linearly and round-trip exactly") {
    const fs::path dir = scratch("raw_roundtrip");
    const fs::path path = dir / "probe.raw";
    {
        std::ofstream out(path, std::ios::binary);
        const unsigned char bytes[4] = {0, 255, 128, 1};
        out.write(reinterpret_cast<const char*>(bytes), 4);
    }
    const Tensor t = load_raw_frame(path, 1, 2, 2);
    CHECK(t.data[0] == 0.0);
    CHECK(t.data[1] == 1.0);
    CHECK(t.data[2] == doctest::Approx(128.0 / 255.0));
    CHECK(t.data[3] == doctest::Approx(1.0 / 255.0));

    const fs::path copy = dir / "copy.raw";
    save_raw_frame(copy, t);
    CHECK(read_bytes(copy) == read_bytes(path));

    // saving clamps out-of-range values to the byte range
    Tensor wild = Tensor::from(1, 1, 2, {-0.4, 1.7});
    save_raw_frame(copy, wild);
    const std::vector<unsigned char> bytes = read_bytes(copy);
    CHECK(bytes[0] == 0);
    CHECK(bytes[1] == 255);
}

TEST_CASE("short or missing frame files are reported with byte counts") {
    const fs::path dir = scratch("io_errors");
    CHECK_THROWS_AS(load_raw_frame(dir / "absent.raw", 1, 4, 4), std::runtime_error);

    const fs::path shortfile = dir / "short.raw";
    {
        std::ofstream out(shortfile, std::ios::binary);
        out << "abc";
    }
    bool mentioned_bytes = false;
    try {
        load_raw_frame(shortfile, 1, 4, 4);
    } catch (const std::runtime_error& e) {
        mentioned_bytes = std::string(e.what()).find("16") != std::string::npos;
    }
    CHECK(mentioned_bytes);
}

TEST_CASE("manifests round-trip and validate their frame files") {
    const fs::path dir = scratch("manifest");
    std::vector<Tensor> frames;
    for (int i = 0; i < 3; ++i) frames.push_back(random_frame(1, 6, 5, 10 + i));
    const fs::path path = write_sequence(dir, "seq", frames, frames);

    const SequenceManifest m = load_manifest(path.string());
    CHECK(m.width == 5);
    CHECK(m.height == 6);
    CHECK(m.channels == 1);
    CHECK(m.bit_depth == 8);
    CHECK(m.frames.size() == 3);
    CHECK(m.ground_truth.size() == 3);
    CHECK(m.frame_bytes() == 30);

    const std::vector<Tensor> loaded = load_frames(m);
    REQUIRE(loaded.size() == 3);
    for (std::size_t f = 0; f < 3; ++f) {
        for (std::size_t i = 0; i < loaded[f].data.size(); ++i) {
            // quantization to bytes, then reload: within half a level
            CHECK(std::abs(loaded[f].data[i] - frames[f].data[i]) <= 0.5 / 255.0 + 1e-12);
        }
    }

    const FrameSequence seq = load_sequence(path.string());
    CHECK(seq.frames.size() == 3);
    CHECK(seq.target_index == 1);
}

TEST_CASE("manifest validation failures carry actionable messages") {
    const fs::path dir = scratch("manifest_bad");
    std::vector<Tensor> frames{random_frame(1, 4, 4, 1), random_frame(1, 4, 4, 2),
                               random_frame(1, 4, 4, 3)};
    const fs::path path = write_sequence(dir, "seq", frames);

    // delete one referenced frame: the loader must name it and the byte count
    fs::remove(dir / "seq_f1.raw");
    bool informative = false;
    try {
        load_manifest(path.string());
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        informative = what.find("seq_f1.raw") != std::string::npos &&
                      what.find("16") != std::string::npos;
    }
    CHECK(informative);

    // malformed JSON
    const fs::path bad = dir / "bad.json";
    {
        std::ofstream out(bad);
        out << "{ not json";
    }
    CHECK_THROWS_AS(load_manifest(bad.string()), std::runtime_error);

    // ground truth must pair one-to-one with frames
    SequenceManifest mismatched;
    mismatched.width = 4;
    mismatched.height = 4;
    mismatched.frames = {"a.raw", "b.raw"};
    mismatched.ground_truth = {"g.raw"};
    CHECK_THROWS_AS(mismatched.validate(), std::invalid_argument);

    // even-length sequences cannot be center-targeted
    std::vector<Tensor> even{random_frame(1, 4, 4, 4), random_frame(1, 4, 4, 5)};
    const fs::path even_path = write_sequence(dir, "even", even);
    CHECK_THROWS_AS(load_sequence(even_path.string()), std::invalid_argument);
}

TEST_CASE("enhancing with a zero checkpoint reproduces the input bytes") {
    const fs::path dir = scratch("enhance_zero");
    std::vector<Tensor> frames;
    for (int i = 0; i < 3; ++i) frames.push_back(random_frame(1, 16, 16, 20 + i));
    const fs::path manifest = write_sequence(dir, "seq", frames);

    ModelConfig model;
    model.c_f = 3;
    model.c_h = 3;
    model.temporal_radius = 1;
    model.encoder_layers = 2;
    model.decoder_hidden_layers = 1;
    NonLocalConfig nl;
    nl.p = 8;
    nl.k = 2;
    const fs::path ckpt = dir / "zero.ckpt";
    save_checkpoint(ckpt.string(), zero_network_params(model), nl, nullptr);

    const fs::path out_dir = dir / "out";
    CHECK(run({"enhance", "--manifest", manifest.string(), "--checkpoint", ckpt.string(),
               "--output", out_dir.string()}) == 0);
    CHECK(read_bytes(out_dir / "enhanced_seq_f1.raw") == read_bytes(dir / "seq_f1.raw"));
}

TEST_CASE("exact and exhaustive approximate enhancement agree to one intensity level") {
    const fs::path dir = scratch("enhance_modes");
    std::vector<Tensor> frames;
    for (int i = 0; i < 3; ++i) frames.push_back(random_frame(1, 16, 16, 30 + i));
    const fs::path manifest = write_sequence(dir, "seq", frames);

    ModelConfig model;
    model.c_f = 3;
    model.c_h = 3;
    model.temporal_radius = 1;
    model.encoder_layers = 2;
    model.decoder_hidden_layers = 1;
    NonLocalConfig nl;
    nl.p = 8;
    nl.k = 4;  // 16x16 with p=8: a 2x2 grid, so k=4 is exhaustive
    const fs::path ckpt = dir / "net.ckpt";
    save_checkpoint(ckpt.string(), init_network_params(model, 99), nl, nullptr);

    CHECK(run({"enhance", "--manifest", manifest.string(), "--checkpoint", ckpt.string(),
               "--output", (dir / "exact").string(), "--mode", "exact"}) == 0);
    CHECK(run({"enhance", "--manifest", manifest.string(), "--checkpoint", ckpt.string(),
               "--output", (dir / "approx").string(), "--mode", "approx"}) == 0);

    const std::vector<unsigned char> a = read_bytes(dir / "exact" / "enhanced_seq_f1.raw");
    const std::vector<unsigned char> b = read_bytes(dir / "approx" / "enhanced_seq_f1.raw");
    REQUIRE(a.size() == b.size());
    int worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<int>(a[i]) - static_cast<int>(b[i])));
    }
    CHECK(worst <= 1);
}

TEST_CASE("enhancement prints quality metrics only when ground truth exists") {
    const fs::path dir = scratch("enhance_gt");
    std::vector<Tensor> frames, truth;
    for (int i = 0; i < 3; ++i) {
        frames.push_back(random_frame(1, 16, 16, 40 + i));
        truth.push_back(random_frame(1, 16, 16, 50 + i));
    }
    const fs::path with_gt = write_sequence(dir, "gt", frames, truth);
    const fs::path without_gt = write_sequence(dir, "plain", frames);

    ModelConfig model;
    model.c_f = 3;
    model.c_h = 3;
    model.temporal_radius = 1;
    model.encoder_layers = 2;
    model.decoder_hidden_layers = 1;
    const fs::path ckpt = dir / "net.ckpt";
    NonLocalConfig nl;
    nl.p = 8;
    nl.k = 2;
    save_checkpoint(ckpt.string(), zero_network_params(model), nl, nullptr);

    std::string out;
    CHECK(run_capture({"enhance", "--manifest", with_gt.string(), "--checkpoint", ckpt.string(),
                       "--output", (dir / "o1").string()},
                      out, dir) == 0);
    CHECK(out.find("psnr_enhanced=") != std::string::npos);
    CHECK(out.find("delta_ssim=") != std::string::npos);

    CHECK(run_capture({"enhance", "--manifest", without_gt.string(), "--checkpoint",
                       ckpt.string(), "--output", (dir / "o2").string()},
                      out, dir) == 0);
    CHECK(out.find("psnr") == std::string::npos);
    CHECK(out.find("wrote") != std::string::npos);
}

TEST_CASE("the --all-frames flag writes one enhanced file per window frame") {
    const fs::path dir = scratch("enhance_all");
    std::vector<Tensor> frames;
    for (int i = 0; i < 5; ++i) frames.push_back(random_frame(1, 16, 16, 60 + i));
    const fs::path manifest = write_sequence(dir, "seq", frames);

    ModelConfig model;
    model.c_f = 3;
    model.c_h = 3;
    model.temporal_radius = 1;
    model.encoder_layers = 2;
    model.decoder_hidden_layers = 1;
    NonLocalConfig nl;
    nl.p = 8;
    nl.k = 2;
    const fs::path ckpt = dir / "net.ckpt";
    save_checkpoint(ckpt.string(), zero_network_params(model), nl, nullptr);

    // --T 1 picks the centered 3-frame window out of 5
    const fs::path out_dir = dir / "out";
    CHECK(run({"enhance", "--manifest", manifest.string(), "--checkpoint", ckpt.string(),
               "--output", out_dir.string(), "--T", "1", "--all-frames"}) == 0);
    CHECK(fs::exists(out_dir / "enhanced_seq_f1.raw"));
    CHECK(fs::exists(out_dir / "enhanced_seq_f2.raw"));
    CHECK(fs::exists(out_dir / "enhanced_seq_f3.raw"));
    CHECK_FALSE(fs::exists(out_dir / "enhanced_seq_f0.raw"));
    CHECK_FALSE(fs::exists(out_dir / "enhanced_seq_f4.raw"));
}

TEST_CASE("benchmark CSV carries the analytic model bit-exactly and flags no-savings runs") {
    const fs::path dir = scratch("bench");
    const fs::path csv_path = dir / "bench.csv";
    CHECK(run({"bench", "--sizes", "16x16", "--channels", "2", "--k", "4", "--p", "8",
               "--mode", "both", "--no-timing", "--out", csv_path.string()}) == 0);

    const std::vector<std::string> lines = split_lines(read_text(csv_path));
    REQUIRE(lines.size() == 2);
    const std::vector<std::string> header = split_csv_line(lines[0]);
    const std::vector<std::string> row = split_csv_line(lines[1]);
    REQUIRE(header.size() == row.size());

    const auto field = [&](const std::string& name) -> std::string {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return row[i];
        }
        FAIL("missing column ", name);
        return "";
    };

    // k = all blocks at p = 8 on 16x16: the approximation cannot win
    CHECK(field("no_savings") == "1");
    CHECK(std::stoull(field("measured_approx_macs")) >=
          std::stoull(field("measured_dense_macs")));
    // --no-timing zeroes the wall-clock columns
    CHECK(std::stod(field("exact_ms")) == 0.0);
    CHECK(std::stod(field("approx_ms")) == 0.0);

    // analytic columns round-trip to the exact model values
    const ComplexityEstimate est = complexity_estimate(16 * 16, 2, 4, 8);
    CHECK(std::stod(field("analytic_psi_time")) == est.psi_time);
    CHECK(std::stod(field("analytic_phi_time")) == est.phi_time);
    CHECK(std::stod(field("analytic_ratio")) == est.ratio);
    CHECK(std::stod(field("analytic_p_optimal")) == est.p_optimal);
    CHECK(std::stod(field("analytic_ratio_min")) == est.ratio_min);

    // a config with genuine savings clears the flag
    const fs::path csv2 = dir / "bench2.csv";
    CHECK(run({"bench", "--sizes", "32x32", "--channels", "2", "--k", "2", "--p", "4",
               "--mode", "both", "--no-timing", "--out", csv2.string()}) == 0);
    const std::vector<std::string> lines2 = split_lines(read_text(csv2));
    REQUIRE(lines2.size() == 2);
    CHECK(split_csv_line(lines2[1]).back() == "0");
}

TEST_CASE("benchmark CSVs are bit-identical across reruns without timing") {
    const fs::path dir = scratch("bench_repro");
    const fs::path a = dir / "a.csv";
    const fs::path b = dir / "b.csv";
    const std::vector<std::string> args{"bench", "--sizes", "24x24,16x16", "--channels", "3",
                                        "--k",   "2",       "--p",        "4",
                                        "--seed", "9",      "--no-timing"};
    std::vector<std::string> run_a = args;
    run_a.insert(run_a.end(), {"--out", a.string()});
    std::vector<std::string> run_b = args;
    run_b.insert(run_b.end(), {"--out", b.string()});
    CHECK(run(run_a) == 0);
    CHECK(run(run_b) == 0);
    CHECK(read_text(a) == read_text(b));
    CHECK(split_lines(read_text(a)).size() == 3);  // header + one row per size
}

TEST_CASE("the benchmark refuses dense frames beyond the memory guard") {
    const fs::path dir = scratch("bench_guard");
    // 80x80 = 6400 pixels exceeds the 4096-pixel dense guard
    CHECK(run({"bench", "--sizes", "80x80", "--channels", "2", "--mode", "exact"}) != 0);
    CHECK(run({"bench", "--sizes", "80x80", "--channels", "2", "--mode", "exact",
               "--force-exact", "--no-timing"}) == 0);
    // approx mode is unaffected by the guard
    CHECK(run({"bench", "--sizes", "80x80", "--channels", "2", "--mode", "approx",
               "--no-timing"}) == 0);
}

TEST_CASE("toy training writes a reproducible loss curve and a loadable checkpoint") {
    const fs::path dir = scratch("train");
    const auto train_args = [&](const std::string& tag) {
        return std::vector<std::string>{
            "train-toy",      "--iterations", "3",
            "--batch",        "1",            "--patch",
            "8",              "--height",     "16",
            "--width",        "16",           "--clips",
            "2",              "--cf",         "3",
            "--ch",           "3",            "--T",
            "1",              "--k",          "2",
            "--p",            "4",            "--checkpoint",
            (dir / (tag + ".ckpt")).string(), "--loss-csv",
            (dir / (tag + ".csv")).string()};
    };
    CHECK(run(train_args("a")) == 0);
    CHECK(run(train_args("b")) == 0);
    const std::string csv_a = read_text(dir / "a.csv");
    CHECK(csv_a == read_text(dir / "b.csv"));
    CHECK(split_lines(csv_a).size() == 4);  // header + 3 iterations
    CHECK(split_lines(csv_a)[0] == "iteration,loss");

    const Checkpoint ckpt = load_checkpoint((dir / "a.ckpt").string());
    CHECK(ckpt.params.config.c_f == 3);
    CHECK(ckpt.params.config.temporal_radius == 1);
    CHECK(ckpt.nl.k == 2);
    REQUIRE(ckpt.adam.has_value());
    CHECK(ckpt.adam->step == 3);
}

TEST_CASE("metrics of identical sequences yield sentinel rows and zero deviation") {
    const fs::path dir = scratch("metrics_same");
    std::vector<Tensor> frames;
    for (int i = 0; i < 3; ++i) frames.push_back(random_frame(1, 16, 16, 70 + i));
    const fs::path a = write_sequence(dir, "a", frames);
    const fs::path b = write_sequence(dir, "b", frames);

    const fs::path csv_path = dir / "metrics.csv";
    CHECK(run({"metrics", "--a", a.string(), "--b", b.string(), "--out",
               csv_path.string()}) == 0);
    const std::vector<std::string> lines = split_lines(read_text(csv_path));
    REQUIRE(lines.size() == 8);  // header + 3 frames + 4 summary rows
    CHECK(lines[0] == "frame,psnr,ssim");
    for (int i = 1; i <= 3; ++i) {
        const std::vector<std::string> row = split_csv_line(lines[static_cast<std::size_t>(i)]);
        REQUIRE(row.size() == 3);
        CHECK(row[1] == "inf");
        CHECK(std::stod(row[2]) == 1.0);
    }
    CHECK(lines[4] == "summary,psnr_std,0");
    CHECK(lines[5] == "summary,psnr_pvd,absent");
    CHECK(lines[6] == "summary,ssim_std,0");
    CHECK(lines[7] == "summary,ssim_pvd,0");
}

TEST_CASE("single-frame metrics mark the fluctuation as absent") {
    const fs::path dir = scratch("metrics_single");
    const std::vector<Tensor> a_frames{random_frame(1, 16, 16, 80)};
    const std::vector<Tensor> b_frames{random_frame(1, 16, 16, 81)};
    const fs::path a = write_sequence(dir, "a", a_frames);
    const fs::path b = write_sequence(dir, "b", b_frames);

    const fs::path csv_path = dir / "metrics.csv";
    CHECK(run({"metrics", "--a", a.string(), "--b", b.string(), "--out",
               csv_path.string()}) == 0);
    const std::vector<std::string> lines = split_lines(read_text(csv_path));
    REQUIRE(lines.size() == 6);
    CHECK(lines[2] == "summary,psnr_std,0");
    CHECK(lines[3] == "summary,psnr_pvd,absent");
    CHECK(lines[5] == "summary,ssim_pvd,absent");
}

TEST_CASE("metrics demand matching shapes and frame counts") {
    const fs::path dir = scratch("metrics_bad");
    const fs::path a = write_sequence(dir, "a", {random_frame(1, 16, 16, 90)});
    const fs::path b = write_sequence(dir, "b", {random_frame(1, 16, 12, 91)});
    CHECK(run({"metrics", "--a", a.string(), "--b", b.string()}) != 0);

    const fs::path c =
        write_sequence(dir, "c", {random_frame(1, 16, 16, 92), random_frame(1, 16, 16, 93)});
    CHECK(run({"metrics", "--a", a.string(), "--b", c.string()}) != 0);
}

TEST_CASE("the complexity estimate prints the published full-HD savings ratio") {
    const fs::path dir = scratch("estimate");
    std::string out;
    CHECK(run_capture({"estimate", "--height", "1080", "--width", "1920", "--k", "4", "--p",
                       "10"},
                      out, dir) == 0);
    CHECK(out.find("n=2073600") != std::string::npos);
    CHECK(out.find("ratio=0.000242901234568") != std::string::npos);
    CHECK(out.find("p_optimal=") != std::string::npos);

    // --n is an alternative to --height/--width
    CHECK(run_capture({"estimate", "--n", "100", "--k", "100", "--p", "1"}, out, dir) == 0);
    CHECK(out.find("ratio=1.5") != std::string::npos);
}

TEST_CASE("misuse of the command line returns nonzero without crashing") {
    const fs::path dir = scratch("cli_misuse");
    CHECK(run({}) != 0);
    CHECK(run({"unknown-command"}) != 0);
    CHECK(run({"enhance"}) != 0);                                // missing required options
    CHECK(run({"bench", "--sizes", "abc"}) != 0);                // malformed size
    CHECK(run({"bench", "--sizes", "16x16", "--mode", "nope"}) != 0);
    CHECK(run({"metrics", "--a", (dir / "nope.json").string(), "--b",
               (dir / "nope.json").string()}) != 0);
    CHECK(run({"estimate", "--n", "0"}) != 0);
    CHECK(run({"train-toy", "--loss", "bogus"}) != 0);
}
