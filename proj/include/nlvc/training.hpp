#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nlvc/autodiff.hpp"
#include "nlvc/enhancer.hpp"

namespace nlvc {

// The reference loss is the Euclidean norm of the error; a mean-squared
// variant is available for scale-stable comparisons across patch sizes.
enum class LossKind { norm, mse };

double l2_loss(const Tensor& y_hat, const Tensor& y, LossKind kind = LossKind::norm);

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First/second moment estimates per parameter tensor, in enumeration order.
struct AdamState {
    AdamConfig config;
    long long step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    static AdamState init(const NetworkParams& params, const AdamConfig& config = {});
};

// Standard ADAM update with bias correction; `grads` follows the same
// parameter enumeration order as for_each_param.
void adam_step(NetworkParams& params, const std::vector<Tensor>& grads, AdamState& state);

// Synthetic clips: rectangles gliding over a flat background, degraded by
// block-mean quantization plus seeded uniform noise to mimic blocking
// artifacts without any codec dependency.
struct ToyDatasetConfig {
    int clips = 8;
    int frames_per_clip = 3;
    int height = 32;
    int width = 32;
    int quant_block = 4;
    double noise_amplitude = 0.04;
    std::uint64_t seed = 2024;
};

struct ToyClip {
    std::vector<Tensor> raw;
    std::vector<Tensor> degraded;
};

struct ToyDataset {
    ToyDatasetConfig config;
    std::vector<ToyClip> clips;
};

Tensor degrade_frame(const Tensor& frame, int quant_block, double noise_amplitude,
                     std::uint64_t seed);
ToyDataset make_toy_dataset(const ToyDatasetConfig& config);

// Spatially co-located crops across all frames of a clip plus the matching
// ground-truth crop of the center frame. Deterministic under a fixed seed.
struct PatchSample {
    FrameSequence input;
    Tensor target;
};

std::vector<PatchSample> sample_patches(const std::vector<Tensor>& raw_seq,
                                        const std::vector<Tensor>& degraded_seq, int patch,
                                        int count, std::uint64_t seed);

// Network parameters mirrored onto a gradient tape as tracked leaves, keyed
// by the stable enumeration names.
struct TapedNetwork {
    NetworkParams shapes;
    std::vector<ad::Var> ordered;
    std::map<std::string, ad::Var> by_name;

    ad::Var at(const std::string& name) const;
};

TapedNetwork make_taped_network(ad::Tape& tape, const NetworkParams& params);

// Differentiable replays of the enhancer forward pass. Reconstruction is the
// raw (unclamped) X_target + residual; training sees the unclamped values.
ad::Var taped_residual(ad::Tape& tape, const TapedNetwork& net, const FrameSequence& seq,
                       const NonLocalConfig& cfg, WarpMode mode);
ad::Var taped_reconstruction(ad::Tape& tape, const TapedNetwork& net, const FrameSequence& seq,
                             const NonLocalConfig& cfg, WarpMode mode);

// One forward/backward pass: loss value plus parameter gradients in
// enumeration order.
struct GradientResult {
    double loss = 0.0;
    std::vector<Tensor> grads;
};

GradientResult compute_gradients(const NetworkParams& params, const FrameSequence& seq,
                                 const Tensor& target, const NonLocalConfig& cfg,
                                 WarpMode mode, LossKind loss);

struct TrainConfig {
    ModelConfig model;
    NonLocalConfig nl;
    WarpMode mode = WarpMode::exact;
    LossKind loss = LossKind::norm;
    AdamConfig adam;
    int iterations = 500;
    int batch_size = 4;
    int patch = 16;
    std::uint64_t seed = 7;
    int log_every = 0;  // 0 disables progress lines
};

struct TrainResult {
    NetworkParams params;
    AdamState adam;
    std::vector<double> losses;  // per-iteration batch means
};

// Deterministic toy training driver. Aborts with a diagnostic if the loss
// stops being finite.
TrainResult train_toy(const ToyDataset& data, const TrainConfig& cfg);

// Trailing window mean (window clamped at the start of the curve).
std::vector<double> smooth_curve(const std::vector<double>& values, int window);

// Mean PSNR of degraded vs enhanced center frames over a dataset.
struct ToyEvaluation {
    double psnr_degraded = 0.0;
    double psnr_enhanced = 0.0;

    double delta() const { return psnr_enhanced - psnr_degraded; }
};

ToyEvaluation evaluate_toy(const NetworkParams& params, const ToyDataset& data,
                           const NonLocalConfig& cfg, WarpMode mode);

}  // namespace nlvc
