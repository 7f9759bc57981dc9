#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nlvc/convlstm.hpp"
#include "nlvc/tensor.hpp"

namespace nlvc {

// Architecture knobs. Defaults follow the full-scale configuration; tests and
// toy training shrink the channel counts.
struct ModelConfig {
    int c_in = 1;  // frame channels (single-channel luma by default)
    int c_f = 64;
    int c_h = 64;
    int temporal_radius = 3;  // T; sequences hold 2T+1 frames
    int encoder_layers = 3;
    int decoder_hidden_layers = 2;  // 3x3 conv+ReLU layers between fusion and output
    int kernel_size = 3;

    int sequence_length() const { return 2 * temporal_radius + 1; }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// Ordered clip of 2T+1 equally shaped frames; the enhancement target sits at
// target_index (center by default).
struct FrameSequence {
    std::vector<Tensor> frames;
    int target_index = 0;

    static FrameSequence centered(std::vector<Tensor> frames);
    void validate() const;
};

// All learnable weights: encoder stack, both ConvLSTM directions, decoder
// fusion and stack.
struct NetworkParams {
    ModelConfig config;
    std::vector<ConvLayer> encoder;
    ConvLSTMParams lstm_fwd;
    ConvLSTMParams lstm_bwd;
    ConvLayer fusion;  // 2*C_h -> C_h, 1x1
    std::vector<ConvLayer> decoder;

    void validate() const;
};

// Seeded uniform [-s, s] initialization with s = fan_in^(-1/2).
NetworkParams init_network_params(const ModelConfig& config, std::uint64_t seed);
NetworkParams zero_network_params(const ModelConfig& config);

// Visits every parameter tensor in a fixed order (the checkpoint and
// optimizer order). Names are stable identifiers like "encoder.0.weights".
void for_each_param(NetworkParams& params,
                    const std::function<void(const std::string&, Tensor&)>& fn);
void for_each_param(const NetworkParams& params,
                    const std::function<void(const std::string&, const Tensor&)>& fn);
std::size_t count_params(const NetworkParams& params);

// Per-frame feature extraction (stateless across frames).
Tensor encode(const Tensor& frame, const NetworkParams& params,
              PadMode pad = PadMode::zero);

// Fuses the two directions' hidden states (concatenation -> 1x1 conv) and
// decodes a signed residual with the frame's channel count.
Tensor decode(const Tensor& h_fwd, const Tensor& h_bwd, const NetworkParams& params);

// Residual for the target frame (or any frame position) before clamping.
Tensor compute_residual(const FrameSequence& seq, const NetworkParams& params,
                        const NonLocalConfig& cfg, WarpMode mode);

// Y_hat = clamp(X_target + residual, 0, 1).
Tensor enhance(const FrameSequence& seq, const NetworkParams& params,
               const NonLocalConfig& cfg, WarpMode mode);

// Enhancement of every frame position, same network pass.
std::vector<Tensor> enhance_all(const FrameSequence& seq, const NetworkParams& params,
                                const NonLocalConfig& cfg, WarpMode mode);

}  // namespace nlvc
