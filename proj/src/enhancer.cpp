#include "nlvc/enhancer.hpp"

#include <random>
#include <string>

namespace nlvc {

void ModelConfig::validate() const {
    check(c_in >= 1 && c_f >= 1 && c_h >= 1, "ModelConfig: channel counts must be >= 1");
    check(temporal_radius >= 0, "ModelConfig: temporal radius must be >= 0");
    check(encoder_layers >= 1, "ModelConfig: encoder needs at least one layer");
    check(decoder_hidden_layers >= 0, "ModelConfig: negative decoder depth");
    check(kernel_size >= 1 && kernel_size % 2 == 1, "ModelConfig: kernel size must be odd");
}

FrameSequence FrameSequence::centered(std::vector<Tensor> frames) {
    FrameSequence seq;
    seq.frames = std::move(frames);
    seq.target_index = static_cast<int>(seq.frames.size()) / 2;
    seq.validate();
    return seq;
}

void FrameSequence::validate() const {
    check(!frames.empty(), "FrameSequence: empty sequence");
    check(frames.size() % 2 == 1, "FrameSequence: length must be odd (2T+1)");
    check(target_index >= 0 && target_index < static_cast<int>(frames.size()),
          "FrameSequence: target index out of range");
    for (const Tensor& f : frames) {
        check(f.same_shape(frames.front()), "FrameSequence: frames must share one shape");
    }
}

void NetworkParams::validate() const {
    config.validate();
    check(static_cast<int>(encoder.size()) == config.encoder_layers,
          "NetworkParams: encoder layer count mismatch");
    check(encoder.front().spec.in_channels == config.c_in,
          "NetworkParams: encoder input channels mismatch");
    check(encoder.back().spec.out_channels == config.c_f,
          "NetworkParams: encoder output channels mismatch");
    lstm_fwd.validate();
    lstm_bwd.validate();
    check(fusion.spec.in_channels == 2 * config.c_h && fusion.spec.kernel_size == 1,
          "NetworkParams: fusion must be a 1x1 layer over both directions");
    check(!decoder.empty() && decoder.back().spec.out_channels == config.c_in,
          "NetworkParams: decoder must end with the frame channel count");
}

namespace {

ConvLayer make_layer(int in_ch, int out_ch, int ksize, std::mt19937_64* rng) {
    ConvLayer layer;
    layer.spec = LayerSpec{in_ch, out_ch, ksize};
    layer.weights = Tensor(out_ch * in_ch, ksize, ksize);
    layer.bias = Tensor(out_ch, 1, 1);
    if (rng != nullptr) {
        const double s = 1.0 / std::sqrt(static_cast<double>(in_ch) * ksize * ksize);
        std::uniform_real_distribution<double> dist(-s, s);
        for (double& v : layer.weights.data) v = dist(*rng);
        for (double& v : layer.bias.data) v = dist(*rng);
    }
    return layer;
}

ConvLSTMParams make_lstm(const ModelConfig& cfg, std::mt19937_64* rng) {
    const int in_ch = cfg.c_f + cfg.c_h;
    ConvLSTMParams p;
    p.gate_input = make_layer(in_ch, cfg.c_h, cfg.kernel_size, rng);
    p.gate_forget = make_layer(in_ch, cfg.c_h, cfg.kernel_size, rng);
    p.gate_output = make_layer(in_ch, cfg.c_h, cfg.kernel_size, rng);
    p.gate_candidate = make_layer(in_ch, cfg.c_h, cfg.kernel_size, rng);
    return p;
}

NetworkParams build_params(const ModelConfig& config, std::mt19937_64* rng) {
    config.validate();
    NetworkParams params;
    params.config = config;
    for (int l = 0; l < config.encoder_layers; ++l) {
        const int in_ch = l == 0 ? config.c_in : config.c_f;
        params.encoder.push_back(make_layer(in_ch, config.c_f, config.kernel_size, rng));
    }
    params.lstm_fwd = make_lstm(config, rng);
    params.lstm_bwd = make_lstm(config, rng);
    params.fusion = make_layer(2 * config.c_h, config.c_h, 1, rng);
    for (int l = 0; l < config.decoder_hidden_layers; ++l) {
        params.decoder.push_back(make_layer(config.c_h, config.c_h, config.kernel_size, rng));
    }
    params.decoder.push_back(make_layer(config.c_h, config.c_in, config.kernel_size, rng));
    return params;
}

}  // namespace

NetworkParams init_network_params(const ModelConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return build_params(config, &rng);
}

NetworkParams zero_network_params(const ModelConfig& config) {
    return build_params(config, nullptr);
}

void for_each_param(NetworkParams& params,
                    const std::function<void(const std::string&, Tensor&)>& fn) {
    for (std::size_t l = 0; l < params.encoder.size(); ++l) {
        fn("encoder." + std::to_string(l) + ".weights", params.encoder[l].weights);
        fn("encoder." + std::to_string(l) + ".bias", params.encoder[l].bias);
    }
    const auto visit_lstm = [&](const std::string& prefix, ConvLSTMParams& lstm) {
        for (auto [name, gate] : {std::pair<const char*, ConvLayer*>{"input", &lstm.gate_input},
                                  {"forget", &lstm.gate_forget},
                                  {"output", &lstm.gate_output},
                                  {"candidate", &lstm.gate_candidate}}) {
            fn(prefix + "." + name + ".weights", gate->weights);
            fn(prefix + "." + name + ".bias", gate->bias);
        }
    };
    visit_lstm("lstm_fwd", params.lstm_fwd);
    visit_lstm("lstm_bwd", params.lstm_bwd);
    fn("fusion.weights", params.fusion.weights);
    fn("fusion.bias", params.fusion.bias);
    for (std::size_t l = 0; l < params.decoder.size(); ++l) {
        fn("decoder." + std::to_string(l) + ".weights", params.decoder[l].weights);
        fn("decoder." + std::to_string(l) + ".bias", params.decoder[l].bias);
    }
}

void for_each_param(const NetworkParams& params,
                    const std::function<void(const std::string&, const Tensor&)>& fn) {
    for_each_param(const_cast<NetworkParams&>(params),
                   [&](const std::string& name, Tensor& t) { fn(name, t); });
}

std::size_t count_params(const NetworkParams& params) {
    std::size_t n = 0;
    for_each_param(params, [&](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
}

Tensor encode(const Tensor& frame, const NetworkParams& params, PadMode pad) {
    check(frame.channels == params.config.c_in,
          "encode: frame has " + std::to_string(frame.channels) +
              " channels, network expects " + std::to_string(params.config.c_in));
    Tensor x = frame;
    for (std::size_t l = 0; l < params.encoder.size(); ++l) {
        x = conv2d(x, params.encoder[l], pad);
        if (l + 1 < params.encoder.size()) {
            x = elementwise(x, Activation::relu);
        }
    }
    return x;
}

Tensor decode(const Tensor& h_fwd, const Tensor& h_bwd, const NetworkParams& params) {
    check(h_fwd.same_shape(h_bwd), "decode: direction state shapes differ");
    check(h_fwd.channels == params.config.c_h,
          "decode: states have " + std::to_string(h_fwd.channels) +
              " channels, network expects " + std::to_string(params.config.c_h));
    Tensor x = conv2d(concat_channels(h_fwd, h_bwd), params.fusion);
    for (std::size_t l = 0; l + 1 < params.decoder.size(); ++l) {
        x = elementwise(conv2d(x, params.decoder[l]), Activation::relu);
    }
    return conv2d(x, params.decoder.back());  // signed residual, no activation
}

namespace {

std::vector<Tensor> encode_sequence(const FrameSequence& seq, const NetworkParams& params) {
    std::vector<Tensor> features;
    features.reserve(seq.frames.size());
    for (const Tensor& frame : seq.frames) {
        features.push_back(encode(frame, params));
    }
    return features;
}

}  // namespace

Tensor compute_residual(const FrameSequence& seq, const NetworkParams& params,
                        const NonLocalConfig& cfg, WarpMode mode) {
    seq.validate();
    params.validate();
    const std::vector<Tensor> features = encode_sequence(seq, params);
    const BidirectionalStates states =
        run_bidirectional(features, params.lstm_fwd, params.lstm_bwd, cfg, mode);
    return decode(states.forward_hidden[seq.target_index],
                  states.backward_hidden[seq.target_index], params);
}

Tensor enhance(const FrameSequence& seq, const NetworkParams& params,
               const NonLocalConfig& cfg, WarpMode mode) {
    const Tensor residual = compute_residual(seq, params, cfg, mode);
    Tensor out = clamp01(add(seq.frames[seq.target_index], residual));
    require_finite(out, "enhance");
    return out;
}

std::vector<Tensor> enhance_all(const FrameSequence& seq, const NetworkParams& params,
                                const NonLocalConfig& cfg, WarpMode mode) {
    seq.validate();
    params.validate();
    const std::vector<Tensor> features = encode_sequence(seq, params);
    const BidirectionalStates states =
        run_bidirectional(features, params.lstm_fwd, params.lstm_bwd, cfg, mode);
    std::vector<Tensor> out;
    out.reserve(seq.frames.size());
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        const Tensor residual =
            decode(states.forward_hidden[t], states.backward_hidden[t], params);
        out.push_back(clamp01(add(seq.frames[t], residual)));
    }
    return out;
}

}  // namespace nlvc
