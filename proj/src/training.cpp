#include "nlvc/training.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "nlvc/metrics.hpp"

namespace nlvc {

double l2_loss(const Tensor& y_hat, const Tensor& y, LossKind kind) {
    check(y_hat.same_shape(y), "l2_loss: shape mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < y_hat.data.size(); ++i) {
        const double d = y_hat.data[i] - y.data[i];
        sq += d * d;
    }
    return kind == LossKind::norm ? std::sqrt(sq)
                                  : sq / static_cast<double>(y_hat.data.size());
}

AdamState AdamState::init(const NetworkParams& params, const AdamConfig& config) {
    AdamState state;
    state.config = config;
    for_each_param(params, [&](const std::string&, const Tensor& t) {
        state.m.emplace_back(t.channels, t.height, t.width);
        state.v.emplace_back(t.channels, t.height, t.width);
    });
    return state;
}

void adam_step(NetworkParams& params, const std::vector<Tensor>& grads, AdamState& state) {
    std::vector<Tensor*> targets;
    for_each_param(params, [&](const std::string&, Tensor& t) { targets.push_back(&t); });
    check(grads.size() == targets.size(), "adam_step: gradient count mismatch");
    check(state.m.size() == targets.size(), "adam_step: moment count mismatch");

    ++state.step;
    const AdamConfig& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < targets.size(); ++p) {
        Tensor& t = *targets[p];
        const Tensor& g = grads[p];
        check(t.same_shape(g) && t.same_shape(state.m[p]), "adam_step: shape mismatch");
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            double& m = state.m[p].data[i];
            double& v = state.v[p].data[i];
            m = c.beta1 * m + (1.0 - c.beta1) * g.data[i];
            v = c.beta2 * v + (1.0 - c.beta2) * g.data[i] * g.data[i];
            t.data[i] -= c.lr * (m / bc1) / (std::sqrt(v / bc2) + c.epsilon);
        }
    }
}

Tensor degrade_frame(const Tensor& frame, int quant_block, double noise_amplitude,
                     std::uint64_t seed) {
    check(quant_block >= 1, "degrade_frame: block size must be >= 1");
    check(noise_amplitude >= 0.0, "degrade_frame: negative noise amplitude");
    const int H = frame.height, W = frame.width;
    Tensor out(frame.channels, H, W);
    for (int c = 0; c < frame.channels; ++c) {
        const double* src = frame.plane(c);
        double* dst = out.plane(c);
        for (int by = 0; by < H; by += quant_block) {
            for (int bx = 0; bx < W; bx += quant_block) {
                const int y1 = std::min(by + quant_block, H);
                const int x1 = std::min(bx + quant_block, W);
                double mean = 0.0;
                for (int y = by; y < y1; ++y) {
                    for (int x = bx; x < x1; ++x) mean += src[y * W + x];
                }
                mean /= (y1 - by) * (x1 - bx);
                for (int y = by; y < y1; ++y) {
                    for (int x = bx; x < x1; ++x) dst[y * W + x] = mean;
                }
            }
        }
    }
    if (noise_amplitude > 0.0) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> noise(-noise_amplitude, noise_amplitude);
        for (double& v : out.data) v += noise(rng);
    }
    return clamp01(out);
}

namespace {

struct Rect {
    double y, x;    // top-left corner, continuous
    double vy, vx;  // per-frame velocity
    int h, w;
    double value;
};

void draw_rect(Tensor& frame, const Rect& r, int t) {
    const int y0 = static_cast<int>(std::lround(r.y + r.vy * t));
    const int x0 = static_cast<int>(std::lround(r.x + r.vx * t));
    for (int y = std::max(0, y0); y < std::min(frame.height, y0 + r.h); ++y) {
        for (int x = std::max(0, x0); x < std::min(frame.width, x0 + r.w); ++x) {
            frame.at(0, y, x) = r.value;
        }
    }
}

}  // namespace

ToyDataset make_toy_dataset(const ToyDatasetConfig& config) {
    check(config.clips >= 1, "make_toy_dataset: need at least one clip");
    check(config.frames_per_clip >= 1 && config.frames_per_clip % 2 == 1,
          "make_toy_dataset: frames_per_clip must be odd");
    check(config.height >= 8 && config.width >= 8, "make_toy_dataset: frames too small");

    ToyDataset data;
    data.config = config;
    for (int clip = 0; clip < config.clips; ++clip) {
        std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(clip)));
        std::uniform_real_distribution<double> bg(0.1, 0.3);
        std::uniform_real_distribution<double> fg(0.55, 0.95);
        std::uniform_int_distribution<int> side(config.height / 5, config.height / 2);
        std::uniform_real_distribution<double> vel(-2.0, 2.0);

        const double background = bg(rng);
        std::vector<Rect> rects(2);
        for (Rect& r : rects) {
            r.h = side(rng);
            r.w = side(rng);
            r.y = std::uniform_real_distribution<double>(0, config.height - r.h)(rng);
            r.x = std::uniform_real_distribution<double>(0, config.width - r.w)(rng);
            r.vy = vel(rng);
            r.vx = vel(rng);
            r.value = fg(rng);
        }

        ToyClip tc;
        for (int t = 0; t < config.frames_per_clip; ++t) {
            Tensor frame(1, config.height, config.width, background);
            for (const Rect& r : rects) draw_rect(frame, r, t);
            tc.degraded.push_back(degrade_frame(
                frame, config.quant_block, config.noise_amplitude,
                mix_seed(config.seed, (static_cast<std::uint64_t>(clip) << 16) | (t + 1))));
            tc.raw.push_back(std::move(frame));
        }
        data.clips.push_back(std::move(tc));
    }
    return data;
}

std::vector<PatchSample> sample_patches(const std::vector<Tensor>& raw_seq,
                                        const std::vector<Tensor>& degraded_seq, int patch,
                                        int count, std::uint64_t seed) {
    check(!raw_seq.empty() && raw_seq.size() == degraded_seq.size(),
          "sample_patches: sequences must be aligned and non-empty");
    const Tensor& ref = raw_seq.front();
    check(patch >= 1 && patch <= ref.height && patch <= ref.width,
          "sample_patches: patch size exceeds the frame");
    check(count >= 1, "sample_patches: need at least one sample");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> off_y(0, ref.height - patch);
    std::uniform_int_distribution<int> off_x(0, ref.width - patch);
    const int target = static_cast<int>(raw_seq.size()) / 2;

    const auto crop = [&](const Tensor& t, int y0, int x0) {
        Tensor out(t.channels, patch, patch);
        for (int c = 0; c < t.channels; ++c) {
            for (int y = 0; y < patch; ++y) {
                const double* row = t.plane(c) + static_cast<std::size_t>(y0 + y) * t.width;
                std::copy(row + x0, row + x0 + patch, out.plane(c) + static_cast<std::size_t>(y) * patch);
            }
        }
        return out;
    };

    std::vector<PatchSample> batch;
    batch.reserve(count);
    for (int s = 0; s < count; ++s) {
        const int y0 = off_y(rng);
        const int x0 = off_x(rng);
        PatchSample sample;
        for (const Tensor& frame : degraded_seq) {
            sample.input.frames.push_back(crop(frame, y0, x0));
        }
        sample.input.target_index = target;
        sample.target = crop(raw_seq[target], y0, x0);
        batch.push_back(std::move(sample));
    }
    return batch;
}

ad::Var TapedNetwork::at(const std::string& name) const {
    const auto it = by_name.find(name);
    check(it != by_name.end(), "TapedNetwork: unknown parameter " + name);
    return it->second;
}

TapedNetwork make_taped_network(ad::Tape& tape, const NetworkParams& params) {
    params.validate();
    TapedNetwork net;
    net.shapes = params;
    for_each_param(params, [&](const std::string& name, const Tensor& t) {
        const ad::Var var = tape.leaf(t);
        net.ordered.push_back(var);
        net.by_name.emplace(name, var);
    });
    return net;
}

namespace {

ad::Var taped_conv(ad::Tape& tape, const TapedNetwork& net, ad::Var x,
                   const std::string& prefix, const LayerSpec& spec) {
    return tape.conv2d(x, net.at(prefix + ".weights"), net.at(prefix + ".bias"), spec);
}

ad::Var taped_encode(ad::Tape& tape, const TapedNetwork& net, const Tensor& frame) {
    ad::Var x = tape.constant(frame);
    const std::size_t layers = net.shapes.encoder.size();
    for (std::size_t l = 0; l < layers; ++l) {
        x = taped_conv(tape, net, x, "encoder." + std::to_string(l),
                       net.shapes.encoder[l].spec);
        if (l + 1 < layers) x = tape.activation(x, Activation::relu);
    }
    return x;
}

// Warps the packed [hidden; cell] state toward frame t with gradients flowing
// through features and state. The approximate route freezes its candidate
// blocks from the current feature values before differentiating.
ad::Var taped_warp(ad::Tape& tape, ad::Var f_prev, ad::Var f_cur, ad::Var packed,
                   const NonLocalConfig& cfg, WarpMode mode) {
    if (mode == WarpMode::exact) {
        const int n = tape.value(f_cur).pixels();
        check(cfg.max_dense_pixels == 0 || n <= cfg.max_dense_pixels,
              "taped_warp: frame too large for dense similarity; raise max_dense_pixels "
              "or use the approximate mode");
        return tape.nl_attend(f_prev, f_cur, packed, cfg.beta);
    }
    const BlockSummary prev = summarize_blocks(tape.value(f_prev), cfg.p);
    const BlockSummary cur = summarize_blocks(tape.value(f_cur), cfg.p);
    const CandidateMap cand = topk_blocks(block_distance(prev, cur), cfg.k);
    return tape.nl_attend_sparse(f_prev, f_cur, packed, cand, cfg);
}

struct TapedDirection {
    std::vector<ad::Var> hidden;
};

TapedDirection taped_direction(ad::Tape& tape, const TapedNetwork& net,
                               const std::vector<ad::Var>& features,
                               const std::string& prefix, bool reverse,
                               const NonLocalConfig& cfg, WarpMode mode) {
    const ModelConfig& mc = net.shapes.config;
    const Tensor& ref = tape.value(features.front());
    const int T = static_cast<int>(features.size());
    const ConvLSTMParams& lstm =
        prefix == "lstm_fwd" ? net.shapes.lstm_fwd : net.shapes.lstm_bwd;

    TapedDirection dir;
    dir.hidden.resize(T);
    ad::Var h = tape.constant(Tensor(mc.c_h, ref.height, ref.width));
    ad::Var c = tape.constant(Tensor(mc.c_h, ref.height, ref.width));
    for (int step = 0; step < T; ++step) {
        const int t = reverse ? T - 1 - step : step;
        ad::Var h_w = h;
        ad::Var c_w = c;
        if (step > 0) {
            const int t_prev = reverse ? t + 1 : t - 1;
            const ad::Var packed = tape.concat_channels(h, c);
            const ad::Var warped =
                taped_warp(tape, features[t_prev], features[t], packed, cfg, mode);
            h_w = tape.slice_channels(warped, 0, mc.c_h);
            c_w = tape.slice_channels(warped, mc.c_h, mc.c_h);
        }
        const ad::Var z = tape.concat_channels(features[t], h_w);
        const ad::Var gi = tape.activation(
            taped_conv(tape, net, z, prefix + ".input", lstm.gate_input.spec),
            Activation::sigmoid);
        const ad::Var gf = tape.activation(
            taped_conv(tape, net, z, prefix + ".forget", lstm.gate_forget.spec),
            Activation::sigmoid);
        const ad::Var go = tape.activation(
            taped_conv(tape, net, z, prefix + ".output", lstm.gate_output.spec),
            Activation::sigmoid);
        const ad::Var gc = tape.activation(
            taped_conv(tape, net, z, prefix + ".candidate", lstm.gate_candidate.spec),
            Activation::tanh);
        c = tape.add(tape.hadamard(gf, c_w), tape.hadamard(gi, gc));
        h = tape.hadamard(go, tape.activation(c, Activation::tanh));
        dir.hidden[t] = h;
    }
    return dir;
}

}  // namespace

ad::Var taped_residual(ad::Tape& tape, const TapedNetwork& net, const FrameSequence& seq,
                       const NonLocalConfig& cfg, WarpMode mode) {
    seq.validate();
    cfg.validate();
    std::vector<ad::Var> features;
    features.reserve(seq.frames.size());
    for (const Tensor& frame : seq.frames) {
        features.push_back(taped_encode(tape, net, frame));
    }
    const TapedDirection fwd =
        taped_direction(tape, net, features, "lstm_fwd", false, cfg, mode);
    const TapedDirection bwd =
        taped_direction(tape, net, features, "lstm_bwd", true, cfg, mode);

    ad::Var x = taped_conv(tape, net,
                           tape.concat_channels(fwd.hidden[seq.target_index],
                                                bwd.hidden[seq.target_index]),
                           "fusion", net.shapes.fusion.spec);
    const std::size_t layers = net.shapes.decoder.size();
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        x = tape.activation(
            taped_conv(tape, net, x, "decoder." + std::to_string(l), net.shapes.decoder[l].spec),
            Activation::relu);
    }
    return taped_conv(tape, net, x, "decoder." + std::to_string(layers - 1),
                      net.shapes.decoder.back().spec);
}

ad::Var taped_reconstruction(ad::Tape& tape, const TapedNetwork& net, const FrameSequence& seq,
                             const NonLocalConfig& cfg, WarpMode mode) {
    const ad::Var residual = taped_residual(tape, net, seq, cfg, mode);
    return tape.add(tape.constant(seq.frames[seq.target_index]), residual);
}

GradientResult compute_gradients(const NetworkParams& params, const FrameSequence& seq,
                                 const Tensor& target, const NonLocalConfig& cfg,
                                 WarpMode mode, LossKind loss) {
    ad::Tape tape;
    const TapedNetwork net = make_taped_network(tape, params);
    const ad::Var recon = taped_reconstruction(tape, net, seq, cfg, mode);
    const ad::Var loss_var = loss == LossKind::norm ? tape.l2_norm_loss(recon, target)
                                                    : tape.mse_loss(recon, target);
    tape.backward(loss_var);

    GradientResult result;
    result.loss = tape.value_scalar(loss_var);
    result.grads.reserve(net.ordered.size());
    for (const ad::Var v : net.ordered) {
        result.grads.push_back(tape.grad(v));
    }
    return result;
}

TrainResult train_toy(const ToyDataset& data, const TrainConfig& cfg) {
    check(!data.clips.empty(), "train_toy: empty dataset");
    check(cfg.iterations >= 0, "train_toy: negative iteration count");
    check(cfg.batch_size >= 1, "train_toy: batch size must be >= 1");

    TrainResult result;
    result.params = init_network_params(cfg.model, cfg.seed);
    result.adam = AdamState::init(result.params, cfg.adam);
    AdamState& state = result.adam;

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const ToyClip& clip = data.clips[iter % data.clips.size()];
        const std::vector<PatchSample> batch =
            sample_patches(clip.raw, clip.degraded, cfg.patch, cfg.batch_size,
                           mix_seed(cfg.seed, static_cast<std::uint64_t>(iter) + 1));

        double loss_sum = 0.0;
        std::vector<Tensor> grad_sum;
        for (const PatchSample& sample : batch) {
            GradientResult g = compute_gradients(result.params, sample.input, sample.target,
                                                 cfg.nl, cfg.mode, cfg.loss);
            loss_sum += g.loss;
            if (grad_sum.empty()) {
                grad_sum = std::move(g.grads);
            } else {
                for (std::size_t p = 0; p < grad_sum.size(); ++p) {
                    for (std::size_t i = 0; i < grad_sum[p].data.size(); ++i) {
                        grad_sum[p].data[i] += g.grads[p].data[i];
                    }
                }
            }
        }
        const double inv_batch = 1.0 / cfg.batch_size;
        for (Tensor& g : grad_sum) {
            for (double& v : g.data) v *= inv_batch;
        }
        const double loss = loss_sum * inv_batch;
        if (!std::isfinite(loss)) {
            throw std::runtime_error("train_toy: loss diverged to a non-finite value at iteration " +
                                     std::to_string(iter));
        }
        result.losses.push_back(loss);
        adam_step(result.params, grad_sum, state);
        if (cfg.log_every > 0 && (iter % cfg.log_every == 0 || iter + 1 == cfg.iterations)) {
            std::printf("iter %5d  loss %.6f\n", iter, loss);
            std::fflush(stdout);
        }
    }
    return result;
}

std::vector<double> smooth_curve(const std::vector<double>& values, int window) {
    check(window >= 1, "smooth_curve: window must be >= 1");
    std::vector<double> out(values.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        acc += values[i];
        if (i >= static_cast<std::size_t>(window)) acc -= values[i - window];
        const std::size_t n = std::min<std::size_t>(i + 1, window);
        out[i] = acc / static_cast<double>(n);
    }
    return out;
}

ToyEvaluation evaluate_toy(const NetworkParams& params, const ToyDataset& data,
                           const NonLocalConfig& cfg, WarpMode mode) {
    check(!data.clips.empty(), "evaluate_toy: empty dataset");
    ToyEvaluation eval;
    for (const ToyClip& clip : data.clips) {
        const FrameSequence seq = FrameSequence::centered(clip.degraded);
        const Tensor enhanced = enhance(seq, params, cfg, mode);
        const Tensor& truth = clip.raw[seq.target_index];
        eval.psnr_degraded += psnr(clip.degraded[seq.target_index], truth);
        eval.psnr_enhanced += psnr(enhanced, truth);
    }
    eval.psnr_degraded /= data.clips.size();
    eval.psnr_enhanced /= data.clips.size();
    return eval;
}

}  // namespace nlvc
