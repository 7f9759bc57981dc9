#include "nlvc/convlstm.hpp"

#include <cmath>
#include <string>

namespace nlvc {

void ConvLSTMParams::validate() const {
    const LayerSpec& ref = gate_input.spec;
    check(ref.out_channels >= 1 && ref.in_channels > ref.out_channels,
          "ConvLSTMParams: gate spec must map (C_f + C_h) -> C_h channels");
    for (const ConvLayer* g : {&gate_forget, &gate_output, &gate_candidate}) {
        check(g->spec.in_channels == ref.in_channels &&
                  g->spec.out_channels == ref.out_channels &&
                  g->spec.kernel_size == ref.kernel_size,
              "ConvLSTMParams: all gates must share the same layer spec");
    }
}

CellState convlstm_cell(const Tensor& f_t, const CellState& warped,
                        const ConvLSTMParams& params) {
    params.validate();
    check(warped.hidden.same_shape(warped.cell),
          "convlstm_cell: hidden/cell shape mismatch");
    check(warped.hidden.channels == params.hidden_channels(),
          "convlstm_cell: state has " + std::to_string(warped.hidden.channels) +
              " channels, gates expect " + std::to_string(params.hidden_channels()));
    check(f_t.channels == params.feature_channels(),
          "convlstm_cell: features have " + std::to_string(f_t.channels) +
              " channels, gates expect " + std::to_string(params.feature_channels()));
    check(f_t.height == warped.hidden.height && f_t.width == warped.hidden.width,
          "convlstm_cell: feature/state spatial size mismatch");

    const Tensor z = concat_channels(f_t, warped.hidden);
    const Tensor gi = elementwise(conv2d(z, params.gate_input), Activation::sigmoid);
    const Tensor gf = elementwise(conv2d(z, params.gate_forget), Activation::sigmoid);
    const Tensor go = elementwise(conv2d(z, params.gate_output), Activation::sigmoid);
    const Tensor gg = elementwise(conv2d(z, params.gate_candidate), Activation::tanh);

    CellState next;
    next.cell = add(hadamard(gf, warped.cell), hadamard(gi, gg));
    next.hidden = hadamard(go, elementwise(next.cell, Activation::tanh));
    return next;
}

CellState warp_state(const Tensor& f_prev, const Tensor& f_t, const CellState& prev,
                     const NonLocalConfig& cfg, WarpMode mode) {
    CellState warped;
    if (mode == WarpMode::exact) {
        const int n = f_t.pixels();
        if (cfg.max_dense_pixels > 0 && n > cfg.max_dense_pixels) {
            const double bytes = 2.0 * static_cast<double>(n) * n * sizeof(double);
            throw std::invalid_argument(
                "exact non-local path: N = " + std::to_string(n) + " exceeds the dense guard of " +
                std::to_string(cfg.max_dense_pixels) + " pixels (dense matrices would need " +
                std::to_string(static_cast<long long>(bytes)) + " bytes)");
        }
        const DenseDistance d = pairwise_distance_vectorized(f_prev, f_t);
        const DenseSimilarity s = similarity_from_distance(d, cfg.beta);
        warped.hidden = nl_warp(prev.hidden, s);
        warped.cell = nl_warp(prev.cell, s);
    } else {
        const SparseSimilarity s = approx_similarity(f_prev, f_t, cfg);
        warped.hidden = sparse_nl_warp(prev.hidden, s);
        warped.cell = sparse_nl_warp(prev.cell, s);
    }
    return warped;
}

CellState nl_convlstm_step(const Tensor* f_prev, const Tensor& f_t, const CellState& prev,
                           const ConvLSTMParams& params, const NonLocalConfig& cfg,
                           WarpMode mode) {
    if (f_prev == nullptr) {
        return convlstm_cell(f_t, prev, params);
    }
    return convlstm_cell(f_t, warp_state(*f_prev, f_t, prev, cfg, mode), params);
}

BidirectionalStates run_bidirectional(const std::vector<Tensor>& features,
                                      const ConvLSTMParams& params_fwd,
                                      const ConvLSTMParams& params_bwd,
                                      const NonLocalConfig& cfg, WarpMode mode) {
    check(!features.empty(), "run_bidirectional: empty feature sequence");
    const int len = static_cast<int>(features.size());
    const int c_h = params_fwd.hidden_channels();
    const int h = features.front().height;
    const int w = features.front().width;

    BidirectionalStates out;
    out.forward_hidden.resize(len);
    out.backward_hidden.resize(len);

    CellState state = CellState::zeros(c_h, h, w);
    for (int t = 0; t < len; ++t) {
        const Tensor* prev_feat = t > 0 ? &features[t - 1] : nullptr;
        state = nl_convlstm_step(prev_feat, features[t], state, params_fwd, cfg, mode);
        out.forward_hidden[t] = state.hidden;
    }

    state = CellState::zeros(params_bwd.hidden_channels(), h, w);
    for (int t = len - 1; t >= 0; --t) {
        const Tensor* prev_feat = t < len - 1 ? &features[t + 1] : nullptr;
        state = nl_convlstm_step(prev_feat, features[t], state, params_bwd, cfg, mode);
        out.backward_hidden[t] = state.hidden;
    }
    return out;
}

}  // namespace nlvc
