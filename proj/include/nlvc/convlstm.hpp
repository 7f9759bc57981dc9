#pragma once

#include <vector>

#include "nlvc/nonlocal_approx.hpp"
#include "nlvc/nonlocal_exact.hpp"
#include "nlvc/tensor.hpp"

namespace nlvc {

enum class WarpMode { exact, approx };

// Hidden/cell pair of one ConvLSTM direction.
struct CellState {
    Tensor hidden;
    Tensor cell;

    static CellState zeros(int c_h, int h, int w) {
        return CellState{Tensor(c_h, h, w), Tensor(c_h, h, w)};
    }
};

// Gate convolutions over concat(F_t, warped hidden). All four gates share the
// (C_f + C_h) -> C_h configuration.
struct ConvLSTMParams {
    ConvLayer gate_input;      // i
    ConvLayer gate_forget;     // f
    ConvLayer gate_output;     // o
    ConvLayer gate_candidate;  // g

    int hidden_channels() const { return gate_input.spec.out_channels; }
    int feature_channels() const {
        return gate_input.spec.in_channels - gate_input.spec.out_channels;
    }
    void validate() const;
};

// Standard gated update (no peepholes):
//   i, f, o = sigmoid(conv(concat(F_t, H~))),  g = tanh(conv(concat(F_t, H~)))
//   C_t = f o C~ + i o g,  H_t = o o tanh(C_t)
CellState convlstm_cell(const Tensor& f_t, const CellState& warped,
                        const ConvLSTMParams& params);

// One recurrent step with the previous state warped by the inter-frame
// similarity between f_prev and f_t. Passing f_prev = nullptr (first frame of
// a direction) skips the warp and consumes the state directly.
CellState nl_convlstm_step(const Tensor* f_prev, const Tensor& f_t, const CellState& prev,
                           const ConvLSTMParams& params, const NonLocalConfig& cfg,
                           WarpMode mode);

struct BidirectionalStates {
    std::vector<Tensor> forward_hidden;   // one per frame position
    std::vector<Tensor> backward_hidden;  // one per frame position
};

// Independent forward and backward passes over the feature sequence; both
// directions start from zero states at their respective ends.
BidirectionalStates run_bidirectional(const std::vector<Tensor>& features,
                                      const ConvLSTMParams& params_fwd,
                                      const ConvLSTMParams& params_bwd,
                                      const NonLocalConfig& cfg, WarpMode mode);

// Warps both members of a state with the similarity derived from the feature
// pair, honoring the mode and the dense-path memory guard.
CellState warp_state(const Tensor& f_prev, const Tensor& f_t, const CellState& prev,
                     const NonLocalConfig& cfg, WarpMode mode);

}  // namespace nlvc
