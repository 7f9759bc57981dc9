#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nlvc/nonlocal_approx.hpp"
#include "nlvc/tensor.hpp"

namespace nlvc::ad {

// Handle into a Tape's node list.
struct Var {
    int idx = -1;
};

// Define-by-run reverse-mode gradient tape. Every op records the forward
// value and a closure that routes upstream gradients to its inputs; backward
// replays the closures in reverse creation order, which is a valid reverse
// topological order by construction. A tape drives one forward/backward pair
// and rejects reuse.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    Var conv2d(Var input, Var weights, Var bias, const LayerSpec& spec,
               PadMode pad = PadMode::zero);
    Var activation(Var x, Activation act);
    Var add(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var scale(Var x, double factor);
    Var avg_pool(Var x, int pool);
    Var concat_channels(Var a, Var b);
    Var slice_channels(Var x, int begin, int count);

    // Pairwise-distance softmax attention: columns of the similarity matrix
    // weight source pixels of `state`, exactly as the dense warp does.
    // Gradients flow into both feature maps and the state.
    Var nl_attend(Var f_prev, Var f_cur, Var state, double beta);

    // Sparse variant restricted to the candidate blocks in `cand`, which is
    // treated as fixed structure: gradients flow through the retained
    // similarity weights only, never through the candidate choice.
    Var nl_attend_sparse(Var f_prev, Var f_cur, Var state, const CandidateMap& cand,
                         const NonLocalConfig& cfg);

    // Scalar reductions (1x1x1 results).
    Var l2_norm_loss(Var y_hat, Tensor target);
    Var mse_loss(Var y_hat, Tensor target);
    Var weighted_sum(Var x, Tensor weights);

    const Tensor& value(Var v) const;
    double value_scalar(Var v) const;

    // Seeds d(loss)/d(loss) = 1 and accumulates gradients for every node
    // reachable from `loss` that requires them. Callable once per tape.
    void backward(Var loss);
    const Tensor& grad(Var v) const;

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&, const Tensor&)> backprop;
    };

    Var push(Tensor value, bool requires_grad,
             std::function<void(Tape&, const Tensor&)> backprop);
    const Node& node(Var v) const;
    bool wants_grad(int idx) const { return nodes_[idx].requires_grad; }
    Tensor& grad_ref(int idx) { return nodes_[idx].grad; }
    void add_grad(int idx, const Tensor& g);

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

}  // namespace nlvc::ad
