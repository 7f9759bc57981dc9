#pragma once

#include <vector>

#include "nlvc/common.hpp"
#include "nlvc/tensor.hpp"

namespace nlvc {

// Pixel-wise inter-frame Euclidean distances. Rows index pixels of the
// preceding frame, columns index pixels of the current frame.
struct DenseDistance {
    int n_prev = 0;
    int n_cur = 0;
    std::vector<double> values;  // row-major n_prev x n_cur, all >= 0

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * n_cur + j]; }
};

// Column-stochastic similarity matrix: S(i,j) = softmax_i(-D(i,j)/beta).
struct DenseSimilarity {
    int n_prev = 0;
    int n_cur = 0;
    double beta = 1.0;
    std::vector<double> values;  // row-major n_prev x n_cur, columns sum to 1

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * n_cur + j]; }
};

// Reference double loop. The oracle for the vectorized path.
DenseDistance pairwise_distance_naive(const Tensor& f_prev, const Tensor& f_cur,
                                      MacCounter* macs = nullptr);

// Squared-norm expansion |a|^2 + |b|^2 - 2 a.b with negative rounding clamped
// to 0 before the square root. Matches the naive path to floating-point
// rounding (absolute error ~1e-14 at unit scale); near-identical pixel pairs
// lose relative, not absolute, precision to cancellation.
DenseDistance pairwise_distance_vectorized(const Tensor& f_prev, const Tensor& f_cur,
                                           MacCounter* macs = nullptr);

// Column softmax of -D/beta, stabilized by subtracting the column minimum
// distance before exponentiation.
DenseSimilarity similarity_from_distance(const DenseDistance& d, double beta);

// warped(.,j) = sum_i state(.,i) * S(i,j). Output has the state's shape; each
// output channel is a convex combination of that input channel.
Tensor nl_warp(const Tensor& state, const DenseSimilarity& s, MacCounter* macs = nullptr);

// Fused distance -> similarity -> warp over column blocks, never materializing
// the N x N matrices. Equals nl_warp(state, similarity_from_distance(...)).
// Memory is O(N * col_block); intended for benchmarking large frames.
Tensor nl_attend_streaming(const Tensor& f_prev, const Tensor& f_cur, const Tensor& state,
                           double beta, int col_block = 512, int threads = 1,
                           MacCounter* macs = nullptr);

// Copies a (C, H, W) tensor into pixel-major layout: out[i*C + c] = t(c, i).
std::vector<double> pixel_major(const Tensor& t);

}  // namespace nlvc
