#pragma once

#include <cstdint>
#include <vector>

#include "nlvc/common.hpp"
#include "nlvc/nonlocal_exact.hpp"
#include "nlvc/tensor.hpp"

namespace nlvc {

// Knobs of the two-stage approximation: k candidate blocks, p x p pooling,
// softmax temperature beta (stage 2 only; stage 1 just ranks distances).
// max_dense_pixels bounds the exact path's N x N matrices (0 disables the
// guard).
struct NonLocalConfig {
    int k = 4;
    int p = 10;
    double beta = 1.0;
    int threads = 1;
    int max_dense_pixels = 64 * 64;

    void validate() const;
};

// Pixel range of one block in the full-resolution map. Blocks tile the valid
// area; edge blocks are clipped when p does not divide H or W.
struct BlockExtent {
    int y0 = 0, y1 = 0;  // [y0, y1)
    int x0 = 0, x1 = 0;  // [x0, x1)

    int area() const { return (y1 - y0) * (x1 - x0); }
};

// Average-pooled feature map plus the block geometry it came from.
struct BlockSummary {
    int grid_h = 0;
    int grid_w = 0;
    int source_h = 0;
    int source_w = 0;
    int p = 0;
    Tensor features;  // (C, grid_h, grid_w)
    std::vector<BlockExtent> extents;

    int num_blocks() const { return grid_h * grid_w; }
};

// Per target block: the k most similar source blocks, ascending distance,
// ties broken by ascending block index.
struct CandidateMap {
    int k = 0;
    int num_blocks = 0;
    std::vector<std::vector<int>> candidates;  // [target block][k]
};

// Sparse column-normalized similarity: per target pixel j, candidate source
// pixel indices (at most k*p^2, shared per target block) with weights that sum
// to 1. Unstored entries are implicitly 0.
struct SparseSimilarity {
    int n = 0;
    double beta = 1.0;
    std::vector<std::vector<int>> block_sources;  // [target block][candidate pixel index]
    std::vector<int> pixel_block;                 // [target pixel] -> target block
    std::vector<std::size_t> row_offset;          // [target pixel] -> start in weights
    std::vector<double> weights;                  // ragged rows, row j has block row size
    std::vector<double> distances;                // matching layout, kept for gradients

    int row_size(int j) const { return static_cast<int>(block_sources[pixel_block[j]].size()); }
    const int* row_sources(int j) const { return block_sources[pixel_block[j]].data(); }
    const double* row_weights(int j) const { return weights.data() + row_offset[j]; }
};

// Analytic op/space model of the exact (psi) and approximate (phi) non-local
// similarity, with the optimal pooling size for a given k.
struct ComplexityEstimate {
    std::int64_t n = 0;
    int c = 0;
    int k = 0;
    int p = 0;
    double psi_time = 0.0;   // 2 N^2 C
    double phi_time = 0.0;   // (N/p^2)^2 C + 2 k N C p^2
    double psi_space = 0.0;  // 2 N^2
    double phi_space = 0.0;  // (N/p^2)^2 + k N / p^2 + 2 k N p^2
    double ratio = 0.0;      // 1/(2 p^4) + k p^2 / N
    double p_optimal = 0.0;  // (N/k)^(1/6)
    double ratio_min = 0.0;  // 1.5 (k/N)^(2/3)
};

// Pools the feature map with p x p average pooling (edge replication) and
// records the block extents over the valid pixel area.
BlockSummary summarize_blocks(const Tensor& features, int p);

// Euclidean distances between pooled super-pixels. Stage 1 of the
// approximation; rows index source (preceding) blocks.
DenseDistance block_distance(const BlockSummary& prev, const BlockSummary& cur,
                             MacCounter* macs = nullptr);

// Per target block, the k nearest source blocks under dp.
CandidateMap topk_blocks(const DenseDistance& dp, int k);

// Stage 2: exact pixel distances from each target pixel to every pixel of its
// block's k candidate source blocks, softmax-normalized over those candidates.
SparseSimilarity sparse_similarity(const Tensor& f_prev, const Tensor& f_cur,
                                   const CandidateMap& cand, const BlockSummary& prev,
                                   const BlockSummary& cur, const NonLocalConfig& cfg,
                                   MacCounter* macs = nullptr);

// warped(., j) = sum over stored candidates i of state(., i) * weight(i, j).
Tensor sparse_nl_warp(const Tensor& state, const SparseSimilarity& s,
                      MacCounter* macs = nullptr);

// Convenience: full stage-1 + stage-2 pipeline for one frame pair.
SparseSimilarity approx_similarity(const Tensor& f_prev, const Tensor& f_cur,
                                   const NonLocalConfig& cfg, MacCounter* macs = nullptr);

ComplexityEstimate complexity_estimate(std::int64_t n, int c, int k, int p);

}  // namespace nlvc
