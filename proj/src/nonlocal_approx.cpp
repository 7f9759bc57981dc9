#include "nlvc/nonlocal_approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace nlvc {

void NonLocalConfig::validate() const {
    check(k >= 1, "NonLocalConfig: k must be >= 1");
    check(p >= 1, "NonLocalConfig: p must be >= 1");
    check(beta > 0.0, "NonLocalConfig: beta must be positive");
    check(threads >= 1, "NonLocalConfig: threads must be >= 1");
}

BlockSummary summarize_blocks(const Tensor& features, int p) {
    check(p >= 1, "summarize_blocks: p must be >= 1");
    BlockSummary s;
    s.p = p;
    s.source_h = features.height;
    s.source_w = features.width;
    s.features = avg_pool(features, p);
    s.grid_h = s.features.height;
    s.grid_w = s.features.width;
    s.extents.reserve(static_cast<std::size_t>(s.grid_h) * s.grid_w);
    for (int by = 0; by < s.grid_h; ++by) {
        for (int bx = 0; bx < s.grid_w; ++bx) {
            BlockExtent e;
            e.y0 = by * p;
            e.y1 = std::min((by + 1) * p, features.height);
            e.x0 = bx * p;
            e.x1 = std::min((bx + 1) * p, features.width);
            s.extents.push_back(e);
        }
    }
    return s;
}

DenseDistance block_distance(const BlockSummary& prev, const BlockSummary& cur,
                             MacCounter* macs) {
    check(prev.grid_h == cur.grid_h && prev.grid_w == cur.grid_w,
          "block_distance: grid dimension mismatch");
    check(prev.features.channels == cur.features.channels,
          "block_distance: channel count mismatch");
    MacCounter local;
    DenseDistance d = pairwise_distance_vectorized(prev.features, cur.features,
                                                   macs ? &local : nullptr);
    if (macs) macs->stage1_distance += local.dense_distance;
    return d;
}

CandidateMap topk_blocks(const DenseDistance& dp, int k) {
    const int num_blocks = dp.n_prev;
    check(k >= 1 && k <= num_blocks,
          "topk_blocks: k = " + std::to_string(k) + " out of range [1, " +
              std::to_string(num_blocks) + "]");

    CandidateMap map;
    map.k = k;
    map.num_blocks = dp.n_cur;
    map.candidates.resize(dp.n_cur);

    std::vector<int> order(num_blocks);
    for (int j = 0; j < dp.n_cur; ++j) {
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + k, order.end(),
                          [&](int a, int b) {
                              const double da = dp.at(a, j);
                              const double db = dp.at(b, j);
                              if (da != db) return da < db;
                              return a < b;
                          });
        map.candidates[j].assign(order.begin(), order.begin() + k);
    }
    return map;
}

SparseSimilarity sparse_similarity(const Tensor& f_prev, const Tensor& f_cur,
                                   const CandidateMap& cand, const BlockSummary& prev,
                                   const BlockSummary& cur, const NonLocalConfig& cfg,
                                   MacCounter* macs) {
    cfg.validate();
    check(f_prev.channels == f_cur.channels &&
              f_prev.height == f_cur.height && f_prev.width == f_cur.width,
          "sparse_similarity: feature shape mismatch");
    check(prev.source_h == f_prev.height && prev.source_w == f_prev.width &&
              cur.source_h == f_cur.height && cur.source_w == f_cur.width,
          "sparse_similarity: block summary does not match feature dimensions");
    check(cand.num_blocks == cur.num_blocks(),
          "sparse_similarity: candidate map does not match target block grid");

    const int n = f_cur.pixels();
    const int c_count = f_cur.channels;
    const int w = f_cur.width;
    const int num_blocks = cur.num_blocks();

    SparseSimilarity s;
    s.n = n;
    s.beta = cfg.beta;

    // Candidate source pixels per target block: candidate blocks in ranked
    // order, pixels row-major within each extent.
    s.block_sources.resize(num_blocks);
    for (int b = 0; b < num_blocks; ++b) {
        auto& list = s.block_sources[b];
        for (int src_block : cand.candidates[b]) {
            const BlockExtent& e = prev.extents[src_block];
            for (int y = e.y0; y < e.y1; ++y) {
                for (int x = e.x0; x < e.x1; ++x) {
                    list.push_back(y * f_prev.width + x);
                }
            }
        }
    }

    s.pixel_block.assign(n, 0);
    for (int b = 0; b < num_blocks; ++b) {
        const BlockExtent& e = cur.extents[b];
        for (int y = e.y0; y < e.y1; ++y) {
            for (int x = e.x0; x < e.x1; ++x) {
                s.pixel_block[y * w + x] = b;
            }
        }
    }

    s.row_offset.resize(n + 1);
    s.row_offset[0] = 0;
    for (int j = 0; j < n; ++j) {
        s.row_offset[j + 1] = s.row_offset[j] + s.block_sources[s.pixel_block[j]].size();
    }
    s.weights.resize(s.row_offset[n]);
    s.distances.resize(s.row_offset[n]);

    const std::vector<double> a = pixel_major(f_prev);
    const std::vector<double> b_pm = pixel_major(f_cur);
    std::vector<double> na(n), nb(n);
    for (int i = 0; i < n; ++i) {
        const double* ai = a.data() + static_cast<std::size_t>(i) * c_count;
        double acc = 0.0;
        for (int c = 0; c < c_count; ++c) acc += ai[c] * ai[c];
        na[i] = acc;
    }
    for (int j = 0; j < n; ++j) {
        const double* bj = b_pm.data() + static_cast<std::size_t>(j) * c_count;
        double acc = 0.0;
        for (int c = 0; c < c_count; ++c) acc += bj[c] * bj[c];
        nb[j] = acc;
    }

    const double inv_beta = 1.0 / cfg.beta;
    std::uint64_t pair_count = 0;
    for (int b = 0; b < num_blocks; ++b) {
        pair_count += static_cast<std::uint64_t>(cur.extents[b].area()) *
                      s.block_sources[b].size();
    }

    parallel_for(num_blocks, cfg.threads, [&](int b_begin, int b_end) {
        for (int b = b_begin; b < b_end; ++b) {
            const auto& sources = s.block_sources[b];
            const int row_len = static_cast<int>(sources.size());
            const BlockExtent& e = cur.extents[b];
            for (int y = e.y0; y < e.y1; ++y) {
                for (int x = e.x0; x < e.x1; ++x) {
                    const int j = y * w + x;
                    const double* bj = b_pm.data() + static_cast<std::size_t>(j) * c_count;
                    double* drow = s.distances.data() + s.row_offset[j];
                    double* wrow = s.weights.data() + s.row_offset[j];
                    double dmin = std::numeric_limits<double>::infinity();
                    for (int idx = 0; idx < row_len; ++idx) {
                        const double* ai =
                            a.data() + static_cast<std::size_t>(sources[idx]) * c_count;
                        double dot = 0.0;
                        for (int c = 0; c < c_count; ++c) dot += ai[c] * bj[c];
                        const double sq = na[sources[idx]] + nb[j] - 2.0 * dot;
                        const double dist = sq > 0.0 ? std::sqrt(sq) : 0.0;
                        drow[idx] = dist;
                        dmin = std::min(dmin, dist);
                    }
                    double sum = 0.0;
                    for (int idx = 0; idx < row_len; ++idx) {
                        const double ev = std::exp((dmin - drow[idx]) * inv_beta);
                        wrow[idx] = ev;
                        sum += ev;
                    }
                    const double inv_sum = 1.0 / sum;
                    for (int idx = 0; idx < row_len; ++idx) wrow[idx] *= inv_sum;
                }
            }
        }
    });

    if (macs) {
        macs->stage2_distance +=
            pair_count * c_count + 2ULL * static_cast<std::uint64_t>(n) * c_count;
    }
    return s;
}

Tensor sparse_nl_warp(const Tensor& state, const SparseSimilarity& s, MacCounter* macs) {
    const int n = state.pixels();
    check(n == s.n, "sparse_nl_warp: state pixel count " + std::to_string(n) +
                        " does not match similarity size " + std::to_string(s.n));

    const int c_state = state.channels;
    const std::vector<double> st = pixel_major(state);
    std::vector<double> out_pm(static_cast<std::size_t>(n) * c_state, 0.0);

    std::uint64_t pair_count = 0;
    for (int j = 0; j < n; ++j) {
        const int row_len = s.row_size(j);
        const int* sources = s.row_sources(j);
        const double* wrow = s.row_weights(j);
        double* out_j = out_pm.data() + static_cast<std::size_t>(j) * c_state;
        for (int idx = 0; idx < row_len; ++idx) {
            const double wv = wrow[idx];
            const double* st_i = st.data() + static_cast<std::size_t>(sources[idx]) * c_state;
            for (int c = 0; c < c_state; ++c) out_j[c] += wv * st_i[c];
        }
        pair_count += static_cast<std::uint64_t>(row_len);
    }
    if (macs) macs->stage2_warp += pair_count * c_state;

    Tensor out(c_state, state.height, state.width);
    for (int c = 0; c < c_state; ++c) {
        double* plane = out.plane(c);
        for (int i = 0; i < n; ++i) {
            plane[i] = out_pm[static_cast<std::size_t>(i) * c_state + c];
        }
    }
    return out;
}

SparseSimilarity approx_similarity(const Tensor& f_prev, const Tensor& f_cur,
                                   const NonLocalConfig& cfg, MacCounter* macs) {
    const BlockSummary prev = summarize_blocks(f_prev, cfg.p);
    const BlockSummary cur = summarize_blocks(f_cur, cfg.p);
    const DenseDistance dp = block_distance(prev, cur, macs);
    const CandidateMap cand = topk_blocks(dp, cfg.k);
    return sparse_similarity(f_prev, f_cur, cand, prev, cur, cfg, macs);
}

ComplexityEstimate complexity_estimate(std::int64_t n, int c, int k, int p) {
    check(n >= 1 && c >= 1 && k >= 1 && p >= 1,
          "complexity_estimate: all arguments must be positive");
    check(static_cast<std::int64_t>(p) * p <= n,
          "complexity_estimate: p^2 must not exceed N");

    const double nd = static_cast<double>(n);
    const double cd = static_cast<double>(c);
    const double kd = static_cast<double>(k);
    const double p2 = static_cast<double>(p) * p;
    const double nb = nd / p2;  // block count, real-valued in the model

    ComplexityEstimate e;
    e.n = n;
    e.c = c;
    e.k = k;
    e.p = p;
    e.psi_time = 2.0 * nd * nd * cd;
    e.phi_time = nb * nb * cd + 2.0 * kd * nd * cd * p2;
    e.psi_space = 2.0 * nd * nd;
    e.phi_space = nb * nb + kd * nb + 2.0 * kd * nd * p2;
    e.ratio = 1.0 / (2.0 * p2 * p2) + kd * p2 / nd;
    e.p_optimal = std::pow(nd / kd, 1.0 / 6.0);
    e.ratio_min = 1.5 * std::pow(kd / nd, 2.0 / 3.0);
    return e;
}

}  // namespace nlvc
