#include "nlvc/nonlocal_exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nlvc {

namespace {

void check_feature_pair(const Tensor& f_prev, const Tensor& f_cur, const char* op) {
    check(f_prev.channels == f_cur.channels,
          std::string(op) + ": channel count mismatch (" + std::to_string(f_prev.channels) +
              " vs " + std::to_string(f_cur.channels) + ")");
    check(f_prev.height == f_cur.height && f_prev.width == f_cur.width,
          std::string(op) + ": spatial size mismatch");
}

}  // namespace

std::vector<double> pixel_major(const Tensor& t) {
    const int n = t.pixels();
    const int c_count = t.channels;
    std::vector<double> out(static_cast<std::size_t>(n) * c_count);
    for (int c = 0; c < c_count; ++c) {
        const double* plane = t.plane(c);
        for (int i = 0; i < n; ++i) {
            out[static_cast<std::size_t>(i) * c_count + c] = plane[i];
        }
    }
    return out;
}

DenseDistance pairwise_distance_naive(const Tensor& f_prev, const Tensor& f_cur,
                                      MacCounter* macs) {
    check_feature_pair(f_prev, f_cur, "pairwise_distance_naive");
    const int n = f_prev.pixels();
    const int c_count = f_prev.channels;

    DenseDistance d;
    d.n_prev = n;
    d.n_cur = n;
    d.values.resize(static_cast<std::size_t>(n) * n);

    const std::vector<double> a = pixel_major(f_prev);
    const std::vector<double> b = pixel_major(f_cur);
    for (int i = 0; i < n; ++i) {
        const double* ai = a.data() + static_cast<std::size_t>(i) * c_count;
        double* row = d.values.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b.data() + static_cast<std::size_t>(j) * c_count;
            double acc = 0.0;
            for (int c = 0; c < c_count; ++c) {
                const double diff = ai[c] - bj[c];
                acc += diff * diff;
            }
            row[j] = std::sqrt(acc);
        }
    }
    if (macs) macs->dense_distance += static_cast<std::uint64_t>(n) * n * c_count;
    return d;
}

DenseDistance pairwise_distance_vectorized(const Tensor& f_prev, const Tensor& f_cur,
                                           MacCounter* macs) {
    check_feature_pair(f_prev, f_cur, "pairwise_distance_vectorized");
    const int n = f_prev.pixels();
    const int c_count = f_prev.channels;

    const std::vector<double> a = pixel_major(f_prev);
    const std::vector<double> b = pixel_major(f_cur);

    // Squared norms accumulated in the same channel order as the cross terms,
    // so identical inputs cancel to exactly zero.
    std::vector<double> na(n), nb(n);
    for (int i = 0; i < n; ++i) {
        const double* ai = a.data() + static_cast<std::size_t>(i) * c_count;
        double acc = 0.0;
        for (int c = 0; c < c_count; ++c) acc += ai[c] * ai[c];
        na[i] = acc;
    }
    for (int j = 0; j < n; ++j) {
        const double* bj = b.data() + static_cast<std::size_t>(j) * c_count;
        double acc = 0.0;
        for (int c = 0; c < c_count; ++c) acc += bj[c] * bj[c];
        nb[j] = acc;
    }

    DenseDistance d;
    d.n_prev = n;
    d.n_cur = n;
    d.values.resize(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        const double* ai = a.data() + static_cast<std::size_t>(i) * c_count;
        double* row = d.values.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b.data() + static_cast<std::size_t>(j) * c_count;
            double dot = 0.0;
            for (int c = 0; c < c_count; ++c) dot += ai[c] * bj[c];
            const double sq = na[i] + nb[j] - 2.0 * dot;
            row[j] = sq > 0.0 ? std::sqrt(sq) : 0.0;
        }
    }
    if (macs) {
        macs->dense_distance += static_cast<std::uint64_t>(n) * n * c_count +
                                2ULL * static_cast<std::uint64_t>(n) * c_count;
    }
    return d;
}

DenseSimilarity similarity_from_distance(const DenseDistance& d, double beta) {
    check(beta > 0.0, "similarity_from_distance: beta must be positive");
    check(d.n_prev >= 1 && d.n_cur >= 1, "similarity_from_distance: empty distance matrix");

    DenseSimilarity s;
    s.n_prev = d.n_prev;
    s.n_cur = d.n_cur;
    s.beta = beta;
    s.values.resize(d.values.size());

    const double inv_beta = 1.0 / beta;
    for (int j = 0; j < d.n_cur; ++j) {
        double dmin = d.values[j];
        for (int i = 1; i < d.n_prev; ++i) {
            dmin = std::min(dmin, d.at(i, j));
        }
        double sum = 0.0;
        for (int i = 0; i < d.n_prev; ++i) {
            const double e = std::exp((dmin - d.at(i, j)) * inv_beta);
            s.values[static_cast<std::size_t>(i) * d.n_cur + j] = e;
            sum += e;
        }
        const double inv_sum = 1.0 / sum;  // sum >= 1 after the shift
        for (int i = 0; i < d.n_prev; ++i) {
            s.values[static_cast<std::size_t>(i) * d.n_cur + j] *= inv_sum;
        }
    }
    return s;
}

Tensor nl_warp(const Tensor& state, const DenseSimilarity& s, MacCounter* macs) {
    const int n = state.pixels();
    check(s.n_prev == n, "nl_warp: state pixel count " + std::to_string(n) +
                             " does not match similarity rows " + std::to_string(s.n_prev));
    check(s.n_cur == n, "nl_warp: similarity must be square for same-size frames");

    Tensor out(state.channels, state.height, state.width);
    for (int c = 0; c < state.channels; ++c) {
        const double* in_plane = state.plane(c);
        double* out_plane = out.plane(c);
        for (int i = 0; i < n; ++i) {
            const double si = in_plane[i];
            const double* s_row = s.values.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                out_plane[j] += si * s_row[j];
            }
        }
    }
    if (macs) macs->dense_warp += static_cast<std::uint64_t>(state.channels) * n * n;
    return out;
}

Tensor nl_attend_streaming(const Tensor& f_prev, const Tensor& f_cur, const Tensor& state,
                           double beta, int col_block, int threads, MacCounter* macs) {
    check_feature_pair(f_prev, f_cur, "nl_attend_streaming");
    check(beta > 0.0, "nl_attend_streaming: beta must be positive");
    check(col_block >= 1, "nl_attend_streaming: col_block must be >= 1");
    const int n = f_prev.pixels();
    check(state.pixels() == n, "nl_attend_streaming: state size mismatch");

    const int c_count = f_prev.channels;
    const int c_state = state.channels;
    const std::vector<double> a = pixel_major(f_prev);
    const std::vector<double> b = pixel_major(f_cur);
    const std::vector<double> st = pixel_major(state);

    std::vector<double> na(n);
    for (int i = 0; i < n; ++i) {
        const double* ai = a.data() + static_cast<std::size_t>(i) * c_count;
        double acc = 0.0;
        for (int c = 0; c < c_count; ++c) acc += ai[c] * ai[c];
        na[i] = acc;
    }

    std::vector<double> out_pm(static_cast<std::size_t>(n) * c_state, 0.0);
    const double inv_beta = 1.0 / beta;
    const int blocks = (n + col_block - 1) / col_block;

    parallel_for(blocks, threads, [&](int blk_begin, int blk_end) {
        std::vector<double> col(static_cast<std::size_t>(n));
        for (int blk = blk_begin; blk < blk_end; ++blk) {
            const int j0 = blk * col_block;
            const int j1 = std::min(n, j0 + col_block);
            for (int j = j0; j < j1; ++j) {
                const double* bj = b.data() + static_cast<std::size_t>(j) * c_count;
                double nb = 0.0;
                for (int c = 0; c < c_count; ++c) nb += bj[c] * bj[c];

                double dmin = std::numeric_limits<double>::infinity();
                for (int i = 0; i < n; ++i) {
                    const double* ai = a.data() + static_cast<std::size_t>(i) * c_count;
                    double dot = 0.0;
                    for (int c = 0; c < c_count; ++c) dot += ai[c] * bj[c];
                    const double sq = na[i] + nb - 2.0 * dot;
                    const double dist = sq > 0.0 ? std::sqrt(sq) : 0.0;
                    col[i] = dist;
                    dmin = std::min(dmin, dist);
                }
                double sum = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double e = std::exp((dmin - col[i]) * inv_beta);
                    col[i] = e;
                    sum += e;
                }
                const double inv_sum = 1.0 / sum;
                double* out_j = out_pm.data() + static_cast<std::size_t>(j) * c_state;
                for (int i = 0; i < n; ++i) {
                    const double w = col[i] * inv_sum;
                    const double* st_i = st.data() + static_cast<std::size_t>(i) * c_state;
                    for (int c = 0; c < c_state; ++c) out_j[c] += w * st_i[c];
                }
            }
        }
    });

    if (macs) {
        macs->dense_distance += static_cast<std::uint64_t>(n) * n * c_count +
                                2ULL * static_cast<std::uint64_t>(n) * c_count;
        macs->dense_warp += static_cast<std::uint64_t>(c_state) * n * n;
    }

    Tensor out(c_state, state.height, state.width);
    for (int c = 0; c < c_state; ++c) {
        double* plane = out.plane(c);
        for (int i = 0; i < n; ++i) {
            plane[i] = out_pm[static_cast<std::size_t>(i) * c_state + c];
        }
    }
    return out;
}

}  // namespace nlvc
