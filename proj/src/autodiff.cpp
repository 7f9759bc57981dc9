#include "nlvc/autodiff.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "nlvc/nonlocal_exact.hpp"

namespace nlvc::ad {

namespace {

Tensor from_pixel_major(const std::vector<double>& pm, int channels, int height, int width) {
    Tensor t(channels, height, width);
    const int n = height * width;
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < channels; ++c) {
            t.data[static_cast<std::size_t>(c) * n + i] = pm[static_cast<std::size_t>(i) * channels + c];
        }
    }
    return t;
}

}  // namespace

Var Tape::push(Tensor value, bool requires_grad,
               std::function<void(Tape&, const Tensor&)> backprop) {
    check(!consumed_, "Tape: cannot record ops after backward");
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    if (requires_grad) {
        node.grad = Tensor(node.value.channels, node.value.height, node.value.width);
        node.backprop = std::move(backprop);
    }
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
    check(v.idx >= 0 && v.idx < static_cast<int>(nodes_.size()), "Tape: invalid var");
    return nodes_[v.idx];
}

void Tape::add_grad(int idx, const Tensor& g) {
    if (!nodes_[idx].requires_grad) return;
    Tensor& acc = nodes_[idx].grad;
    check(acc.same_shape(g), "Tape: gradient shape mismatch");
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

double Tape::value_scalar(Var v) const {
    const Tensor& t = node(v).value;
    check(t.size() == 1, "Tape: node is not a scalar");
    return t.data[0];
}

const Tensor& Tape::grad(Var v) const {
    check(consumed_, "Tape: gradients requested before backward");
    const Node& n = node(v);
    check(n.requires_grad, "Tape: node does not track gradients");
    return n.grad;
}

void Tape::backward(Var loss) {
    check(!consumed_, "Tape: backward already ran; tapes are single-use");
    Node& top = nodes_.at(loss.idx);
    check(top.value.size() == 1, "Tape: backward needs a scalar loss");
    consumed_ = true;
    if (!top.requires_grad) {
        return;  // loss does not depend on any tracked leaf
    }
    top.grad.data[0] = 1.0;
    for (int idx = loss.idx; idx >= 0; --idx) {
        if (nodes_[idx].requires_grad && nodes_[idx].backprop) {
            nodes_[idx].backprop(*this, nodes_[idx].grad);
        }
    }
}

Var Tape::conv2d(Var input, Var weights, Var bias, const LayerSpec& spec, PadMode pad) {
    Tensor out = nlvc::conv2d(node(input).value, node(weights).value, node(bias).value,
                              spec, pad);
    const bool rg = node(input).requires_grad || node(weights).requires_grad ||
                    node(bias).requires_grad;
    const int in_idx = input.idx, w_idx = weights.idx, b_idx = bias.idx;
    return push(std::move(out), rg, [in_idx, w_idx, b_idx, spec, pad](Tape& t, const Tensor& g) {
        const Tensor& in = t.nodes_[in_idx].value;
        const Tensor& w = t.nodes_[w_idx].value;
        const int H = in.height, W = in.width;
        const int f = spec.kernel_size, r = f / 2;
        const bool want_in = t.wants_grad(in_idx);
        const bool want_w = t.wants_grad(w_idx);

        if (t.wants_grad(b_idx)) {
            Tensor& db = t.grad_ref(b_idx);
            for (int o = 0; o < spec.out_channels; ++o) {
                const double* gp = g.plane(o);
                double acc = 0.0;
                for (int i = 0; i < H * W; ++i) acc += gp[i];
                db.data[o] += acc;
            }
        }
        if (!want_in && !want_w) return;

        Tensor* din = want_in ? &t.grad_ref(in_idx) : nullptr;
        Tensor* dw = want_w ? &t.grad_ref(w_idx) : nullptr;
        const auto wrap = [](int i, int n) { i %= n; return i < 0 ? i + n : i; };
        for (int o = 0; o < spec.out_channels; ++o) {
            const double* gp = g.plane(o);
            for (int c = 0; c < spec.in_channels; ++c) {
                const double* in_plane = in.plane(c);
                const double* w_tap = w.plane(o * spec.in_channels + c);
                double* din_plane = want_in ? din->plane(c) : nullptr;
                double* dw_tap = want_w ? dw->plane(o * spec.in_channels + c) : nullptr;
                for (int dy = 0; dy < f; ++dy) {
                    for (int dx = 0; dx < f; ++dx) {
                        const double wv = w_tap[dy * f + dx];
                        const int oy = dy - r, ox = dx - r;
                        double wacc = 0.0;
                        for (int y = 0; y < H; ++y) {
                            int sy = y + oy;
                            if (pad == PadMode::circular) {
                                sy = wrap(sy, H);
                            } else if (sy < 0 || sy >= H) {
                                continue;
                            }
                            const double* g_row = gp + static_cast<std::size_t>(y) * W;
                            const double* in_row = in_plane + static_cast<std::size_t>(sy) * W;
                            double* din_row =
                                want_in ? din_plane + static_cast<std::size_t>(sy) * W : nullptr;
                            if (pad == PadMode::circular) {
                                for (int x = 0; x < W; ++x) {
                                    const int sx = wrap(x + ox, W);
                                    if (want_in) din_row[sx] += wv * g_row[x];
                                    if (want_w) wacc += in_row[sx] * g_row[x];
                                }
                            } else {
                                const int x0 = std::max(0, -ox);
                                const int x1 = std::min(W, W - ox);
                                for (int x = x0; x < x1; ++x) {
                                    if (want_in) din_row[x + ox] += wv * g_row[x];
                                    if (want_w) wacc += in_row[x + ox] * g_row[x];
                                }
                            }
                        }
                        if (want_w) dw_tap[dy * f + dx] += wacc;
                    }
                }
            }
        }
    });
}

Var Tape::activation(Var x, Activation act) {
    Tensor out = elementwise(node(x).value, act);
    const bool rg = node(x).requires_grad;
    const int x_idx = x.idx;
    const int self = static_cast<int>(nodes_.size());
    return push(std::move(out), rg, [x_idx, self, act](Tape& t, const Tensor& g) {
        if (!t.wants_grad(x_idx)) return;
        const Tensor& y = t.nodes_[self].value;
        Tensor& dx = t.grad_ref(x_idx);
        switch (act) {
            case Activation::sigmoid:
                for (std::size_t i = 0; i < g.data.size(); ++i) {
                    dx.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
                }
                break;
            case Activation::tanh:
                for (std::size_t i = 0; i < g.data.size(); ++i) {
                    dx.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
                }
                break;
            case Activation::relu:
                for (std::size_t i = 0; i < g.data.size(); ++i) {
                    if (y.data[i] > 0.0) dx.data[i] += g.data[i];
                }
                break;
        }
    });
}

Var Tape::add(Var a, Var b) {
    Tensor out = nlvc::add(node(a).value, node(b).value);
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    const int a_idx = a.idx, b_idx = b.idx;
    return push(std::move(out), rg, [a_idx, b_idx](Tape& t, const Tensor& g) {
        t.add_grad(a_idx, g);
        t.add_grad(b_idx, g);
    });
}

Var Tape::hadamard(Var a, Var b) {
    Tensor out = nlvc::hadamard(node(a).value, node(b).value);
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    const int a_idx = a.idx, b_idx = b.idx;
    return push(std::move(out), rg, [a_idx, b_idx](Tape& t, const Tensor& g) {
        if (t.wants_grad(a_idx)) {
            const Tensor& bv = t.nodes_[b_idx].value;
            Tensor& da = t.grad_ref(a_idx);
            for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i] * bv.data[i];
        }
        if (t.wants_grad(b_idx)) {
            const Tensor& av = t.nodes_[a_idx].value;
            Tensor& db = t.grad_ref(b_idx);
            for (std::size_t i = 0; i < g.data.size(); ++i) db.data[i] += g.data[i] * av.data[i];
        }
    });
}

Var Tape::scale(Var x, double factor) {
    Tensor out = nlvc::scale(node(x).value, factor);
    const bool rg = node(x).requires_grad;
    const int x_idx = x.idx;
    return push(std::move(out), rg, [x_idx, factor](Tape& t, const Tensor& g) {
        if (!t.wants_grad(x_idx)) return;
        Tensor& dx = t.grad_ref(x_idx);
        for (std::size_t i = 0; i < g.data.size(); ++i) dx.data[i] += factor * g.data[i];
    });
}

Var Tape::avg_pool(Var x, int pool) {
    Tensor out = nlvc::avg_pool(node(x).value, pool);
    const bool rg = node(x).requires_grad;
    const int x_idx = x.idx;
    return push(std::move(out), rg, [x_idx, pool](Tape& t, const Tensor& g) {
        if (!t.wants_grad(x_idx)) return;
        Tensor& dx = t.grad_ref(x_idx);
        if (pool == 1) {
            for (std::size_t i = 0; i < g.data.size(); ++i) dx.data[i] += g.data[i];
            return;
        }
        const int H = dx.height, W = dx.width;
        const double inv = 1.0 / (static_cast<double>(pool) * pool);
        for (int c = 0; c < dx.channels; ++c) {
            const double* gp = g.plane(c);
            double* dp = dx.plane(c);
            for (int by = 0; by < g.height; ++by) {
                for (int bx = 0; bx < g.width; ++bx) {
                    const double gv = gp[by * g.width + bx] * inv;
                    for (int dy = 0; dy < pool; ++dy) {
                        const int y = std::min(by * pool + dy, H - 1);
                        for (int dxp = 0; dxp < pool; ++dxp) {
                            dp[y * W + std::min(bx * pool + dxp, W - 1)] += gv;
                        }
                    }
                }
            }
        }
    });
}

Var Tape::concat_channels(Var a, Var b) {
    Tensor out = nlvc::concat_channels(node(a).value, node(b).value);
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    const int a_idx = a.idx, b_idx = b.idx;
    const int a_ch = node(a).value.channels;
    const int b_ch = node(b).value.channels;
    return push(std::move(out), rg, [a_idx, b_idx, a_ch, b_ch](Tape& t, const Tensor& g) {
        if (t.wants_grad(a_idx)) t.add_grad(a_idx, nlvc::slice_channels(g, 0, a_ch));
        if (t.wants_grad(b_idx)) t.add_grad(b_idx, nlvc::slice_channels(g, a_ch, b_ch));
    });
}

Var Tape::slice_channels(Var x, int begin, int count) {
    Tensor out = nlvc::slice_channels(node(x).value, begin, count);
    const bool rg = node(x).requires_grad;
    const int x_idx = x.idx;
    return push(std::move(out), rg, [x_idx, begin](Tape& t, const Tensor& g) {
        if (!t.wants_grad(x_idx)) return;
        Tensor& dx = t.grad_ref(x_idx);
        double* base = dx.plane(begin);
        for (std::size_t i = 0; i < g.data.size(); ++i) base[i] += g.data[i];
    });
}

Var Tape::nl_attend(Var f_prev, Var f_cur, Var state, double beta) {
    const Tensor& up = node(f_prev).value;
    const Tensor& vp = node(f_cur).value;
    const Tensor& st = node(state).value;
    check(up.channels == vp.channels && up.height == vp.height && up.width == vp.width,
          "nl_attend: feature maps must share shape");
    check(st.height == up.height && st.width == up.width,
          "nl_attend: state spatial size must match the features");
    check(beta > 0.0, "nl_attend: beta must be positive");

    DenseDistance dist = pairwise_distance_vectorized(up, vp);
    DenseSimilarity sim = similarity_from_distance(dist, beta);
    Tensor out = nl_warp(st, sim);

    const bool rg = node(f_prev).requires_grad || node(f_cur).requires_grad ||
                    node(state).requires_grad;
    if (!rg) return push(std::move(out), false, nullptr);

    const int u_idx = f_prev.idx, v_idx = f_cur.idx, s_idx = state.idx;
    auto dist_v = std::make_shared<std::vector<double>>(std::move(dist.values));
    auto sim_v = std::make_shared<std::vector<double>>(std::move(sim.values));
    return push(std::move(out), true,
                [u_idx, v_idx, s_idx, beta, dist_v, sim_v](Tape& t, const Tensor& g) {
        const Tensor& uf = t.nodes_[u_idx].value;
        const Tensor& vf = t.nodes_[v_idx].value;
        const Tensor& st = t.nodes_[s_idx].value;
        const int n = uf.pixels();
        const int cf = uf.channels;
        const int cs = st.channels;
        const std::vector<double> um = pixel_major(uf);
        const std::vector<double> vm = pixel_major(vf);
        const std::vector<double> pm = pixel_major(st);
        const std::vector<double> gm = pixel_major(g);
        const std::vector<double>& D = *dist_v;
        const std::vector<double>& S = *sim_v;

        const bool want_u = t.wants_grad(u_idx);
        const bool want_v = t.wants_grad(v_idx);
        const bool want_s = t.wants_grad(s_idx);
        std::vector<double> du(want_u ? um.size() : 0, 0.0);
        std::vector<double> dv(want_v ? vm.size() : 0, 0.0);
        std::vector<double> ds(want_s ? pm.size() : 0, 0.0);
        std::vector<double> dsim(n);  // d(loss)/d(S(:,j)) for the current column

        for (int j = 0; j < n; ++j) {
            const double* gj = gm.data() + static_cast<std::size_t>(j) * cs;
            double sigma = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* pi = pm.data() + static_cast<std::size_t>(i) * cs;
                double dot = 0.0;
                for (int c = 0; c < cs; ++c) dot += pi[c] * gj[c];
                dsim[i] = dot;
                const double w = S[static_cast<std::size_t>(i) * n + j];
                sigma += w * dot;
                if (want_s) {
                    double* dsi = ds.data() + static_cast<std::size_t>(i) * cs;
                    for (int c = 0; c < cs; ++c) dsi[c] += w * gj[c];
                }
            }
            if (!want_u && !want_v) continue;
            const double* vj = vm.data() + static_cast<std::size_t>(j) * cf;
            double* dvj = want_v ? dv.data() + static_cast<std::size_t>(j) * cf : nullptr;
            for (int i = 0; i < n; ++i) {
                const std::size_t ij = static_cast<std::size_t>(i) * n + j;
                const double d = D[ij];
                if (d <= 0.0) continue;  // coincident pixels: flat direction
                const double dd = -(S[ij] * (dsim[i] - sigma)) / beta;
                const double coef = dd / d;
                if (coef == 0.0) continue;
                const double* ui = um.data() + static_cast<std::size_t>(i) * cf;
                double* dui = want_u ? du.data() + static_cast<std::size_t>(i) * cf : nullptr;
                for (int c = 0; c < cf; ++c) {
                    const double diff = coef * (ui[c] - vj[c]);
                    if (want_u) dui[c] += diff;
                    if (want_v) dvj[c] -= diff;
                }
            }
        }
        if (want_u) t.add_grad(u_idx, from_pixel_major(du, cf, uf.height, uf.width));
        if (want_v) t.add_grad(v_idx, from_pixel_major(dv, cf, vf.height, vf.width));
        if (want_s) t.add_grad(s_idx, from_pixel_major(ds, cs, st.height, st.width));
    });
}

Var Tape::nl_attend_sparse(Var f_prev, Var f_cur, Var state, const CandidateMap& cand,
                           const NonLocalConfig& cfg) {
    const Tensor& up = node(f_prev).value;
    const Tensor& vp = node(f_cur).value;
    const Tensor& st = node(state).value;
    check(up.channels == vp.channels && up.height == vp.height && up.width == vp.width,
          "nl_attend_sparse: feature maps must share shape");
    check(st.height == up.height && st.width == up.width,
          "nl_attend_sparse: state spatial size must match the features");

    const BlockSummary prev = summarize_blocks(up, cfg.p);
    const BlockSummary cur = summarize_blocks(vp, cfg.p);
    auto sim = std::make_shared<SparseSimilarity>(
        sparse_similarity(up, vp, cand, prev, cur, cfg));
    Tensor out = sparse_nl_warp(st, *sim);

    const bool rg = node(f_prev).requires_grad || node(f_cur).requires_grad ||
                    node(state).requires_grad;
    if (!rg) return push(std::move(out), false, nullptr);

    const int u_idx = f_prev.idx, v_idx = f_cur.idx, s_idx = state.idx;
    return push(std::move(out), true, [u_idx, v_idx, s_idx, sim](Tape& t, const Tensor& g) {
        const Tensor& uf = t.nodes_[u_idx].value;
        const Tensor& vf = t.nodes_[v_idx].value;
        const Tensor& st = t.nodes_[s_idx].value;
        const int n = uf.pixels();
        const int cf = uf.channels;
        const int cs = st.channels;
        const std::vector<double> um = pixel_major(uf);
        const std::vector<double> vm = pixel_major(vf);
        const std::vector<double> pm = pixel_major(st);
        const std::vector<double> gm = pixel_major(g);

        const bool want_u = t.wants_grad(u_idx);
        const bool want_v = t.wants_grad(v_idx);
        const bool want_s = t.wants_grad(s_idx);
        std::vector<double> du(want_u ? um.size() : 0, 0.0);
        std::vector<double> dv(want_v ? vm.size() : 0, 0.0);
        std::vector<double> ds(want_s ? pm.size() : 0, 0.0);
        std::vector<double> dsim;

        for (int j = 0; j < n; ++j) {
            const int m = sim->row_size(j);
            const int* src = sim->row_sources(j);
            const double* w = sim->row_weights(j);
            const double* d = sim->distances.data() + sim->row_offset[j];
            const double* gj = gm.data() + static_cast<std::size_t>(j) * cs;
            dsim.assign(m, 0.0);
            double sigma = 0.0;
            for (int e = 0; e < m; ++e) {
                const int i = src[e];
                const double* pi = pm.data() + static_cast<std::size_t>(i) * cs;
                double dot = 0.0;
                for (int c = 0; c < cs; ++c) dot += pi[c] * gj[c];
                dsim[e] = dot;
                sigma += w[e] * dot;
                if (want_s) {
                    double* dsi = ds.data() + static_cast<std::size_t>(i) * cs;
                    for (int c = 0; c < cs; ++c) dsi[c] += w[e] * gj[c];
                }
            }
            if (!want_u && !want_v) continue;
            const double* vj = vm.data() + static_cast<std::size_t>(j) * cf;
            double* dvj = want_v ? dv.data() + static_cast<std::size_t>(j) * cf : nullptr;
            for (int e = 0; e < m; ++e) {
                if (d[e] <= 0.0) continue;
                const double dd = -(w[e] * (dsim[e] - sigma)) / sim->beta;
                const double coef = dd / d[e];
                if (coef == 0.0) continue;
                const int i = src[e];
                const double* ui = um.data() + static_cast<std::size_t>(i) * cf;
                double* dui = want_u ? du.data() + static_cast<std::size_t>(i) * cf : nullptr;
                for (int c = 0; c < cf; ++c) {
                    const double diff = coef * (ui[c] - vj[c]);
                    if (want_u) dui[c] += diff;
                    if (want_v) dvj[c] -= diff;
                }
            }
        }
        if (want_u) t.add_grad(u_idx, from_pixel_major(du, cf, uf.height, uf.width));
        if (want_v) t.add_grad(v_idx, from_pixel_major(dv, cf, vf.height, vf.width));
        if (want_s) t.add_grad(s_idx, from_pixel_major(ds, cs, st.height, st.width));
    });
}

Var Tape::l2_norm_loss(Var y_hat, Tensor target) {
    const Tensor& y = node(y_hat).value;
    check(y.same_shape(target), "l2_norm_loss: shape mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const double d = y.data[i] - target.data[i];
        sq += d * d;
    }
    const double norm = std::sqrt(sq);
    const bool rg = node(y_hat).requires_grad;
    const int y_idx = y_hat.idx;
    auto tgt = std::make_shared<Tensor>(std::move(target));
    return push(Tensor::from(1, 1, 1, {norm}), rg, [y_idx, tgt, norm](Tape& t, const Tensor& g) {
        if (!t.wants_grad(y_idx) || norm == 0.0) return;
        const Tensor& y = t.nodes_[y_idx].value;
        Tensor& dy = t.grad_ref(y_idx);
        const double s = g.data[0] / norm;
        for (std::size_t i = 0; i < y.data.size(); ++i) {
            dy.data[i] += s * (y.data[i] - tgt->data[i]);
        }
    });
}

Var Tape::mse_loss(Var y_hat, Tensor target) {
    const Tensor& y = node(y_hat).value;
    check(y.same_shape(target), "mse_loss: shape mismatch");
    const double inv_n = 1.0 / static_cast<double>(y.data.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const double d = y.data[i] - target.data[i];
        acc += d * d;
    }
    const bool rg = node(y_hat).requires_grad;
    const int y_idx = y_hat.idx;
    auto tgt = std::make_shared<Tensor>(std::move(target));
    return push(Tensor::from(1, 1, 1, {acc * inv_n}), rg,
                [y_idx, tgt, inv_n](Tape& t, const Tensor& g) {
        if (!t.wants_grad(y_idx)) return;
        const Tensor& y = t.nodes_[y_idx].value;
        Tensor& dy = t.grad_ref(y_idx);
        const double s = 2.0 * inv_n * g.data[0];
        for (std::size_t i = 0; i < y.data.size(); ++i) {
            dy.data[i] += s * (y.data[i] - tgt->data[i]);
        }
    });
}

Var Tape::weighted_sum(Var x, Tensor weights) {
    const Tensor& xv = node(x).value;
    check(xv.same_shape(weights), "weighted_sum: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < xv.data.size(); ++i) acc += xv.data[i] * weights.data[i];
    const bool rg = node(x).requires_grad;
    const int x_idx = x.idx;
    auto wts = std::make_shared<Tensor>(std::move(weights));
    return push(Tensor::from(1, 1, 1, {acc}), rg, [x_idx, wts](Tape& t, const Tensor& g) {
        if (!t.wants_grad(x_idx)) return;
        Tensor& dx = t.grad_ref(x_idx);
        const double s = g.data[0];
        for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += s * wts->data[i];
    });
}

}  // namespace nlvc::ad
