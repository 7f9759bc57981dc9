#include "nlvc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nlvc {

Tensor::Tensor(int c, int h, int w, double fill)
    : channels(c), height(h), width(w) {
    check(c >= 0 && h >= 0 && w >= 0, "Tensor: negative dimension");
    data.assign(static_cast<std::size_t>(c) * h * w, fill);
}

Tensor Tensor::from(int c, int h, int w, std::vector<double> values) {
    check(values.size() == static_cast<std::size_t>(c) * h * w,
          "Tensor::from: data length " + std::to_string(values.size()) +
              " does not match " + std::to_string(c) + "x" + std::to_string(h) + "x" +
              std::to_string(w));
    Tensor t;
    t.channels = c;
    t.height = h;
    t.width = w;
    t.data = std::move(values);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void require_finite(const Tensor& t, const char* context) {
    if (!t.all_finite()) {
        throw std::runtime_error(std::string(context) + ": non-finite value in tensor");
    }
}

void LayerSpec::validate() const {
    check(in_channels >= 1, "LayerSpec: in_channels must be >= 1");
    check(out_channels >= 1, "LayerSpec: out_channels must be >= 1");
    check(kernel_size >= 1 && kernel_size % 2 == 1,
          "LayerSpec: kernel_size must be odd and >= 1, got " +
              std::to_string(kernel_size));
}

namespace {

inline int wrap(int i, int n) {
    i %= n;
    return i < 0 ? i + n : i;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const LayerSpec& spec, PadMode pad) {
    spec.validate();
    check(input.channels == spec.in_channels,
          "conv2d: input has " + std::to_string(input.channels) +
              " channels, spec expects " + std::to_string(spec.in_channels));
    check(weights.channels == spec.out_channels * spec.in_channels &&
              weights.height == spec.kernel_size && weights.width == spec.kernel_size,
          "conv2d: weights must be shaped (out*in, f, f) = (" +
              std::to_string(spec.out_channels * spec.in_channels) + ", " +
              std::to_string(spec.kernel_size) + ", " + std::to_string(spec.kernel_size) +
              ")");
    check(bias.channels == spec.out_channels && bias.height == 1 && bias.width == 1,
          "conv2d: bias must be shaped (out, 1, 1)");

    const int H = input.height;
    const int W = input.width;
    const int f = spec.kernel_size;
    const int r = f / 2;

    Tensor out(spec.out_channels, H, W);
    for (int o = 0; o < spec.out_channels; ++o) {
        double* out_plane = out.plane(o);
        const double b = bias.data[o];
        for (int i = 0; i < out.pixels(); ++i) out_plane[i] = b;

        for (int c = 0; c < spec.in_channels; ++c) {
            const double* in_plane = input.plane(c);
            const double* w_tap = weights.plane(o * spec.in_channels + c);
            for (int dy = 0; dy < f; ++dy) {
                for (int dx = 0; dx < f; ++dx) {
                    const double wv = w_tap[dy * f + dx];
                    if (wv == 0.0) continue;
                    const int oy = dy - r;
                    const int ox = dx - r;
                    for (int y = 0; y < H; ++y) {
                        int sy = y + oy;
                        if (pad == PadMode::circular) {
                            sy = wrap(sy, H);
                        } else if (sy < 0 || sy >= H) {
                            continue;  // zero padding contributes nothing
                        }
                        double* out_row = out_plane + static_cast<std::size_t>(y) * W;
                        const double* in_row = in_plane + static_cast<std::size_t>(sy) * W;
                        if (pad == PadMode::circular) {
                            for (int x = 0; x < W; ++x) {
                                out_row[x] += wv * in_row[wrap(x + ox, W)];
                            }
                        } else {
                            const int x0 = std::max(0, -ox);
                            const int x1 = std::min(W, W - ox);
                            for (int x = x0; x < x1; ++x) {
                                out_row[x] += wv * in_row[x + ox];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor avg_pool(const Tensor& input, int p) {
    check(p >= 1, "avg_pool: kernel size p must be >= 1, got " + std::to_string(p));
    if (p == 1) return input;

    const int H = input.height;
    const int W = input.width;
    const int gh = (H + p - 1) / p;
    const int gw = (W + p - 1) / p;
    const double inv = 1.0 / (static_cast<double>(p) * p);

    Tensor out(input.channels, gh, gw);
    for (int c = 0; c < input.channels; ++c) {
        const double* in_plane = input.plane(c);
        double* out_plane = out.plane(c);
        for (int by = 0; by < gh; ++by) {
            for (int bx = 0; bx < gw; ++bx) {
                double sum = 0.0;
                for (int dy = 0; dy < p; ++dy) {
                    const int y = std::min(by * p + dy, H - 1);  // edge replication
                    const double* row = in_plane + static_cast<std::size_t>(y) * W;
                    for (int dx = 0; dx < p; ++dx) {
                        sum += row[std::min(bx * p + dx, W - 1)];
                    }
                }
                out_plane[by * gw + bx] = sum * inv;
            }
        }
    }
    return out;
}

Tensor elementwise(const Tensor& input, Activation fn) {
    Tensor out = input;
    switch (fn) {
        case Activation::sigmoid:
            for (double& v : out.data) v = sigmoid_scalar(v);
            break;
        case Activation::tanh:
            for (double& v : out.data) v = std::tanh(v);
            break;
        case Activation::relu:
            for (double& v : out.data) v = v > 0.0 ? v : 0.0;
            break;
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "add: shape mismatch");
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "hadamard: shape mismatch");
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

Tensor scale(const Tensor& a, double factor) {
    Tensor out = a;
    for (double& v : out.data) v *= factor;
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    check(a.height == b.height && a.width == b.width,
          "concat_channels: spatial size mismatch");
    Tensor out(a.channels + b.channels, a.height, a.width);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

Tensor slice_channels(const Tensor& input, int begin, int count) {
    check(begin >= 0 && count >= 0 && begin + count <= input.channels,
          "slice_channels: range out of bounds");
    Tensor out(count, input.height, input.width);
    std::copy(input.plane(begin), input.plane(begin) + out.data.size(), out.data.begin());
    return out;
}

Tensor clamp01(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

}  // namespace nlvc
