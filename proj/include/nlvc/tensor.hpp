#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "nlvc/common.hpp"

namespace nlvc {

// Dense rank-3 array of doubles in row-major (channel, row, column) order.
// The universal carrier for frames, feature maps and recurrent states.
// Convolution kernel stacks reuse the same storage with channels = out*in
// and height = width = kernel size.
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int c, int h, int w, double fill = 0.0);

    static Tensor from(int c, int h, int w, std::vector<double> values);

    int pixels() const { return height * width; }  // N = H*W
    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor& other) const {
        return channels == other.channels && height == other.height && width == other.width;
    }

    double& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double* plane(int c) { return data.data() + static_cast<std::size_t>(c) * pixels(); }
    const double* plane(int c) const {
        return data.data() + static_cast<std::size_t>(c) * pixels();
    }

    bool all_finite() const;
};

// Same-size 2D convolution layer: stride 1, odd kernel.
struct LayerSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel_size = 1;

    void validate() const;
};

enum class PadMode { zero, circular };
enum class Activation { sigmoid, tanh, relu };

// One convolution layer's learnable state.
struct ConvLayer {
    LayerSpec spec;
    Tensor weights;  // (out*in, f, f)
    Tensor bias;     // (out, 1, 1)
};

// Same-size convolution. `weights` holds (out, in, f, f) as a Tensor with
// channels = out*in, height = width = f; `bias` is (out, 1, 1).
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const LayerSpec& spec, PadMode pad = PadMode::zero);

inline Tensor conv2d(const Tensor& input, const ConvLayer& layer,
                     PadMode pad = PadMode::zero) {
    return conv2d(input, layer.weights, layer.bias, layer.spec, pad);
}

// p x p average pooling producing ceil(H/p) x ceil(W/p); edge-replicated
// padding when p does not divide the input size.
Tensor avg_pool(const Tensor& input, int p);

Tensor elementwise(const Tensor& input, Activation fn);

inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor add(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& input, int begin, int count);
Tensor clamp01(const Tensor& input);

void require_finite(const Tensor& t, const char* context);

}  // namespace nlvc
