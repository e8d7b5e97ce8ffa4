#pragma once

#include <array>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "kseg/tensor.hpp"

namespace kseg::nn {

// Activations are passed as shared pointers so layers can retain what their
// backward pass needs without copying multi-hundred-MB feature maps.
using TensorPtr = std::shared_ptr<Tensor>;

inline TensorPtr make_tensor(std::vector<long> shape, float fill = 0.f) {
    return std::make_shared<Tensor>(std::move(shape), fill);
}

struct ParamRef {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

// 3D convolution over (N, C, D, H, W) tensors, implemented as z-slab im2col
// plus sgemm. Supports the two kernel layouts this project uses: 3x3x3 with
// unit padding and 1x1x1 with none.
class Conv3d {
public:
    Conv3d() = default;
    Conv3d(long in_ch, long out_ch, std::array<long, 3> kernel, std::array<long, 3> stride,
           std::array<long, 3> pad, bool bias, std::string name);

    TensorPtr forward(const TensorPtr& x, bool training);
    // Accumulates weight/bias gradients; returns input gradient unless
    // need_input_grad is false (the stem conv skips it).
    TensorPtr backward(const Tensor& gy, bool need_input_grad = true);

    void init_he_normal(std::mt19937_64& rng);
    void collect_params(std::vector<ParamRef>& out);
    void clear_context() { cached_x_.reset(); }
    std::array<long, 5> output_shape(const std::array<long, 5>& in) const;

    long in_ch() const { return in_ch_; }
    long out_ch() const { return out_ch_; }

    Tensor w, gw;  // (out_ch, in_ch, kz, ky, kx)
    Tensor b, gb;  // (out_ch), present when has_bias

private:
    long in_ch_ = 0, out_ch_ = 0;
    std::array<long, 3> kernel_{3, 3, 3}, stride_{1, 1, 1}, pad_{1, 1, 1};
    bool has_bias_ = false;
    std::string name_;
    TensorPtr cached_x_;
};

// Transposed convolution with kernel == stride (no overlap, no padding):
// output extent is exactly input extent times stride per axis.
class ConvTranspose3d {
public:
    ConvTranspose3d() = default;
    ConvTranspose3d(long in_ch, long out_ch, std::array<long, 3> stride, std::string name);

    TensorPtr forward(const TensorPtr& x, bool training);
    TensorPtr backward(const Tensor& gy);

    void init_he_normal(std::mt19937_64& rng);
    void collect_params(std::vector<ParamRef>& out);
    void clear_context() { cached_x_.reset(); }

    Tensor w, gw;  // (in_ch, out_ch, sz, sy, sx)

private:
    long in_ch_ = 0, out_ch_ = 0;
    std::array<long, 3> stride_{1, 2, 2};
    std::string name_;
    TensorPtr cached_x_;
};

// Per-sample, per-channel normalization with learned scale/shift. Statistics
// are always computed from the current input, so evaluation needs no running
// averages.
class InstanceNorm3d {
public:
    InstanceNorm3d() = default;
    InstanceNorm3d(long channels, std::string name);

    TensorPtr forward(const TensorPtr& x, bool training);
    TensorPtr backward(const Tensor& gy);

    void collect_params(std::vector<ParamRef>& out);
    void clear_context();

    Tensor gamma, g_gamma, beta, g_beta;

    static constexpr double kEps = 1e-5;

private:
    long channels_ = 0;
    std::string name_;
    TensorPtr cached_x_;
    std::vector<double> mean_, inv_std_;  // per (n, c)
};

// Leaky rectifier, applied in place. The output is cached; the input slope
// branch is recoverable from the output sign.
class LeakyReLU {
public:
    static constexpr float kSlope = 0.01f;

    TensorPtr forward(const TensorPtr& x, bool training);
    TensorPtr backward(const Tensor& gy);
    void clear_context() { cached_y_.reset(); }

private:
    TensorPtr cached_y_;
};

// Channel concatenation of two tensors with identical (N, D, H, W).
TensorPtr concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& gy, long a_channels, Tensor& ga, Tensor& gb);

TensorPtr add(const Tensor& a, const Tensor& b);

}  // namespace kseg::nn
