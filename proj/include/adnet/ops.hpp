#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "adnet/rng.hpp"
#include "adnet/tensor.hpp"

namespace adnet {

enum class Mode { train, infer };

enum class PoolMode { average, max };

// Valid padding, stride 1. Output spatial extent shrinks by kernel-1.
struct ConvAttrs {
    std::size_t out_channels = 1;
    std::size_t kernel_h = 1;
    std::size_t kernel_w = 1;
};

// Windows advance by stride; incomplete trailing windows are discarded.
struct PoolAttrs {
    std::size_t window_h = 2;
    std::size_t window_w = 2;
    std::size_t stride_h = 2;
    std::size_t stride_w = 2;
    PoolMode mode = PoolMode::average;

    static PoolAttrs square(std::size_t window, PoolMode mode) {
        return PoolAttrs{window, window, window, window, mode};
    }
};

// Per-channel scale/shift plus running statistics. gamma/beta train; the
// moving statistics update in train mode and drive inference.
template <typename T>
struct NormState {
    Tensor<T> gamma;
    Tensor<T> beta;
    Tensor<T> moving_mean;
    Tensor<T> moving_var;
    T epsilon = static_cast<T>(1e-3);
    T momentum = static_cast<T>(0.99);

    static NormState identity(std::size_t channels, T epsilon = static_cast<T>(1e-3),
                              T momentum = static_cast<T>(0.99)) {
        NormState s;
        s.gamma = Tensor<T>::full({channels}, T{1});
        s.beta = Tensor<T>(Shape{channels});
        s.moving_mean = Tensor<T>(Shape{channels});
        s.moving_var = Tensor<T>(Shape{channels});
        s.epsilon = epsilon;
        s.momentum = momentum;
        return s;
    }
};

template <typename T>
struct ConvGrads {
    Tensor<T> x;
    Tensor<T> weights;
    Tensor<T> bias;
};

template <typename T>
struct DenseGrads {
    Tensor<T> x;
    Tensor<T> weights;
    Tensor<T> bias;
};

template <typename T>
struct NormGrads {
    Tensor<T> x;
    Tensor<T> gamma;
    Tensor<T> beta;
};

// 1 / (1 + e^-z), elementwise; saturates cleanly at extreme inputs.
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& z);

// Backward from the forward output y = sigmoid(z): grad * y * (1 - y).
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& grad_out, const Tensor<T>& y);

// x [n,c,H,W] * weights [f,c,kh,kw] + bias [f] -> [n,f,H-kh+1,W-kw+1].
// Cross-correlation: each output element is the inner product of one filter
// with the subimage under it, summed over input channels.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weights,
                         const Tensor<T>& bias, const ConvAttrs& attrs,
                         const ExecPolicy& policy = ExecPolicy::serial());

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x,
                             const Tensor<T>& weights, const ConvAttrs& attrs,
                             const ExecPolicy& policy = ExecPolicy::serial());

template <typename T>
Tensor<T> pool2d_forward(const Tensor<T>& x, const PoolAttrs& attrs,
                         const ExecPolicy& policy = ExecPolicy::serial());

// Average mode spreads each output gradient uniformly over its window; max
// mode routes it to the first (row-major) maximal element.
template <typename T>
Tensor<T> pool2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x,
                          const PoolAttrs& attrs,
                          const ExecPolicy& policy = ExecPolicy::serial());

// Train mode normalizes by batch statistics over (n,H,W) per channel and
// updates the moving statistics in `state`; infer mode uses the moving
// statistics and leaves state untouched.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, NormState<T>& state, Mode mode,
                            const ExecPolicy& policy = ExecPolicy::serial());

// Exact train-mode gradients; batch statistics are recomputed from x and
// treated as functions of x.
template <typename T>
NormGrads<T> batchnorm_backward(const Tensor<T>& grad_out, const Tensor<T>& x,
                                const NormState<T>& state,
                                const ExecPolicy& policy = ExecPolicy::serial());

// x [n,d_in] * weights [d_in,d_out] + bias [d_out] per row.
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weights,
                        const Tensor<T>& bias,
                        const ExecPolicy& policy = ExecPolicy::serial());

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& grad_out, const Tensor<T>& x,
                             const Tensor<T>& weights,
                             const ExecPolicy& policy = ExecPolicy::serial());

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

// Gradient passes where x > 0, zero where x <= 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& x);

// Inverted dropout. Train: zero each element with probability `rate`, scale
// survivors by 1/(1-rate). Infer: identity. The returned mask holds the
// factor applied per element (0 or 1/(1-rate), all ones in infer mode);
// backward is the same mask applied to the gradient.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> dropout_forward(const Tensor<T>& x, double rate,
                                                Mode mode, Rng& rng);

template <typename T>
Tensor<T> dropout_apply_mask(const Tensor<T>& x, const Tensor<T>& mask);

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out, const Tensor<T>& mask);

// Row-wise exp(z - rowmax) / sum. Rows sum to 1; entries stay in (0,1).
template <typename T>
Tensor<T> softmax(const Tensor<T>& z);

// Backward through softmax from its output p: p * (g - sum(g * p)) per row.
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& grad_out, const Tensor<T>& p);

// [n,c,h,w] -> [n, c*h*w], order preserving.
template <typename T>
Tensor<T> flatten(const Tensor<T>& x);

// Column-wise concatenation of [n,d_i] inputs in argument order.
template <typename T>
Tensor<T> concat(const std::vector<const Tensor<T>*>& xs);

// Splits a concat gradient back into per-input gradients of the given widths.
template <typename T>
std::vector<Tensor<T>> concat_backward(const Tensor<T>& grad_out,
                                       const std::vector<std::size_t>& widths);

// Output spatial extent of a valid convolution / floor-semantics pool.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel);
std::size_t pool_out_extent(std::size_t in, std::size_t window, std::size_t stride);

} // namespace adnet
