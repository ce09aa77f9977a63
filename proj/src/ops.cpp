#include "adnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace adnet {

std::size_t conv_out_extent(std::size_t in, std::size_t kernel) {
    return in - kernel + 1;
}

std::size_t pool_out_extent(std::size_t in, std::size_t window, std::size_t stride) {
    return (in - window) / stride + 1;
}

namespace {

void require_rank(const Shape& s, std::size_t rank, const char* what) {
    if (s.size() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_str(s));
    }
}

// Patch matrix for one image, laid out [K, R] with K = c*kh*kw rows and
// R = OH*OW columns. Row order (c, ky, kx) matches the scalar loop order, so
// a row-of-output GEMM over K reproduces its per-element summation exactly.
template <typename T>
void im2col_kr(const T* img, std::size_t c, std::size_t H, std::size_t W,
               std::size_t kh, std::size_t kw, std::size_t oh, std::size_t ow,
               T* cols) {
    std::size_t k = 0;
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t ky = 0; ky < kh; ++ky) {
            for (std::size_t kx = 0; kx < kw; ++kx, ++k) {
                T* dst = cols + k * (oh * ow);
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const T* src = img + (ch * H + oy + ky) * W + kx;
                    std::memcpy(dst + oy * ow, src, ow * sizeof(T));
                }
            }
        }
    }
}

// Same patches transposed: [R, K]. Used by the backward pass.
template <typename T>
void im2col_rk(const T* img, std::size_t c, std::size_t H, std::size_t W,
               std::size_t kh, std::size_t kw, std::size_t oh, std::size_t ow,
               T* cols) {
    const std::size_t K = c * kh * kw;
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            T* dst = cols + (oy * ow + ox) * K;
            std::size_t k = 0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const T* src = img + (ch * H + oy + ky) * W + ox;
                    for (std::size_t kx = 0; kx < kw; ++kx, ++k) {
                        dst[k] = src[kx];
                    }
                }
            }
        }
    }
}

template <typename T>
void check_conv_shapes(const Tensor<T>& x, const Tensor<T>& weights,
                       const Tensor<T>& bias, const ConvAttrs& attrs) {
    require_rank(x.shape(), 4, "conv2d input");
    require_rank(weights.shape(), 4, "conv2d weights");
    require_rank(bias.shape(), 1, "conv2d bias");
    const std::size_t c = x.extent(1), H = x.extent(2), W = x.extent(3);
    if (weights.extent(0) != attrs.out_channels || weights.extent(2) != attrs.kernel_h ||
        weights.extent(3) != attrs.kernel_w) {
        throw ShapeError("conv2d: weights " + shape_str(weights.shape()) +
                         " disagree with attrs");
    }
    if (weights.extent(1) != c) {
        throw ShapeError("conv2d: input has " + std::to_string(c) +
                         " channels, weights expect " + std::to_string(weights.extent(1)));
    }
    if (bias.extent(0) != attrs.out_channels) {
        throw ShapeError("conv2d: bias extent " + std::to_string(bias.extent(0)) +
                         " != out_channels " + std::to_string(attrs.out_channels));
    }
    if (attrs.kernel_h == 0 || attrs.kernel_w == 0 || attrs.out_channels == 0) {
        throw ConfigError("conv2d: kernel extents and out_channels must be >= 1");
    }
    if (attrs.kernel_h > H || attrs.kernel_w > W) {
        throw ShapeError("conv2d: kernel " + std::to_string(attrs.kernel_h) + "x" +
                         std::to_string(attrs.kernel_w) + " exceeds image " +
                         std::to_string(H) + "x" + std::to_string(W));
    }
}

} // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weights,
                         const Tensor<T>& bias, const ConvAttrs& attrs,
                         const ExecPolicy& policy) {
    check_conv_shapes(x, weights, bias, attrs);
    const std::size_t n = x.extent(0), c = x.extent(1), H = x.extent(2), W = x.extent(3);
    const std::size_t f = attrs.out_channels, kh = attrs.kernel_h, kw = attrs.kernel_w;
    const std::size_t oh = conv_out_extent(H, kh), ow = conv_out_extent(W, kw);
    const std::size_t K = c * kh * kw, R = oh * ow;

    Tensor<T> out(Shape{n, f, oh, ow});
    const bool over_images = n > 1;
    const ExecPolicy inner = over_images ? ExecPolicy::serial() : policy;

    auto run_image = [&](std::size_t i, std::vector<T>& cols) {
        im2col_kr(x.data() + i * c * H * W, c, H, W, kh, kw, oh, ow, cols.data());
        T* out_i = out.data() + i * f * R;
        gemm_nn(weights.data(), f, K, cols.data(), R, out_i, inner);
        for (std::size_t fi = 0; fi < f; ++fi) {
            const T b = bias[fi];
            T* row = out_i + fi * R;
            for (std::size_t r = 0; r < R; ++r) row[r] += b;
        }
    };

    if (over_images) {
        parallel_for(n, policy, [&](std::size_t b0, std::size_t b1) {
            std::vector<T> cols(K * R);
            for (std::size_t i = b0; i < b1; ++i) run_image(i, cols);
        });
    } else {
        std::vector<T> cols(K * R);
        run_image(0, cols);
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x,
                             const Tensor<T>& weights, const ConvAttrs& attrs,
                             const ExecPolicy& policy) {
    Tensor<T> bias_probe(Shape{attrs.out_channels});
    check_conv_shapes(x, weights, bias_probe, attrs);
    const std::size_t n = x.extent(0), c = x.extent(1), H = x.extent(2), W = x.extent(3);
    const std::size_t f = attrs.out_channels, kh = attrs.kernel_h, kw = attrs.kernel_w;
    const std::size_t oh = conv_out_extent(H, kh), ow = conv_out_extent(W, kw);
    if (grad_out.shape() != Shape{n, f, oh, ow}) {
        throw ShapeError("conv2d_backward: grad_out " + shape_str(grad_out.shape()) +
                         " does not match forward output " + shape_str(Shape{n, f, oh, ow}));
    }
    const std::size_t K = c * kh * kw, R = oh * ow;

    ConvGrads<T> grads{Tensor<T>(x.shape()), Tensor<T>(weights.shape()),
                       Tensor<T>(Shape{f})};

    const std::size_t want = policy.threads <= 0 ? 1 : static_cast<std::size_t>(policy.threads);
    const std::size_t workers = std::max<std::size_t>(1, std::min(want, n));
    const std::size_t chunk = (n + workers - 1) / workers;

    // Per-worker weight/bias partials; combined in worker order afterwards so
    // the result is reproducible for a fixed thread count (and equals the
    // pure sequential order when workers == 1).
    std::vector<std::vector<T>> w_partial(workers, std::vector<T>(f * K, T{}));
    std::vector<std::vector<T>> b_partial(workers, std::vector<T>(f, T{}));

    parallel_for(workers, ExecPolicy{static_cast<int>(workers)},
                 [&](std::size_t wb, std::size_t we) {
        std::vector<T> cols(R * K);
        std::vector<T> grad_cols(R * K);
        std::vector<T> w_scratch(f * K);
        for (std::size_t w = wb; w < we; ++w) {
            const std::size_t i0 = w * chunk, i1 = std::min(n, i0 + chunk);
            for (std::size_t i = i0; i < i1; ++i) {
                const T* g_i = grad_out.data() + i * f * R;       // already [F, R]
                im2col_rk(x.data() + i * c * H * W, c, H, W, kh, kw, oh, ow, cols.data());

                // grad_w += G_i [F,R] * cols [R,K]
                gemm_nn(g_i, f, R, cols.data(), K, w_scratch.data(), ExecPolicy::serial());
                T* wp = w_partial[w].data();
                for (std::size_t e = 0; e < f * K; ++e) wp[e] += w_scratch[e];

                for (std::size_t fi = 0; fi < f; ++fi) {
                    T s{};
                    const T* row = g_i + fi * R;
                    for (std::size_t r = 0; r < R; ++r) s += row[r];
                    b_partial[w][fi] += s;
                }

                // grad_cols [R,K] = G_i^T * weights, then scatter back.
                gemm_tn(g_i, f, R, weights.data(), K, grad_cols.data(),
                        ExecPolicy::serial());
                T* gx = grads.x.data() + i * c * H * W;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const T* src = grad_cols.data() + (oy * ow + ox) * K;
                        std::size_t k = 0;
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            for (std::size_t ky = 0; ky < kh; ++ky) {
                                T* dst = gx + (ch * H + oy + ky) * W + ox;
                                for (std::size_t kx = 0; kx < kw; ++kx, ++k) {
                                    dst[kx] += src[k];
                                }
                            }
                        }
                    }
                }
            }
        }
    });

    for (std::size_t w = 0; w < workers; ++w) {
        for (std::size_t e = 0; e < f * K; ++e) grads.weights[e] += w_partial[w][e];
        for (std::size_t fi = 0; fi < f; ++fi) grads.bias[fi] += b_partial[w][fi];
    }
    return grads;
}

namespace {

template <typename T>
void check_pool_shapes(const Tensor<T>& x, const PoolAttrs& attrs) {
    require_rank(x.shape(), 4, "pool2d input");
    if (attrs.window_h == 0 || attrs.window_w == 0 || attrs.stride_h == 0 ||
        attrs.stride_w == 0) {
        throw ConfigError("pool2d: window and stride must be >= 1");
    }
    if (attrs.window_h > x.extent(2) || attrs.window_w > x.extent(3)) {
        throw ShapeError("pool2d: window " + std::to_string(attrs.window_h) + "x" +
                         std::to_string(attrs.window_w) + " exceeds image " +
                         std::to_string(x.extent(2)) + "x" + std::to_string(x.extent(3)));
    }
}

} // namespace

template <typename T>
Tensor<T> pool2d_forward(const Tensor<T>& x, const PoolAttrs& attrs,
                         const ExecPolicy& policy) {
    check_pool_shapes(x, attrs);
    const std::size_t n = x.extent(0), c = x.extent(1), H = x.extent(2), W = x.extent(3);
    const std::size_t oh = pool_out_extent(H, attrs.window_h, attrs.stride_h);
    const std::size_t ow = pool_out_extent(W, attrs.window_w, attrs.stride_w);
    Tensor<T> out(Shape{n, c, oh, ow});
    const T inv_area = T{1} / static_cast<T>(attrs.window_h * attrs.window_w);

    parallel_for(n * c, policy, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
            const T* plane = x.data() + p * H * W;
            T* dst = out.data() + p * oh * ow;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const std::size_t y0 = oy * attrs.stride_h;
                    const std::size_t x0 = ox * attrs.stride_w;
                    if (attrs.mode == PoolMode::average) {
                        T s{};
                        for (std::size_t wy = 0; wy < attrs.window_h; ++wy) {
                            const T* row = plane + (y0 + wy) * W + x0;
                            for (std::size_t wx = 0; wx < attrs.window_w; ++wx) {
                                s += row[wx];
                            }
                        }
                        dst[oy * ow + ox] = s * inv_area;
                    } else {
                        T best = plane[y0 * W + x0];
                        for (std::size_t wy = 0; wy < attrs.window_h; ++wy) {
                            const T* row = plane + (y0 + wy) * W + x0;
                            for (std::size_t wx = 0; wx < attrs.window_w; ++wx) {
                                if (row[wx] > best) best = row[wx];
                            }
                        }
                        dst[oy * ow + ox] = best;
                    }
                }
            }
        }
    });
    return out;
}

template <typename T>
Tensor<T> pool2d_backward(const Tensor<T>& grad_out, const Tensor<T>& x,
                          const PoolAttrs& attrs, const ExecPolicy& policy) {
    check_pool_shapes(x, attrs);
    const std::size_t n = x.extent(0), c = x.extent(1), H = x.extent(2), W = x.extent(3);
    const std::size_t oh = pool_out_extent(H, attrs.window_h, attrs.stride_h);
    const std::size_t ow = pool_out_extent(W, attrs.window_w, attrs.stride_w);
    if (grad_out.shape() != Shape{n, c, oh, ow}) {
        throw ShapeError("pool2d_backward: grad_out " + shape_str(grad_out.shape()) +
                         " does not match forward output " + shape_str(Shape{n, c, oh, ow}));
    }
    Tensor<T> grad_x(x.shape());
    const T inv_area = T{1} / static_cast<T>(attrs.window_h * attrs.window_w);

    parallel_for(n * c, policy, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
            const T* plane = x.data() + p * H * W;
            const T* g = grad_out.data() + p * oh * ow;
            T* gx = grad_x.data() + p * H * W;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const std::size_t y0 = oy * attrs.stride_h;
                    const std::size_t x0 = ox * attrs.stride_w;
                    const T gv = g[oy * ow + ox];
                    if (attrs.mode == PoolMode::average) {
                        const T share = gv * inv_area;
                        for (std::size_t wy = 0; wy < attrs.window_h; ++wy) {
                            T* row = gx + (y0 + wy) * W + x0;
                            for (std::size_t wx = 0; wx < attrs.window_w; ++wx) {
                                row[wx] += share;
                            }
                        }
                    } else {
                        // First row-major maximum gets the gradient.
                        std::size_t by = 0, bx = 0;
                        T best = plane[y0 * W + x0];
                        for (std::size_t wy = 0; wy < attrs.window_h; ++wy) {
                            const T* row = plane + (y0 + wy) * W + x0;
                            for (std::size_t wx = 0; wx < attrs.window_w; ++wx) {
                                if (row[wx] > best) {
                                    best = row[wx];
                                    by = wy;
                                    bx = wx;
                                }
                            }
                        }
                        gx[(y0 + by) * W + x0 + bx] += gv;
                    }
                }
            }
        }
    });
    return grad_x;
}

namespace {

template <typename T>
void check_norm_shapes(const Tensor<T>& x, const NormState<T>& state) {
    require_rank(x.shape(), 4, "batchnorm input");
    const std::size_t c = x.extent(1);
    if (state.gamma.shape() != Shape{c} || state.beta.shape() != Shape{c} ||
        state.moving_mean.shape() != Shape{c} || state.moving_var.shape() != Shape{c}) {
        throw ShapeError("batchnorm: state is not per-channel for " +
                         std::to_string(c) + " channels");
    }
}

// Channel mean/variance over (n,H,W), double accumulation, population form.
template <typename T>
void channel_stats(const Tensor<T>& x, std::size_t ch, double& mean, double& var) {
    const std::size_t n = x.extent(0), c = x.extent(1), hw = x.extent(2) * x.extent(3);
    const std::size_t m = n * hw;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const T* plane = x.data() + (i * c + ch) * hw;
        for (std::size_t e = 0; e < hw; ++e) s += static_cast<double>(plane[e]);
    }
    mean = s / static_cast<double>(m);
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const T* plane = x.data() + (i * c + ch) * hw;
        for (std::size_t e = 0; e < hw; ++e) {
            const double d = static_cast<double>(plane[e]) - mean;
            q += d * d;
        }
    }
    var = q / static_cast<double>(m);
}

} // namespace

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, NormState<T>& state, Mode mode,
                            const ExecPolicy& policy) {
    check_norm_shapes(x, state);
    const std::size_t n = x.extent(0), c = x.extent(1), hw = x.extent(2) * x.extent(3);
    Tensor<T> out(x.shape());

    std::vector<double> means(c), vars(c);
    parallel_for(c, policy, [&](std::size_t c0, std::size_t c1) {
        for (std::size_t ch = c0; ch < c1; ++ch) {
            if (mode == Mode::train) {
                channel_stats(x, ch, means[ch], vars[ch]);
            } else {
                means[ch] = static_cast<double>(state.moving_mean[ch]);
                vars[ch] = static_cast<double>(state.moving_var[ch]);
            }
            const double inv_std = 1.0 / std::sqrt(vars[ch] + static_cast<double>(state.epsilon));
            const double g = static_cast<double>(state.gamma[ch]);
            const double b = static_cast<double>(state.beta[ch]);
            for (std::size_t i = 0; i < n; ++i) {
                const T* src = x.data() + (i * c + ch) * hw;
                T* dst = out.data() + (i * c + ch) * hw;
                for (std::size_t e = 0; e < hw; ++e) {
                    dst[e] = static_cast<T>(
                        g * ((static_cast<double>(src[e]) - means[ch]) * inv_std) + b);
                }
            }
        }
    });

    if (mode == Mode::train) {
        const double mom = static_cast<double>(state.momentum);
        for (std::size_t ch = 0; ch < c; ++ch) {
            state.moving_mean[ch] = static_cast<T>(
                mom * static_cast<double>(state.moving_mean[ch]) + (1.0 - mom) * means[ch]);
            state.moving_var[ch] = static_cast<T>(
                mom * static_cast<double>(state.moving_var[ch]) + (1.0 - mom) * vars[ch]);
        }
    }
    return out;
}

template <typename T>
NormGrads<T> batchnorm_backward(const Tensor<T>& grad_out, const Tensor<T>& x,
                                const NormState<T>& state, const ExecPolicy& policy) {
    check_norm_shapes(x, state);
    if (!grad_out.same_shape(x)) {
        throw ShapeError("batchnorm_backward: grad_out " + shape_str(grad_out.shape()) +
                         " vs input " + shape_str(x.shape()));
    }
    const std::size_t n = x.extent(0), c = x.extent(1), hw = x.extent(2) * x.extent(3);
    const double m = static_cast<double>(n * hw);
    NormGrads<T> grads{Tensor<T>(x.shape()), Tensor<T>(Shape{c}), Tensor<T>(Shape{c})};

    parallel_for(c, policy, [&](std::size_t c0, std::size_t c1) {
        for (std::size_t ch = c0; ch < c1; ++ch) {
            double mean, var;
            channel_stats(x, ch, mean, var);
            const double inv_std = 1.0 / std::sqrt(var + static_cast<double>(state.epsilon));
            const double g = static_cast<double>(state.gamma[ch]);

            // sum_g = sum(grad), sum_gx = sum(grad * xhat)
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const T* gp = grad_out.data() + (i * c + ch) * hw;
                const T* xp = x.data() + (i * c + ch) * hw;
                for (std::size_t e = 0; e < hw; ++e) {
                    const double gv = static_cast<double>(gp[e]);
                    const double xhat = (static_cast<double>(xp[e]) - mean) * inv_std;
                    sum_g += gv;
                    sum_gx += gv * xhat;
                }
            }
            grads.beta[ch] = static_cast<T>(sum_g);
            grads.gamma[ch] = static_cast<T>(sum_gx);

            // grad_x = gamma * inv_std / m * (m*g - sum_g - xhat * sum_gx)
            const double scale = g * inv_std / m;
            for (std::size_t i = 0; i < n; ++i) {
                const T* gp = grad_out.data() + (i * c + ch) * hw;
                const T* xp = x.data() + (i * c + ch) * hw;
                T* dst = grads.x.data() + (i * c + ch) * hw;
                for (std::size_t e = 0; e < hw; ++e) {
                    const double gv = static_cast<double>(gp[e]);
                    const double xhat = (static_cast<double>(xp[e]) - mean) * inv_std;
                    dst[e] = static_cast<T>(scale * (m * gv - sum_g - xhat * sum_gx));
                }
            }
        }
    });
    return grads;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weights,
                        const Tensor<T>& bias, const ExecPolicy& policy) {
    require_rank(x.shape(), 2, "dense input");
    require_rank(weights.shape(), 2, "dense weights");
    require_rank(bias.shape(), 1, "dense bias");
    if (x.extent(1) != weights.extent(0)) {
        throw ShapeError("dense: input width " + std::to_string(x.extent(1)) +
                         " != weight rows " + std::to_string(weights.extent(0)));
    }
    if (bias.extent(0) != weights.extent(1)) {
        throw ShapeError("dense: bias extent " + std::to_string(bias.extent(0)) +
                         " != weight cols " + std::to_string(weights.extent(1)));
    }
    const std::size_t n = x.extent(0), d_out = weights.extent(1);
    Tensor<T> out(Shape{n, d_out});
    gemm_nn(x.data(), n, x.extent(1), weights.data(), d_out, out.data(), policy);
    for (std::size_t i = 0; i < n; ++i) {
        T* row = out.data() + i * d_out;
        for (std::size_t j = 0; j < d_out; ++j) row[j] += bias[j];
    }
    return out;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& grad_out, const Tensor<T>& x,
                             const Tensor<T>& weights, const ExecPolicy& policy) {
    require_rank(grad_out.shape(), 2, "dense grad_out");
    require_rank(x.shape(), 2, "dense input");
    require_rank(weights.shape(), 2, "dense weights");
    const std::size_t n = x.extent(0), d_in = weights.extent(0), d_out = weights.extent(1);
    if (grad_out.shape() != Shape{n, d_out} || x.extent(1) != d_in) {
        throw ShapeError("dense_backward: inconsistent shapes " +
                         shape_str(grad_out.shape()) + ", " + shape_str(x.shape()) +
                         ", " + shape_str(weights.shape()));
    }
    DenseGrads<T> grads{Tensor<T>(x.shape()), Tensor<T>(weights.shape()),
                        Tensor<T>(Shape{d_out})};

    // grad_x = grad_out * W^T; transpose once for contiguous rows.
    std::vector<T> wt(d_in * d_out);
    for (std::size_t i = 0; i < d_in; ++i) {
        for (std::size_t j = 0; j < d_out; ++j) {
            wt[j * d_in + i] = weights[i * d_out + j];
        }
    }
    gemm_nn(grad_out.data(), n, d_out, wt.data(), d_in, grads.x.data(), policy);

    // grad_w = x^T * grad_out, accumulated over rows in batch order.
    gemm_tn(x.data(), n, d_in, grad_out.data(), d_out, grads.weights.data(), policy);

    for (std::size_t i = 0; i < n; ++i) {
        const T* row = grad_out.data() + i * d_out;
        for (std::size_t j = 0; j < d_out; ++j) grads.bias[j] += row[j];
    }
    return grads;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& z) {
    Tensor<T> out(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const T v = z[i];
        if (v >= T{}) {
            out[i] = T{1} / (T{1} + std::exp(-v));
        } else {
            const T e = std::exp(v);
            out[i] = e / (T{1} + e);
        }
    }
    return out;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& grad_out, const Tensor<T>& y) {
    if (!grad_out.same_shape(y)) {
        throw ShapeError("sigmoid_backward: shape mismatch");
    }
    Tensor<T> out(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        out[i] = grad_out[i] * y[i] * (T{1} - y[i]);
    }
    return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] > T{} ? x[i] : T{};
    }
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& x) {
    if (!grad_out.same_shape(x)) {
        throw ShapeError("relu_backward: shape mismatch");
    }
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] > T{} ? grad_out[i] : T{};
    }
    return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> dropout_forward(const Tensor<T>& x, double rate,
                                                Mode mode, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout: rate must be in [0,1), got " + std::to_string(rate));
    }
    if (mode == Mode::infer || rate == 0.0) {
        return {x, Tensor<T>::full(x.shape(), T{1})};
    }
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    Tensor<T> mask(x.shape());
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T m = rng.uniform() < rate ? T{} : scale;
        mask[i] = m;
        out[i] = x[i] * m;
    }
    return {std::move(out), std::move(mask)};
}

template <typename T>
Tensor<T> dropout_apply_mask(const Tensor<T>& x, const Tensor<T>& mask) {
    return elementwise(x, mask, Elementwise::mul);
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out, const Tensor<T>& mask) {
    return elementwise(grad_out, mask, Elementwise::mul);
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& z) {
    require_rank(z.shape(), 2, "softmax input");
    const std::size_t n = z.extent(0), k = z.extent(1);
    Tensor<T> out(z.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = z.data() + i * k;
        T* dst = out.data() + i * k;
        T mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        T sum{};
        for (std::size_t j = 0; j < k; ++j) {
            dst[j] = std::exp(row[j] - mx);
            sum += dst[j];
        }
        const T inv = T{1} / sum;
        for (std::size_t j = 0; j < k; ++j) dst[j] *= inv;
    }
    return out;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& grad_out, const Tensor<T>& p) {
    if (!grad_out.same_shape(p)) {
        throw ShapeError("softmax_backward: shape mismatch");
    }
    const std::size_t n = p.extent(0), k = p.extent(1);
    Tensor<T> out(p.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const T* g = grad_out.data() + i * k;
        const T* pr = p.data() + i * k;
        T* dst = out.data() + i * k;
        T dot{};
        for (std::size_t j = 0; j < k; ++j) dot += g[j] * pr[j];
        for (std::size_t j = 0; j < k; ++j) dst[j] = pr[j] * (g[j] - dot);
    }
    return out;
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
    require_rank(x.shape(), 4, "flatten input");
    return x.reshaped({x.extent(0), x.extent(1) * x.extent(2) * x.extent(3)});
}

template <typename T>
Tensor<T> concat(const std::vector<const Tensor<T>*>& xs) {
    if (xs.empty()) {
        throw ShapeError("concat: needs at least one input");
    }
    const std::size_t n = xs[0]->extent(0);
    std::size_t total = 0;
    for (const auto* t : xs) {
        require_rank(t->shape(), 2, "concat input");
        if (t->extent(0) != n) {
            throw ShapeError("concat: batch extents differ, " + std::to_string(n) +
                             " vs " + std::to_string(t->extent(0)));
        }
        total += t->extent(1);
    }
    Tensor<T> out(Shape{n, total});
    for (std::size_t i = 0; i < n; ++i) {
        T* dst = out.data() + i * total;
        for (const auto* t : xs) {
            const std::size_t d = t->extent(1);
            std::memcpy(dst, t->data() + i * d, d * sizeof(T));
            dst += d;
        }
    }
    return out;
}

template <typename T>
std::vector<Tensor<T>> concat_backward(const Tensor<T>& grad_out,
                                       const std::vector<std::size_t>& widths) {
    require_rank(grad_out.shape(), 2, "concat grad_out");
    std::size_t total = 0;
    for (std::size_t w : widths) total += w;
    if (grad_out.extent(1) != total) {
        throw ShapeError("concat_backward: widths sum " + std::to_string(total) +
                         " != grad width " + std::to_string(grad_out.extent(1)));
    }
    const std::size_t n = grad_out.extent(0);
    std::vector<Tensor<T>> parts;
    parts.reserve(widths.size());
    std::size_t offset = 0;
    for (std::size_t w : widths) {
        Tensor<T> part(Shape{n, w});
        for (std::size_t i = 0; i < n; ++i) {
            std::memcpy(part.data() + i * w, grad_out.data() + i * total + offset,
                        w * sizeof(T));
        }
        parts.push_back(std::move(part));
        offset += w;
    }
    return parts;
}

#define ADNET_INSTANTIATE_OPS(T)                                                          \
    template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&,             \
                                         const Tensor<T>&, const ConvAttrs&,             \
                                         const ExecPolicy&);                              \
    template ConvGrads<T> conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&,         \
                                             const Tensor<T>&, const ConvAttrs&,         \
                                             const ExecPolicy&);                          \
    template Tensor<T> pool2d_forward<T>(const Tensor<T>&, const PoolAttrs&,             \
                                         const ExecPolicy&);                              \
    template Tensor<T> pool2d_backward<T>(const Tensor<T>&, const Tensor<T>&,            \
                                          const PoolAttrs&, const ExecPolicy&);          \
    template Tensor<T> batchnorm_forward<T>(const Tensor<T>&, NormState<T>&, Mode,       \
                                            const ExecPolicy&);                          \
    template NormGrads<T> batchnorm_backward<T>(const Tensor<T>&, const Tensor<T>&,      \
                                                const NormState<T>&, const ExecPolicy&); \
    template Tensor<T> dense_forward<T>(const Tensor<T>&, const Tensor<T>&,              \
                                        const Tensor<T>&, const ExecPolicy&);            \
    template DenseGrads<T> dense_backward<T>(const Tensor<T>&, const Tensor<T>&,         \
                                             const Tensor<T>&, const ExecPolicy&);       \
    template Tensor<T> sigmoid<T>(const Tensor<T>&);                                     \
    template Tensor<T> sigmoid_backward<T>(const Tensor<T>&, const Tensor<T>&);          \
    template Tensor<T> relu<T>(const Tensor<T>&);                                        \
    template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);             \
    template std::pair<Tensor<T>, Tensor<T>> dropout_forward<T>(const Tensor<T>&,        \
                                                                double, Mode, Rng&);     \
    template Tensor<T> dropout_apply_mask<T>(const Tensor<T>&, const Tensor<T>&);        \
    template Tensor<T> dropout_backward<T>(const Tensor<T>&, const Tensor<T>&);          \
    template Tensor<T> softmax<T>(const Tensor<T>&);                                     \
    template Tensor<T> softmax_backward<T>(const Tensor<T>&, const Tensor<T>&);          \
    template Tensor<T> flatten<T>(const Tensor<T>&);                                     \
    template Tensor<T> concat<T>(const std::vector<const Tensor<T>*>&);                  \
    template std::vector<Tensor<T>> concat_backward<T>(const Tensor<T>&,                 \
                                                       const std::vector<std::size_t>&);

ADNET_INSTANTIATE_OPS(float)
ADNET_INSTANTIATE_OPS(double)

#undef ADNET_INSTANTIATE_OPS

} // namespace adnet
