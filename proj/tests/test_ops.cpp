#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "adnet/ops.hpp"
#include "adnet/rng.hpp"

using namespace adnet;

namespace {

using T64 = Tensor<double>;

T64 random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    T64 t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Six nested loops straight from the definition: batch, filter, output row,
// output column, then the filter inner product over (channel, ky, kx).
T64 conv_oracle(const T64& x, const T64& w, const T64& b) {
    const std::size_t n = x.extent(0), c = x.extent(1), H = x.extent(2), W = x.extent(3);
    const std::size_t f = w.extent(0), kh = w.extent(2), kw = w.extent(3);
    const std::size_t oh = H - kh + 1, ow = W - kw + 1;
    T64 out(Shape{n, f, oh, ow});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t fi = 0; fi < f; ++fi) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                acc += x.at({i, ch, oy + ky, ox + kx}) *
                                       w.at({fi, ch, ky, kx});
                            }
                        }
                    }
                    out.at({i, fi, oy, ox}) = acc + b[fi];
                }
            }
        }
    }
    return out;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

double weighted_sum(const T64& w, const T64& out) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * out[i];
    return s;
}

double fd_worst(T64& input, const T64& analytic, const std::function<double()>& loss,
                double h = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double orig = input[i];
        input[i] = orig + h;
        const double lp = loss();
        input[i] = orig - h;
        const double lm = loss();
        input[i] = orig;
        worst = std::max(worst, rel_err(analytic[i], (lp - lm) / (2.0 * h)));
    }
    return worst;
}

} // namespace

TEST_CASE("sigmoid values and saturation") {
    T64 z({5}, {0.0, 1.0, -1.0, 1000.0, -1000.0});
    T64 y = sigmoid(z);
    CHECK(y[0] == 0.5);
    CHECK(y[1] == doctest::Approx(0.7310585786300049).epsilon(1e-15));
    CHECK(y[2] == doctest::Approx(1.0 - 0.7310585786300049).epsilon(1e-15));
    CHECK(y[3] == 1.0);
    CHECK(y[4] == 0.0);
    for (double v : y.values()) CHECK(std::isfinite(v));
}

TEST_CASE("conv2d output extents follow the subimage rule") {
    Rng rng(2);
    T64 x = random_tensor({1, 3, 100, 100}, rng);
    T64 w = random_tensor({32, 3, 3, 3}, rng);
    T64 b = random_tensor({32}, rng);
    T64 out = conv2d_forward(x, w, b, ConvAttrs{32, 3, 3});
    CHECK(out.shape() == Shape{1, 32, 98, 98});
}

TEST_CASE("1x1 identity filter reproduces the input") {
    Rng rng(3);
    T64 x = random_tensor({2, 1, 6, 6}, rng);
    T64 w({1, 1, 1, 1}, {1.0});
    T64 b({1}, {0.0});
    T64 out = conv2d_forward(x, w, b, ConvAttrs{1, 1, 1});
    REQUIRE(out.shape() == x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(out[i] == x[i]);
}

TEST_CASE("conv2d matches the six-loop oracle exactly") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(2);
        const std::size_t c = 1 + rng.uniform_index(3);
        const std::size_t H = 3 + rng.uniform_index(6); // <= 8
        const std::size_t W = 3 + rng.uniform_index(6);
        const std::size_t kh = 1 + rng.uniform_index(std::min<std::size_t>(3, H));
        const std::size_t kw = 1 + rng.uniform_index(std::min<std::size_t>(3, W));
        const std::size_t f = 1 + rng.uniform_index(4);
        T64 x = random_tensor({n, c, H, W}, rng);
        T64 w = random_tensor({f, c, kh, kw}, rng);
        T64 b = random_tensor({f}, rng);
        T64 expect = conv_oracle(x, w, b);
        T64 got = conv2d_forward(x, w, b, ConvAttrs{f, kh, kw}, ExecPolicy::serial());
        REQUIRE(got.shape() == expect.shape());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == expect[i]);
    }
}

TEST_CASE("conv2d rejects oversized kernels and channel mismatches") {
    Rng rng(4);
    T64 x = random_tensor({1, 2, 4, 4}, rng);
    T64 w_big = random_tensor({1, 2, 5, 5}, rng);
    T64 b({1}, {0.0});
    CHECK_THROWS_AS(conv2d_forward(x, w_big, b, ConvAttrs{1, 5, 5}), ShapeError);
    T64 w_ch = random_tensor({1, 3, 3, 3}, rng);
    CHECK_THROWS_AS(conv2d_forward(x, w_ch, b, ConvAttrs{1, 3, 3}), ShapeError);
}

TEST_CASE("conv2d backward: zeros, identity chain, finite differences") {
    Rng rng(23);
    T64 x = random_tensor({1, 2, 5, 5}, rng);
    T64 w = random_tensor({3, 2, 3, 3}, rng);
    const ConvAttrs attrs{3, 3, 3};

    T64 zeros(Shape{1, 3, 3, 3});
    auto zero_grads = conv2d_backward(zeros, x, w, attrs);
    for (double v : zero_grads.x.values()) CHECK(v == 0.0);
    for (double v : zero_grads.weights.values()) CHECK(v == 0.0);
    for (double v : zero_grads.bias.values()) CHECK(v == 0.0);

    // 1x1 identity filter: grad_x == grad_out.
    T64 xi = random_tensor({1, 1, 4, 4}, rng);
    T64 wi({1, 1, 1, 1}, {1.0});
    T64 g = random_tensor({1, 1, 4, 4}, rng);
    auto id_grads = conv2d_backward(g, xi, wi, ConvAttrs{1, 1, 1});
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(id_grads.x[i] == g[i]);

    T64 b = random_tensor({3}, rng);
    T64 lw = random_tensor({1, 3, 3, 3}, rng);
    auto loss = [&] { return weighted_sum(lw, conv2d_forward(x, w, b, attrs)); };
    auto grads = conv2d_backward(lw, x, w, attrs);
    CHECK(fd_worst(x, grads.x, loss) <= 1e-6);
    CHECK(fd_worst(w, grads.weights, loss) <= 1e-6);
    CHECK(fd_worst(b, grads.bias, loss) <= 1e-6);

    // grad_bias is the plain sum of grad_out per filter.
    double s = 0.0;
    for (std::size_t i = 0; i < 9; ++i) s += lw[i];
    CHECK(grads.bias[0] == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("average pooling hand case and shape rule") {
    std::vector<double> ramp(16);
    for (int i = 0; i < 16; ++i) ramp[static_cast<std::size_t>(i)] = i + 1;
    T64 x(Shape{1, 1, 4, 4}, ramp);
    T64 out = pool2d_forward(x, PoolAttrs::square(2, PoolMode::average));
    REQUIRE(out.shape() == Shape{1, 1, 2, 2});
    CHECK(out[0] == 3.5);
    CHECK(out[1] == 5.5);
    CHECK(out[2] == 11.5);
    CHECK(out[3] == 13.5);

    CHECK(pool_out_extent(100, 3, 3) == 33);
    CHECK(pool_out_extent(94, 5, 5) == 18);
    Rng rng(5);
    T64 big = random_tensor({1, 1, 100, 100}, rng);
    CHECK(pool2d_forward(big, PoolAttrs::square(3, PoolMode::average)).shape() ==
          Shape{1, 1, 33, 33});

    CHECK_THROWS_AS(pool2d_forward(x, PoolAttrs::square(5, PoolMode::average)), ShapeError);
}

TEST_CASE("pooling of a constant is that constant in both modes") {
    T64 x = T64::full({2, 3, 6, 6}, 2.5);
    for (PoolMode mode : {PoolMode::average, PoolMode::max}) {
        T64 out = pool2d_forward(x, PoolAttrs::square(2, mode));
        REQUIRE(out.shape() == Shape{2, 3, 3, 3});
        for (double v : out.values()) CHECK(v == 2.5);
    }
}

TEST_CASE("pool backward: uniform redistribution and argmax routing") {
    Rng rng(6);
    T64 x = random_tensor({1, 1, 4, 4}, rng);
    T64 ones = T64::full({1, 1, 2, 2}, 1.0);
    T64 gavg = pool2d_backward(ones, x, PoolAttrs::square(2, PoolMode::average));
    for (double v : gavg.values()) CHECK(v == 0.25);

    // Strictly increasing input: every window's max is its last element.
    std::vector<double> inc(16);
    for (int i = 0; i < 16; ++i) inc[static_cast<std::size_t>(i)] = i;
    T64 xi(Shape{1, 1, 4, 4}, inc);
    T64 gmax = pool2d_backward(ones, xi, PoolAttrs::square(2, PoolMode::max));
    for (std::size_t y = 0; y < 4; ++y) {
        for (std::size_t xx = 0; xx < 4; ++xx) {
            const bool last = (y % 2 == 1) && (xx % 2 == 1);
            CHECK(gmax.at({0, 0, y, xx}) == (last ? 1.0 : 0.0));
        }
    }

    // Ties route to the first row-major maximum.
    T64 tie = T64::full({1, 1, 2, 2}, 7.0);
    T64 gtie = pool2d_backward(T64::full({1, 1, 1, 1}, 1.0), tie,
                               PoolAttrs::square(2, PoolMode::max));
    CHECK(gtie[0] == 1.0);
    CHECK(gtie[1] == 0.0);
    CHECK(gtie[2] == 0.0);
    CHECK(gtie[3] == 0.0);

    // Finite differences, including overlapping windows (stride < window).
    for (PoolMode mode : {PoolMode::average, PoolMode::max}) {
        for (std::size_t stride : {std::size_t{2}, std::size_t{1}}) {
            PoolAttrs attrs{2, 2, stride, stride, mode};
            T64 xt(Shape{1, 2, 4, 4});
            std::vector<double> grid(xt.size());
            for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 0.05 * double(i) - 0.8;
            Rng shuffle_rng(40 + stride + (mode == PoolMode::max));
            shuffle_rng.shuffle(grid);
            for (std::size_t i = 0; i < grid.size(); ++i) xt[i] = grid[i];
            T64 lw = random_tensor(pool2d_forward(xt, attrs).shape(), rng);
            auto loss = [&] { return weighted_sum(lw, pool2d_forward(xt, attrs)); };
            T64 analytic = pool2d_backward(lw, xt, attrs);
            CHECK(fd_worst(xt, analytic, loss) <= 1e-6);
        }
    }
}

TEST_CASE("batchnorm normalizes per channel and updates moving stats") {
    Rng rng(8);
    T64 x = random_tensor({4, 3, 5, 5}, rng);
    NormState<double> state = NormState<double>::identity(3);
    T64 out = batchnorm_forward(x, state, Mode::train);

    const std::size_t hw = 25, n = 4;
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t e = 0; e < hw; ++e) mean += out.at({i, c, e / 5, e % 5});
        }
        mean /= double(n * hw);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t e = 0; e < hw; ++e) {
                const double d = out.at({i, c, e / 5, e % 5}) - mean;
                var += d * d;
            }
        }
        var /= double(n * hw);
        CHECK(std::abs(mean) <= 1e-6);
        CHECK(std::abs(var - 1.0) <= 1e-4); // epsilon shrinks it slightly
        CHECK(state.moving_mean[c] != 0.0);  // 0.99 decay applied once
    }

    // Zero-variance channel maps to zeros.
    T64 flat = T64::full({2, 1, 3, 3}, 5.0);
    NormState<double> fstate = NormState<double>::identity(1);
    T64 fout = batchnorm_forward(flat, fstate, Mode::train);
    for (double v : fout.values()) CHECK(v == 0.0);

    NormState<double> wrong = NormState<double>::identity(2);
    CHECK_THROWS_AS(batchnorm_forward(x, wrong, Mode::train), ShapeError);
}

TEST_CASE("batchnorm infer mode uses moving statistics") {
    Rng rng(12);
    T64 x = random_tensor({2, 2, 3, 3}, rng);
    NormState<double> state = NormState<double>::identity(2);
    state.moving_mean = T64({2}, {0.25, -0.5});
    state.moving_var = T64({2}, {4.0, 1.0});
    T64 out = batchnorm_forward(x, state, Mode::infer);
    const double inv0 = 1.0 / std::sqrt(4.0 + 1e-3);
    CHECK(out.at({0, 0, 0, 0}) ==
          doctest::Approx((x.at({0, 0, 0, 0}) - 0.25) * inv0).epsilon(1e-12));
}

TEST_CASE("batchnorm backward: grad_beta sums and finite differences") {
    Rng rng(31);
    T64 x = random_tensor({2, 3, 4, 4}, rng);
    NormState<double> state = NormState<double>::identity(3);
    state.gamma = random_tensor({3}, rng, 0.5, 1.5);
    state.beta = random_tensor({3}, rng);

    T64 zeros(x.shape());
    auto zg = batchnorm_backward(zeros, x, state);
    for (double v : zg.x.values()) CHECK(v == 0.0);
    for (double v : zg.gamma.values()) CHECK(v == 0.0);
    for (double v : zg.beta.values()) CHECK(v == 0.0);

    T64 lw = random_tensor(x.shape(), rng);
    auto grads = batchnorm_backward(lw, x, state);
    for (std::size_t c = 0; c < 3; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t e = 0; e < 16; ++e) s += lw.at({i, c, e / 4, e % 4});
        }
        CHECK(grads.beta[c] == doctest::Approx(s).epsilon(1e-12));
    }

    auto loss = [&] {
        NormState<double> scratch = state;
        return weighted_sum(lw, batchnorm_forward(x, scratch, Mode::train));
    };
    CHECK(fd_worst(x, grads.x, loss) <= 1e-5);
    CHECK(fd_worst(state.gamma, grads.gamma, loss) <= 1e-5);
    CHECK(fd_worst(state.beta, grads.beta, loss) <= 1e-5);
}

TEST_CASE("dense forward and backward") {
    Rng rng(14);
    // Identity weights, zero bias.
    T64 eye(Shape{3, 3});
    for (int i = 0; i < 3; ++i) eye.at({std::size_t(i), std::size_t(i)}) = 1.0;
    T64 x = random_tensor({2, 3}, rng);
    T64 zero_b(Shape{3});
    T64 out = dense_forward(x, eye, zero_b);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(out[i] == x[i]);

    // Against matmul-plus-bias-loop oracle, exact.
    T64 w = random_tensor({3, 4}, rng);
    T64 b = random_tensor({4}, rng);
    T64 got = dense_forward(x, w, b);
    T64 mm = matmul(x, w);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(got.at({i, j}) == mm.at({i, j}) + b[j]);
        }
    }

    T64 lw = random_tensor({2, 4}, rng);
    auto loss = [&] { return weighted_sum(lw, dense_forward(x, w, b)); };
    auto grads = dense_backward(lw, x, w);
    CHECK(fd_worst(x, grads.x, loss) <= 1e-6);
    CHECK(fd_worst(w, grads.weights, loss) <= 1e-6);
    CHECK(fd_worst(b, grads.bias, loss) <= 1e-6);

    // n=1, identity weights: grad_x == grad_out.
    T64 x1 = random_tensor({1, 3}, rng);
    T64 g1 = random_tensor({1, 3}, rng);
    auto id = dense_backward(g1, x1, eye);
    for (std::size_t i = 0; i < 3; ++i) CHECK(id.x[i] == g1[i]);

    CHECK_THROWS_AS(dense_forward(x, random_tensor({5, 2}, rng), b), ShapeError);
}

TEST_CASE("relu forward and backward") {
    T64 neg = T64::full({2, 2}, -3.0);
    for (double v : relu(neg).values()) CHECK(v == 0.0);
    T64 pos = T64::full({2, 2}, 3.0);
    for (double v : relu(pos).values()) CHECK(v == 3.0);

    Rng rng(15);
    T64 x(Shape{3, 7});
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double mag = 0.1 + 0.9 * rng.uniform();
        x[i] = rng.uniform() < 0.5 ? -mag : mag;
    }
    T64 lw = random_tensor(x.shape(), rng);
    auto loss = [&] { return weighted_sum(lw, relu(x)); };
    CHECK(fd_worst(x, relu_backward(lw, x), loss) <= 1e-6);
}

TEST_CASE("dropout contract") {
    Rng rng(16);
    T64 x = random_tensor({10, 10}, rng, 0.5, 1.5);

    Rng r0(1);
    auto [y0, m0] = dropout_forward(x, 0.0, Mode::train, r0);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y0[i] == x[i]);

    Rng r1(1);
    auto [yi, mi] = dropout_forward(x, 0.7, Mode::infer, r1);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(yi[i] == x[i]);

    Rng r2(1);
    CHECK_THROWS_AS(dropout_forward(x, 1.0, Mode::train, r2), ConfigError);
    CHECK_THROWS_AS(dropout_forward(x, -0.1, Mode::train, r2), ConfigError);

    // Monte-Carlo at rate 0.5 over 10,000 elements, fixed seed.
    T64 big = T64::full({100, 100}, 1.0);
    Rng r3(42);
    auto [yb, mb] = dropout_forward(big, 0.5, Mode::train, r3);
    std::size_t zeros = 0;
    double mean = 0.0;
    for (std::size_t i = 0; i < yb.size(); ++i) {
        if (yb[i] == 0.0) ++zeros;
        mean += yb[i];
    }
    mean /= double(yb.size());
    const double zero_frac = double(zeros) / double(yb.size());
    CHECK(zero_frac >= 0.48);
    CHECK(zero_frac <= 0.52);
    CHECK(std::abs(mean - 1.0) <= 0.02);

    // Backward applies the same mask.
    T64 g = random_tensor(big.shape(), rng);
    T64 gb = dropout_backward(g, mb);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(gb[i] == g[i] * mb[i]);
}

TEST_CASE("softmax rows are shift-invariant distributions") {
    // Uniform logits -> uniform probabilities.
    T64 uniform = T64::full({2, 3}, 0.7);
    T64 pu = softmax(uniform);
    for (double v : pu.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

    Rng rng(19);
    for (int trial = 0; trial < 20; ++trial) {
        T64 z = random_tensor({4, 5}, rng, -5.0, 5.0);
        T64 p = softmax(z);
        for (std::size_t i = 0; i < 4; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 5; ++j) {
                const double v = p.at({i, j});
                CHECK(v > 0.0);
                CHECK(v < 1.0);
                sum += v;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-6);
        }

        // Shift each row by a constant. With dyadic inputs and shifts the
        // addition is exact and the outputs are bit-identical; with arbitrary
        // shifts the input rounding costs a few ulps.
        T64 dyadic(z.shape());
        for (std::size_t i = 0; i < dyadic.size(); ++i) {
            dyadic[i] = 0.25 * static_cast<double>(rng.uniform_index(33)) - 4.0;
        }
        T64 dyadic_shifted = dyadic;
        for (std::size_t i = 0; i < 4; ++i) {
            const double c = static_cast<double>(rng.uniform_index(7)) - 3.0;
            for (std::size_t j = 0; j < 5; ++j) dyadic_shifted.at({i, j}) += c;
        }
        T64 pd = softmax(dyadic);
        T64 pds = softmax(dyadic_shifted);
        for (std::size_t i = 0; i < pd.size(); ++i) CHECK(pds[i] == pd[i]);

        T64 shifted = z;
        for (std::size_t i = 0; i < 4; ++i) {
            const double c = rng.uniform(-3.0, 3.0);
            for (std::size_t j = 0; j < 5; ++j) shifted.at({i, j}) += c;
        }
        T64 ps = softmax(shifted);
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(ps[i] == doctest::Approx(p[i]).epsilon(1e-13));
        }

        // Unshifted exp/sum oracle at moderate magnitudes.
        for (std::size_t i = 0; i < 4; ++i) {
            double denom = 0.0;
            for (std::size_t j = 0; j < 5; ++j) denom += std::exp(z.at({i, j}));
            for (std::size_t j = 0; j < 5; ++j) {
                CHECK(std::abs(p.at({i, j}) - std::exp(z.at({i, j})) / denom) <= 1e-12);
            }
        }
    }
}

TEST_CASE("flatten and concat") {
    Rng rng(21);
    T64 x = random_tensor({1, 512, 1, 1}, rng);
    T64 f = flatten(x);
    CHECK(f.shape() == Shape{1, 512});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(f[i] == x[i]);

    // Flatten then unflatten is the identity.
    T64 y = random_tensor({2, 3, 4, 5}, rng);
    T64 back = flatten(y).reshaped(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(back[i] == y[i]);

    T64 a = random_tensor({1, 512}, rng);
    T64 b = random_tensor({1, 512}, rng);
    T64 c = random_tensor({1, 1024}, rng);
    T64 cat = concat<double>({&a, &b, &c});
    CHECK(cat.shape() == Shape{1, 2048});
    CHECK(cat[0] == a[0]);
    CHECK(cat[512] == b[0]);
    CHECK(cat[1024] == c[0]);

    T64 bad = random_tensor({2, 4}, rng);
    CHECK_THROWS_AS(concat<double>({&a, &bad}), ShapeError);

    auto parts = concat_backward(cat, {512, 512, 1024});
    REQUIRE(parts.size() == 3);
    for (std::size_t i = 0; i < 512; ++i) CHECK(parts[0][i] == a[i]);
    for (std::size_t i = 0; i < 1024; ++i) CHECK(parts[2][i] == c[i]);
}

TEST_CASE("parallel and serial kernels agree bitwise") {
    Rng rng(29);
    T64 x = random_tensor({3, 4, 12, 12}, rng);
    T64 w = random_tensor({6, 4, 3, 3}, rng);
    T64 b = random_tensor({6}, rng);
    const ConvAttrs attrs{6, 3, 3};
    T64 serial = conv2d_forward(x, w, b, attrs, ExecPolicy::serial());
    T64 threaded = conv2d_forward(x, w, b, attrs, ExecPolicy{3});
    for (std::size_t i = 0; i < serial.size(); ++i) CHECK(serial[i] == threaded[i]);

    T64 g = random_tensor(serial.shape(), rng);
    auto gs = conv2d_backward(g, x, w, attrs, ExecPolicy::serial());
    auto gt = conv2d_backward(g, x, w, attrs, ExecPolicy{3});
    for (std::size_t i = 0; i < gs.x.size(); ++i) CHECK(gs.x[i] == gt.x[i]);
    for (std::size_t i = 0; i < gs.bias.size(); ++i) CHECK(gs.bias[i] == gt.bias[i]);
}
