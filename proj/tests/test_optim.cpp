#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "adnet/optim.hpp"
#include "adnet/rng.hpp"

using namespace adnet;

namespace {

using T64 = Tensor<double>;

T64 random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    T64 t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

} // namespace

TEST_CASE("binary logistic cost cases") {
    // sigmoid(0) = 0.5, so cost(0, 1) = -log(1/2) = ln 2. The y=0 branch uses
    // sigmoid(1 - z), so cost(1, 0) hits the same point.
    CHECK(binary_logistic_cost(0.0, 1) ==
          doctest::Approx(0.6931471805599453).epsilon(1e-15));
    CHECK(binary_logistic_cost(1.0, 0) ==
          doctest::Approx(0.6931471805599453).epsilon(1e-15));

    // Perfect prediction drives the cost to zero.
    CHECK(binary_logistic_cost(1000.0, 1) == 0.0);
    CHECK(binary_logistic_cost(-999.0, 0) == 0.0);

    // Confident mistakes stay finite thanks to the probability clamp.
    CHECK(std::isfinite(binary_logistic_cost(-1000.0, 1)));
    CHECK(binary_logistic_cost(-1000.0, 1) > 20.0);

    // Mean over samples equals the explicit loop.
    Rng rng(3);
    std::vector<double> zs;
    std::vector<int> ys;
    for (int i = 0; i < 50; ++i) {
        zs.push_back(rng.uniform(-4.0, 4.0));
        ys.push_back(rng.uniform() < 0.5 ? 0 : 1);
    }
    double manual = 0.0;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        manual += binary_logistic_cost(zs[i], ys[i]);
    }
    manual /= static_cast<double>(zs.size());
    CHECK(mean_binary_logistic_cost(zs, ys) == doctest::Approx(manual).epsilon(1e-15));
}

TEST_CASE("softmax cross-entropy values") {
    // Certain and correct: zero loss.
    T64 confident({2, 3}, {50, 0, 0, 0, 0, 50});
    auto lv = softmax_cross_entropy(confident, {0, 2});
    CHECK(lv.mean_loss == doctest::Approx(0.0).epsilon(1e-12));

    // Uniform logits over 3 classes: ln 3.
    T64 uniform = T64::full({4, 3}, 1.25);
    auto lu = softmax_cross_entropy(uniform, {0, 1, 2, 0});
    CHECK(lu.mean_loss == doctest::Approx(1.0986122886681098).epsilon(1e-14));

    CHECK_THROWS_AS(softmax_cross_entropy(uniform, {0, 1, 3, 0}), DataError);
    CHECK_THROWS_AS(softmax_cross_entropy(uniform, {0, 1, -1, 0}), DataError);
    CHECK_THROWS_AS(softmax_cross_entropy(uniform, {0, 1}), DataError);
}

TEST_CASE("grad_logits rows sum to zero and match finite differences") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        T64 logits = random_tensor({4, 3}, rng, -3.0, 3.0);
        std::vector<int> labels;
        for (int i = 0; i < 4; ++i) labels.push_back(static_cast<int>(rng.uniform_index(3)));
        auto lv = softmax_cross_entropy(logits, labels);
        CHECK(lv.mean_loss >= 0.0);
        for (std::size_t i = 0; i < 4; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < 3; ++j) row += lv.grad_logits.at({i, j});
            CHECK(std::abs(row) <= 1e-6);
        }

        const double h = 1e-6;
        for (std::size_t i = 0; i < logits.size(); ++i) {
            const double orig = logits[i];
            logits[i] = orig + h;
            const double lp = softmax_cross_entropy(logits, labels).mean_loss;
            logits[i] = orig - h;
            const double lm = softmax_cross_entropy(logits, labels).mean_loss;
            logits[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double a = lv.grad_logits[i];
            CHECK(std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-4}) <= 1e-6);
        }
    }
}

TEST_CASE("adam single- and two-step hand traces") {
    ParamStore<double> store;
    store.add("theta", T64(Shape{1}), true);
    AdamConfig cfg;

    GradMap<double> grads;
    grads.emplace("theta", T64({1}, {1.0}));

    adam_step(store, grads, cfg);
    CHECK(cfg.t == 1);
    // -lr * mhat / (sqrt(vhat) + eps) with mhat = vhat = 1.
    CHECK(std::abs(store.at("theta").value[0] - (-0.00099999990000001)) <= 1e-12);

    adam_step(store, grads, cfg);
    CHECK(cfg.t == 2);
    CHECK(std::abs(store.at("theta").value[0] - (-0.001999999800000013)) <= 1e-12);
}

TEST_CASE("adam matches an independent scalar trace on random gradients") {
    Rng rng(11);
    ParamStore<double> store;
    store.add("w", T64({3}, {0.1, -0.2, 0.3}), true);
    AdamConfig cfg;
    cfg.learning_rate = 0.002;

    // Scalar re-derivation of the update equations.
    double theta[3] = {0.1, -0.2, 0.3};
    double m[3] = {0, 0, 0}, v[3] = {0, 0, 0};
    for (int t = 1; t <= 25; ++t) {
        GradMap<double> grads;
        T64 g(Shape{3});
        for (int i = 0; i < 3; ++i) g[static_cast<std::size_t>(i)] = rng.uniform(-1.0, 1.0);
        grads.emplace("w", g);
        adam_step(store, grads, cfg);
        for (int i = 0; i < 3; ++i) {
            m[i] = 0.9 * m[i] + 0.1 * g[static_cast<std::size_t>(i)];
            v[i] = 0.999 * v[i] +
                   0.001 * g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(i)];
            const double mhat = m[i] / (1.0 - std::pow(0.9, t));
            const double vhat = v[i] / (1.0 - std::pow(0.999, t));
            theta[i] -= 0.002 * mhat / (std::sqrt(vhat) + 1e-7);
        }
    }
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(store.at("w").value[static_cast<std::size_t>(i)] - theta[i]) <= 1e-14);
    }
}

TEST_CASE("adam leaves parameters alone on zero gradients with zero state") {
    ParamStore<double> store;
    store.add("w", T64({2}, {0.5, -0.5}), true);
    AdamConfig cfg;
    GradMap<double> grads;
    grads.emplace("w", T64(Shape{2}));
    adam_step(store, grads, cfg);
    CHECK(store.at("w").value[0] == 0.5);
    CHECK(store.at("w").value[1] == -0.5);
}

TEST_CASE("adam rejects missing or extra gradient names") {
    ParamStore<double> store;
    store.add("a", T64(Shape{1}), true);
    store.add("stats", T64(Shape{1}), false);
    AdamConfig cfg;

    GradMap<double> empty;
    CHECK_THROWS_AS(adam_step(store, empty, cfg), StateError);

    GradMap<double> extra;
    extra.emplace("a", T64(Shape{1}));
    extra.emplace("b", T64(Shape{1}));
    CHECK_THROWS_AS(adam_step(store, extra, cfg), StateError);

    GradMap<double> frozen;
    frozen.emplace("a", T64(Shape{1}));
    frozen.emplace("stats", T64(Shape{1}));
    CHECK_THROWS_AS(adam_step(store, frozen, cfg), StateError);
}

TEST_CASE("adam is bit-reproducible") {
    auto run = [] {
        ParamStore<double> store;
        store.add("w", T64({2}, {1.0, -1.0}), true);
        AdamConfig cfg;
        Rng rng(5);
        for (int t = 0; t < 10; ++t) {
            GradMap<double> grads;
            T64 g(Shape{2});
            g[0] = rng.uniform(-1.0, 1.0);
            g[1] = rng.uniform(-1.0, 1.0);
            grads.emplace("w", g);
            adam_step(store, grads, cfg);
        }
        return std::pair{store.at("w").value[0], store.at("w").value[1]};
    };
    auto a = run();
    auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("adam minimizes a 1-D convex quadratic") {
    // f(theta) = (theta - 0.3)^2, lr 0.001, 5000 steps.
    ParamStore<double> store;
    store.add("theta", T64(Shape{1}), true);
    AdamConfig cfg;
    for (int t = 0; t < 5000; ++t) {
        GradMap<double> grads;
        T64 g(Shape{1});
        g[0] = 2.0 * (store.at("theta").value[0] - 0.3);
        grads.emplace("theta", g);
        adam_step(store, grads, cfg);
    }
    CHECK(std::abs(store.at("theta").value[0] - 0.3) < 1e-3);
}
