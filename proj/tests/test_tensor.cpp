#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "adnet/rng.hpp"
#include "adnet/tensor.hpp"

using namespace adnet;

namespace {

Tensor<double> random_tensor(const Shape& shape, Rng& rng) {
    Tensor<double> t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
}

// Defining triple loop, scalar accumulator.
Tensor<double> matmul_oracle(const Tensor<double>& a, const Tensor<double>& b) {
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor<double> c(Shape{m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) {
                s += a[i * k + t] * b[t * n + j];
            }
            c[i * n + j] = s;
        }
    }
    return c;
}

} // namespace

TEST_CASE("construction is row-major") {
    Tensor<double> t({2, 2}, {1, 2, 3, 4});
    CHECK(t.at({1, 0}) == 3);
    CHECK(t.at({0, 1}) == 2);

    Tensor<double> z({3}, {0, 0, 0});
    double sum = 0;
    for (double v : z.values()) sum += v;
    CHECK(sum == 0.0);
}

TEST_CASE("construction rejects bad shapes and sizes") {
    CHECK_THROWS_AS(Tensor<double>({2, 3}, {1, 2, 3, 4, 5}), ShapeError);
    CHECK_THROWS_AS(Tensor<double>(Shape{}), ShapeError);
    CHECK_THROWS_AS(Tensor<double>(Shape{2, 0, 3}), ShapeError);
}

TEST_CASE("reshape round-trip is the identity on data") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t a = 1 + rng.uniform_index(5);
        const std::size_t b = 1 + rng.uniform_index(5);
        const std::size_t c = 1 + rng.uniform_index(5);
        Tensor<double> t = random_tensor({a, b, c}, rng);
        Tensor<double> back = t.reshaped({a * b * c}).reshaped({a, b, c});
        REQUIRE(back.shape() == t.shape());
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);
    }
    Tensor<double> t({2, 2}, {1, 2, 3, 4});
    CHECK_THROWS_AS(t.reshaped({3, 2}), ShapeError);
}

TEST_CASE("matmul identity and hand case") {
    Tensor<double> eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Rng rng(3);
    Tensor<double> x = random_tensor({3, 4}, rng);
    Tensor<double> y = matmul(eye, x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

    Tensor<double> a({2, 2}, {1, 2, 3, 4});
    Tensor<double> b({2, 1}, {1, 1});
    Tensor<double> c = matmul(a, b);
    CHECK(c.shape() == Shape{2, 1});
    CHECK(c[0] == 3.0);
    CHECK(c[1] == 7.0);
}

TEST_CASE("matmul equals the triple-loop oracle bit for bit") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t m = 1 + rng.uniform_index(8);
        const std::size_t k = 1 + rng.uniform_index(8);
        const std::size_t n = 1 + rng.uniform_index(8);
        Tensor<double> a = random_tensor({m, k}, rng);
        Tensor<double> b = random_tensor({k, n}, rng);
        Tensor<double> expect = matmul_oracle(a, b);
        Tensor<double> serial = matmul(a, b, ExecPolicy::serial());
        Tensor<double> threaded = matmul(a, b, ExecPolicy{4});
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(serial[i] == expect[i]);
            CHECK(threaded[i] == expect[i]);
        }
    }
    // The fixed [4,5]x[5,6] contract case.
    Tensor<double> a = random_tensor({4, 5}, rng);
    Tensor<double> b = random_tensor({5, 6}, rng);
    Tensor<double> expect = matmul_oracle(a, b);
    Tensor<double> got = matmul(a, b);
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(got[i] == expect[i]);
}

TEST_CASE("matmul rejects mismatched extents") {
    Rng rng(1);
    Tensor<double> a = random_tensor({2, 3}, rng);
    Tensor<double> b = random_tensor({4, 2}, rng);
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
    Tensor<double> r1 = random_tensor({4}, rng);
    CHECK_THROWS_AS(matmul(a, r1), ShapeError);
}

TEST_CASE("elementwise identities and oracle") {
    Rng rng(5);
    Tensor<double> a = random_tensor({3, 4}, rng);
    Tensor<double> zeros(a.shape());

    Tensor<double> sum = elementwise(a, zeros, Elementwise::add);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(sum[i] == a[i]);

    Tensor<double> diff = elementwise(a, a, Elementwise::sub);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(diff[i] == 0.0);

    Tensor<double> b = random_tensor({3, 4}, rng);
    Tensor<double> prod = elementwise(a, b, Elementwise::mul);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(prod[i] == a[i] * b[i]);

    Tensor<double> other = random_tensor({4, 3}, rng);
    CHECK_THROWS_AS(elementwise(a, other, Elementwise::add), ShapeError);
}

TEST_CASE("operations leave their inputs untouched") {
    Rng rng(9);
    Tensor<double> a = random_tensor({4, 4}, rng);
    Tensor<double> b = random_tensor({4, 4}, rng);
    Tensor<double> a_copy = a;
    Tensor<double> b_copy = b;
    (void)matmul(a, b);
    (void)elementwise(a, b, Elementwise::mul);
    (void)a.reshaped({16});
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == a_copy[i]);
        CHECK(b[i] == b_copy[i]);
    }
}
