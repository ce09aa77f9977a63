#include "adnet/tensor.hpp"

#include <cstring>
#include <sstream>

namespace adnet {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

// Row-of-C accumulation: for each output row, walk the contraction axis and
// axpy into the row. The inner loop is over independent elements, so the
// compiler may vectorize it without changing any element's summation order.
template <typename T>
void gemm_nn_rows(const T* a, std::size_t k, const T* b, std::size_t n, T* c,
                  std::size_t row_begin, std::size_t row_end) {
    for (std::size_t i = row_begin; i < row_end; ++i) {
        T* ci = c + i * n;
        std::memset(ci, 0, n * sizeof(T));
        const T* ai = a + i * k;
        for (std::size_t t = 0; t < k; ++t) {
            const T s = ai[t];
            const T* bt = b + t * n;
            for (std::size_t j = 0; j < n; ++j) {
                ci[j] += s * bt[j];
            }
        }
    }
}

template <typename T>
void gemm_tn_rows(const T* a, std::size_t p, std::size_t m, const T* b,
                  std::size_t n, T* c, std::size_t row_begin, std::size_t row_end) {
    for (std::size_t i = row_begin; i < row_end; ++i) {
        std::memset(c + i * n, 0, n * sizeof(T));
    }
    for (std::size_t t = 0; t < p; ++t) {
        const T* bt = b + t * n;
        for (std::size_t i = row_begin; i < row_end; ++i) {
            const T s = a[t * m + i];
            if (s == T{}) continue;
            T* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                ci[j] += s * bt[j];
            }
        }
    }
}

} // namespace

template <typename T>
void gemm_nn(const T* a, std::size_t m, std::size_t k, const T* b, std::size_t n,
             T* c, const ExecPolicy& policy) {
    parallel_for(m, policy, [&](std::size_t b0, std::size_t b1) {
        gemm_nn_rows(a, k, b, n, c, b0, b1);
    });
}

template <typename T>
void gemm_tn(const T* a, std::size_t p, std::size_t m, const T* b, std::size_t n,
             T* c, const ExecPolicy& policy) {
    parallel_for(m, policy, [&](std::size_t b0, std::size_t b1) {
        gemm_tn_rows(a, p, m, b, n, c, b0, b1);
    });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, const ExecPolicy& policy) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul: expects rank-2 operands, got " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    if (a.extent(1) != b.extent(0)) {
        throw ShapeError("matmul: inner extents disagree, " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    }
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor<T> c(Shape{m, n});
    gemm_nn(a.data(), m, k, b.data(), n, c.data(), policy);
    return c;
}

template <typename T>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, Elementwise op) {
    if (!a.same_shape(b)) {
        throw ShapeError("elementwise: shapes differ, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
    Tensor<T> out(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const std::size_t n = a.size();
    switch (op) {
        case Elementwise::add:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
            break;
        case Elementwise::sub:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
            break;
        case Elementwise::mul:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
            break;
    }
    return out;
}

template void gemm_nn<float>(const float*, std::size_t, std::size_t, const float*,
                             std::size_t, float*, const ExecPolicy&);
template void gemm_nn<double>(const double*, std::size_t, std::size_t, const double*,
                              std::size_t, double*, const ExecPolicy&);
template void gemm_tn<float>(const float*, std::size_t, std::size_t, const float*,
                             std::size_t, float*, const ExecPolicy&);
template void gemm_tn<double>(const double*, std::size_t, std::size_t, const double*,
                              std::size_t, double*, const ExecPolicy&);
template Tensor<float> matmul<float>(const Tensor<float>&, const Tensor<float>&,
                                     const ExecPolicy&);
template Tensor<double> matmul<double>(const Tensor<double>&, const Tensor<double>&,
                                       const ExecPolicy&);
template Tensor<float> elementwise<float>(const Tensor<float>&, const Tensor<float>&,
                                          Elementwise);
template Tensor<double> elementwise<double>(const Tensor<double>&, const Tensor<double>&,
                                            Elementwise);

} // namespace adnet
