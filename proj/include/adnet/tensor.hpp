#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "adnet/errors.hpp"
#include "adnet/parallel.hpp"

namespace adnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Canonical image-batch layout: batch outermost, then channel-major planes.
struct Shape4 {
    std::size_t n = 1;
    std::size_t c = 1;
    std::size_t h = 1;
    std::size_t w = 1;

    Shape to_shape() const { return {n, c, h, w}; }
};

// Dense row-major value tensor. Operations never mutate their inputs;
// results are fresh tensors.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(shape_size(shape_), T{});
    }

    Tensor(Shape shape, std::vector<T> values)
        : shape_(std::move(shape)), data_(std::move(values)) {
        validate_shape();
        if (data_.size() != shape_size(shape_)) {
            throw ShapeError("tensor_from: " + std::to_string(data_.size()) +
                             " values do not fill shape " + shape_str(shape_));
        }
    }

    static Tensor full(Shape shape, T value) {
        Tensor t(std::move(shape));
        for (auto& v : t.data_) v = value;
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    // Checked row-major multi-index access (test/debug path).
    T& at(std::initializer_list<std::size_t> idx) {
        return data_[flat_index(idx)];
    }
    const T& at(std::initializer_list<std::size_t> idx) const {
        return data_[flat_index(idx)];
    }

    // Same data, new extents; element count must match.
    Tensor reshaped(Shape new_shape) const {
        if (shape_size(new_shape) != data_.size()) {
            throw ShapeError("reshape: " + shape_str(shape_) + " -> " +
                             shape_str(new_shape) + " changes element count");
        }
        Tensor t;
        t.shape_ = std::move(new_shape);
        t.data_ = data_;
        t.validate_shape();
        return t;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    void validate_shape() const {
        if (shape_.empty()) {
            throw ShapeError("tensor rank must be >= 1");
        }
        for (std::size_t e : shape_) {
            if (e == 0) {
                throw ShapeError("tensor extents must be >= 1, got " + shape_str(shape_));
            }
        }
    }

    std::size_t flat_index(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != shape_.size()) {
            throw ShapeError("index rank mismatch for shape " + shape_str(shape_));
        }
        std::size_t flat = 0;
        std::size_t axis = 0;
        for (std::size_t i : idx) {
            if (i >= shape_[axis]) {
                throw ShapeError("index out of range on axis " + std::to_string(axis));
            }
            flat = flat * shape_[axis] + i;
            ++axis;
        }
        return flat;
    }

    Shape shape_;
    std::vector<T> data_;
};

enum class Elementwise { add, sub, mul };

// c[i,j] = sum_t a[i,t] * b[t,j], accumulated in ascending t per element.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b,
                 const ExecPolicy& policy = ExecPolicy::serial());

template <typename T>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, Elementwise op);

// Low-level kernels shared by the layer implementations. Both accumulate
// each output element over the contraction axis in ascending order, with or
// without threads, so results are reproducible and match the scalar loops.
//
// gemm_nn: C[m,n] = A[m,k] * B[k,n]
// gemm_tn: C[m,n] = A^T * B with A[p,m], B[p,n]
template <typename T>
void gemm_nn(const T* a, std::size_t m, std::size_t k, const T* b, std::size_t n,
             T* c, const ExecPolicy& policy);

template <typename T>
void gemm_tn(const T* a, std::size_t p, std::size_t m, const T* b, std::size_t n,
             T* c, const ExecPolicy& policy);

} // namespace adnet
