#include "adnet/optim.hpp"

#include <cmath>

namespace adnet {

namespace {

constexpr double kProbFloor = 1e-12;

double sigmoid_scalar(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

double binary_logistic_cost(double theta_dot_x, int y) {
    const double p = y == 1 ? sigmoid_scalar(theta_dot_x) : sigmoid_scalar(1.0 - theta_dot_x);
    return -std::log(std::max(p, kProbFloor));
}

double mean_binary_logistic_cost(const std::vector<double>& theta_dot_x,
                                 const std::vector<int>& labels) {
    if (theta_dot_x.size() != labels.size() || theta_dot_x.empty()) {
        throw DataError("logistic cost: need equal-length, nonempty sample/label lists");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        s += binary_logistic_cost(theta_dot_x[i], labels[i]);
    }
    return s / static_cast<double>(labels.size());
}

template <typename T>
LossValue<T> softmax_cross_entropy(const Tensor<T>& logits,
                                   const std::vector<int>& labels) {
    if (logits.rank() != 2) {
        throw ShapeError("softmax_cross_entropy: logits must be [n,k], got " +
                         shape_str(logits.shape()));
    }
    const std::size_t n = logits.extent(0), k = logits.extent(1);
    if (labels.size() != n) {
        throw DataError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                        " labels for " + std::to_string(n) + " rows");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= k) {
            throw DataError("softmax_cross_entropy: label " + std::to_string(y) +
                            " outside [0," + std::to_string(k) + ")");
        }
    }

    LossValue<T> out;
    out.grad_logits = Tensor<T>(logits.shape());
    const T inv_n = T{1} / static_cast<T>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = logits.data() + i * k;
        T* grow = out.grad_logits.data() + i * k;
        T mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        T sum{};
        for (std::size_t j = 0; j < k; ++j) {
            grow[j] = std::exp(row[j] - mx);
            sum += grow[j];
        }
        const T inv_sum = T{1} / sum;
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        for (std::size_t j = 0; j < k; ++j) {
            const T p = grow[j] * inv_sum;
            if (j == y) {
                total -= std::log(std::max(static_cast<double>(p), kProbFloor));
                grow[j] = (p - T{1}) * inv_n;
            } else {
                grow[j] = p * inv_n;
            }
        }
    }
    out.mean_loss = total / static_cast<double>(n);
    return out;
}

template <typename T>
void adam_step(ParamStore<T>& params, const GradMap<T>& grads, AdamConfig& cfg) {
    std::size_t trainable = 0;
    for (const auto& name : params.names()) {
        if (!params.at(name).trainable) continue;
        ++trainable;
        if (!grads.count(name)) {
            throw StateError("adam_step: missing gradient for '" + name + "'");
        }
    }
    if (grads.size() != trainable) {
        for (const auto& [name, g] : grads) {
            if (!params.contains(name) || !params.at(name).trainable) {
                throw StateError("adam_step: gradient for unknown or frozen parameter '" +
                                 name + "'");
            }
        }
    }

    cfg.t += 1;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(cfg.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(cfg.t));

    for (const auto& name : params.names()) {
        auto& e = params.at(name);
        if (!e.trainable) continue;
        const Tensor<T>& g = grads.at(name);
        if (!g.same_shape(e.value)) {
            throw StateError("adam_step: gradient shape " + shape_str(g.shape()) +
                             " != parameter shape " + shape_str(e.value.shape()) +
                             " for '" + name + "'");
        }
        T* th = e.value.data();
        T* m = e.m.data();
        T* v = e.v.data();
        const T* gp = g.data();
        const std::size_t sz = e.value.size();
        for (std::size_t i = 0; i < sz; ++i) {
            const double gi = static_cast<double>(gp[i]);
            const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
            const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            th[i] = static_cast<T>(static_cast<double>(th[i]) -
                                   cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon));
        }
    }
}

template LossValue<float> softmax_cross_entropy<float>(const Tensor<float>&,
                                                       const std::vector<int>&);
template LossValue<double> softmax_cross_entropy<double>(const Tensor<double>&,
                                                         const std::vector<int>&);
template void adam_step<float>(ParamStore<float>&, const GradMap<float>&, AdamConfig&);
template void adam_step<double>(ParamStore<double>&, const GradMap<double>&, AdamConfig&);

} // namespace adnet
