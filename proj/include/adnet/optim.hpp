#pragma once

#include <cstdint>
#include <vector>

#include "adnet/graph.hpp"
#include "adnet/tensor.hpp"

namespace adnet {

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    std::uint64_t t = 0; // completed steps
};

template <typename T>
struct LossValue {
    double mean_loss = 0.0;   // nats, mean over the batch
    Tensor<T> grad_logits;    // (softmax - onehot) / n, rows sum to 0
};

// Per-sample logistic cost:
//   -log(sigmoid(z))      if y == 1
//   -log(sigmoid(1 - z))  if y == 0
// with the probability clamped to >= 1e-12 before the log.
double binary_logistic_cost(double theta_dot_x, int y);

// Mean of binary_logistic_cost over paired samples.
double mean_binary_logistic_cost(const std::vector<double>& theta_dot_x,
                                 const std::vector<int>& labels);

// Mean of -log softmax(logits)[true class] plus its logits gradient.
// Probabilities are clamped to >= 1e-12 before the log.
template <typename T>
LossValue<T> softmax_cross_entropy(const Tensor<T>& logits,
                                   const std::vector<int>& labels);

// One Adam update over every trainable entry, in store insertion order.
// grads must contain exactly the trainable names.
template <typename T>
void adam_step(ParamStore<T>& params, const GradMap<T>& grads, AdamConfig& cfg);

} // namespace adnet
