#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "adnet/data.hpp"
#include "adnet/metrics.hpp"
#include "adnet/model.hpp"

namespace adnet {

struct RunConfig {
    std::string manifest_path;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 0.001;
    std::uint64_t seed = 0;
    Rational filter_scale{1, 1};
    int precision_bits = 32;
    bool deterministic = false;
    std::string weights_out = "weights.adnw";
    std::string metrics_out = "metrics.csv";
    bool eval_each_epoch = false;
    double val_fraction = 0.0; // carved from the train split when > 0
    bool resize = false;
    bool checkpoint = false;

    void validate() const;
};

ExecPolicy run_policy(bool deterministic);

// Predicted class per row; ties break to the lowest index.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& probs);

// Confusion-derived metrics plus macro AUC over collected probabilities.
template <typename T>
MetricsReport build_report(const Tensor<T>& probs, const std::vector<int>& labels,
                           double mean_loss, const std::vector<std::string>& class_names);

template <typename T>
struct EvalOutcome {
    Tensor<T> probs; // [n,k], manifest split order
    std::vector<int> labels;
    double mean_loss = 0.0;
};

// Infer-mode sweep over one split.
template <typename T>
EvalOutcome<T> run_inference(const Graph& graph, ParamStore<T>& params,
                             const Manifest& manifest, const std::string& split,
                             std::size_t batch_size, const ExecPolicy& policy,
                             bool resize, ImageCache* cache);

// Full training run: builds the model from the manifest's class table, trains
// for the configured epochs, appends one metrics row per epoch and writes the
// final weights. Deterministic under (seed, deterministic).
template <typename T>
void train_model(const RunConfig& cfg, const Manifest& manifest, std::ostream& log);

} // namespace adnet
