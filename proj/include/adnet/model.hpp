#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adnet/graph.hpp"
#include "adnet/rng.hpp"

namespace adnet {

// Exact positive rational, used for filter scaling so reduced configurations
// round identically everywhere (CLI, fingerprints, tests).
struct Rational {
    long long num = 1;
    long long den = 1;

    Rational() = default;
    Rational(long long n, long long d);

    // Accepts "3/4" or a plain decimal like "0.125".
    static Rational parse(const std::string& text);

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
    bool is_one() const { return num == den; }
    bool operator==(const Rational&) const = default;
};

// One branch: square kernel, square pool window (stride = window), and the
// filter count of each convolutional block in order.
struct BranchSpec {
    std::size_t kernel = 3;
    std::size_t pool_window = 2;
    std::vector<std::size_t> filters;
};

struct ModelConfig {
    Shape4 input{1, 3, 100, 100};
    std::vector<BranchSpec> branches;
    std::vector<std::size_t> head_widths{256, 128};
    std::size_t num_classes = 3;
    double dropout_rate = 0.5;
    Rational filter_scale{1, 1};
    std::vector<std::string> class_names{"NonDemented", "VeryMildDemented", "MildDemented"};
    double bn_epsilon = 1e-3;
    double bn_momentum = 0.99;

    // The published three-branch configuration.
    static ModelConfig standard();

    void validate() const;

    // Filter count after scaling, rounded half up; must stay >= 1.
    std::size_t scaled_filters(std::size_t filters) const;

    // Canonical one-line description; stored in weight files and compared on
    // load so weights and model cannot drift apart silently.
    std::string fingerprint(int precision_bits) const;
};

template <typename T>
struct BuiltModel {
    Graph graph;
    ParamStore<T> params;
    int logits_id = -1; // pre-softmax node, where training injects gradients
};

// Realizes the config as a graph plus freshly initialized parameters.
// Weights draw from U(-b, b) with b = sqrt(6 / (fan_in + fan_out)); biases
// and beta start at zero, gamma at one.
template <typename T>
BuiltModel<T> build_adnet(const ModelConfig& cfg, Rng& rng);

struct ParamCount {
    std::size_t total = 0;
    std::size_t trainable = 0;
    std::size_t non_trainable = 0;
};

template <typename T>
ParamCount param_count(const ParamStore<T>& store);

struct SummaryRow {
    std::string name;
    std::string kind;
    Shape output_shape;
    std::size_t params = 0;
};

// One row per node with statically inferred output shape and owned
// parameter count (trainable plus moving statistics).
template <typename T>
std::vector<SummaryRow> summarize(const Graph& graph, const ParamStore<T>& store,
                                  std::size_t batch = 1);

} // namespace adnet
