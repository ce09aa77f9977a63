#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "adnet/ops.hpp"
#include "adnet/tensor.hpp"

namespace adnet {

enum class OpKind {
    input,
    conv2d,
    relu,
    pool2d,
    batchnorm,
    dense,
    dropout,
    flatten,
    concat,
    softmax,
};

const char* op_kind_name(OpKind kind);

struct InputAttrs {
    Shape4 shape; // batch extent is a placeholder; actual batch comes from x
};

struct NormAttrs {
    std::size_t channels = 1;
    double epsilon = 1e-3;
    double momentum = 0.99;
};

struct DenseAttrs {
    std::size_t in_features = 1;
    std::size_t out_features = 1;
};

struct DropoutAttrs {
    double rate = 0.5;
};

using NodeAttrs = std::variant<std::monostate, InputAttrs, ConvAttrs, PoolAttrs,
                               NormAttrs, DenseAttrs, DropoutAttrs>;

struct OpNode {
    int id = -1;
    std::string name;
    OpKind kind = OpKind::input;
    NodeAttrs attrs;
    std::vector<int> inputs;            // predecessor node ids
    std::vector<std::string> param_names; // owned entries in the ParamStore
};

// Topological order over arbitrary node ids; stable among independents
// (lower insertion position first). Throws ConfigError on cycles or dangling
// input references.
std::vector<int> toposort(const std::vector<OpNode>& nodes);

// Static DAG. Node ids equal their position in the construction vector;
// execution order is the stable topological order.
class Graph {
public:
    Graph() = default;
    Graph(std::vector<OpNode> nodes, int input_id, int output_id);

    const std::vector<OpNode>& nodes() const { return nodes_; }
    const OpNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    const std::vector<int>& order() const { return order_; }
    int input_id() const { return input_id_; }
    int output_id() const { return output_id_; }

private:
    std::vector<OpNode> nodes_;
    std::vector<int> order_;
    int input_id_ = -1;
    int output_id_ = -1;
};

// Named parameter tensors with optimizer slots. Iteration follows insertion
// order everywhere (updates, serialization), so runs are reproducible.
template <typename T>
struct ParamEntry {
    Tensor<T> value;
    bool trainable = true;
    Tensor<T> m; // Adam first moment, trainable entries only
    Tensor<T> v; // Adam second moment
};

template <typename T>
class ParamStore {
public:
    void add(const std::string& name, Tensor<T> value, bool trainable) {
        if (index_.count(name)) {
            throw StateError("parameter '" + name + "' already registered");
        }
        ParamEntry<T> e;
        if (trainable) {
            e.m = Tensor<T>(value.shape());
            e.v = Tensor<T>(value.shape());
        }
        e.value = std::move(value);
        e.trainable = trainable;
        index_.emplace(name, entries_.size());
        names_.push_back(name);
        entries_.push_back(std::move(e));
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    ParamEntry<T>& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) {
            throw StateError("unknown parameter '" + name + "'");
        }
        return entries_[it->second];
    }

    const ParamEntry<T>& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) {
            throw StateError("unknown parameter '" + name + "'");
        }
        return entries_[it->second];
    }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<std::string> names_;
    std::vector<ParamEntry<T>> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

template <typename T>
using GradMap = std::map<std::string, Tensor<T>>;

// Per-forward-call activation cache: node outputs plus dropout masks. Owned
// by the caller, so concurrent evaluations can share one parameter set.
template <typename T>
struct Tape {
    const Graph* graph = nullptr;
    Mode mode = Mode::infer;
    std::vector<Tensor<T>> outputs;       // indexed by node id
    std::vector<Tensor<T>> dropout_masks; // indexed by node id, train mode only
};

// Executes nodes in topological order. Train mode records a tape and updates
// batchnorm moving statistics; infer mode is a pure function of (params, x).
// rng feeds dropout nodes in execution order.
template <typename T>
Tensor<T> forward(const Graph& graph, ParamStore<T>& params, const Tensor<T>& x,
                  Mode mode, Rng& rng, Tape<T>* tape = nullptr,
                  const ExecPolicy& policy = ExecPolicy::serial());

// Reverse sweep from `at_node` (default: the graph output). Gradients of
// fan-out nodes accumulate by addition. Returns one gradient per trainable
// parameter; parameters of unreached nodes get zeros.
template <typename T>
GradMap<T> backward(const Graph& graph, const ParamStore<T>& params,
                    const Tape<T>& tape, const Tensor<T>& grad_output,
                    const ExecPolicy& policy = ExecPolicy::serial(), int at_node = -1);

// Output shape of every node for the given batch extent, by static
// inference. Throws ShapeError naming the first inconsistent node.
std::vector<Shape> infer_shapes(const Graph& graph, std::size_t batch);

} // namespace adnet
