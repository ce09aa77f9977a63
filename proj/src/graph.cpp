#include "adnet/graph.hpp"

#include <algorithm>

namespace adnet {

const char* op_kind_name(OpKind kind) {
    switch (kind) {
        case OpKind::input: return "input";
        case OpKind::conv2d: return "conv2d";
        case OpKind::relu: return "relu";
        case OpKind::pool2d: return "pool2d";
        case OpKind::batchnorm: return "batchnorm";
        case OpKind::dense: return "dense";
        case OpKind::dropout: return "dropout";
        case OpKind::flatten: return "flatten";
        case OpKind::concat: return "concat";
        case OpKind::softmax: return "softmax";
    }
    return "?";
}

std::vector<int> toposort(const std::vector<OpNode>& nodes) {
    const std::size_t n = nodes.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (int dep : nodes[i].inputs) {
            if (dep < 0 || static_cast<std::size_t>(dep) >= n) {
                throw ConfigError("node '" + nodes[i].name + "' references missing node " +
                                  std::to_string(dep));
            }
        }
    }

    std::vector<bool> placed(n, false);
    std::vector<int> order;
    order.reserve(n);
    // Repeated in-order scan keeps independents in insertion order.
    while (order.size() < n) {
        bool progressed = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (placed[i]) continue;
            bool ready = true;
            for (int dep : nodes[i].inputs) {
                if (!placed[static_cast<std::size_t>(dep)]) {
                    ready = false;
                    break;
                }
            }
            if (ready) {
                placed[i] = true;
                order.push_back(static_cast<int>(i));
                progressed = true;
            }
        }
        if (!progressed) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!placed[i]) {
                    throw ConfigError("cycle detected involving node '" + nodes[i].name + "'");
                }
            }
        }
    }
    return order;
}

Graph::Graph(std::vector<OpNode> nodes, int input_id, int output_id)
    : nodes_(std::move(nodes)), input_id_(input_id), output_id_(output_id) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        nodes_[i].id = static_cast<int>(i);
    }
    order_ = toposort(nodes_);

    std::size_t input_count = 0;
    for (const auto& nd : nodes_) {
        if (nd.kind == OpKind::input) ++input_count;
    }
    if (input_count != 1 || input_id_ < 0 ||
        static_cast<std::size_t>(input_id_) >= nodes_.size() ||
        nodes_[static_cast<std::size_t>(input_id_)].kind != OpKind::input) {
        throw ConfigError("graph needs exactly one input node");
    }
    if (output_id_ < 0 || static_cast<std::size_t>(output_id_) >= nodes_.size()) {
        throw ConfigError("graph output id out of range");
    }
    for (const auto& nd : nodes_) {
        for (int dep : nd.inputs) {
            if (dep == output_id_) {
                throw ConfigError("output node '" +
                                  nodes_[static_cast<std::size_t>(output_id_)].name +
                                  "' has successors");
            }
        }
    }

    // Every node must be reachable from the input.
    std::vector<bool> reach(nodes_.size(), false);
    reach[static_cast<std::size_t>(input_id_)] = true;
    for (int id : order_) {
        const auto& nd = nodes_[static_cast<std::size_t>(id)];
        for (int dep : nd.inputs) {
            if (reach[static_cast<std::size_t>(dep)]) {
                reach[static_cast<std::size_t>(id)] = true;
            }
        }
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!reach[i]) {
            throw ConfigError("node '" + nodes_[i].name + "' unreachable from input");
        }
    }
}

namespace {

[[noreturn]] void node_shape_error(const OpNode& node, const std::string& detail) {
    throw ShapeError("node '" + node.name + "' (" + op_kind_name(node.kind) + "): " + detail);
}

Shape infer_node_shape(const OpNode& node, const std::vector<Shape>& in_shapes,
                       std::size_t batch) {
    switch (node.kind) {
        case OpKind::input: {
            const auto& a = std::get<InputAttrs>(node.attrs);
            return Shape{batch, a.shape.c, a.shape.h, a.shape.w};
        }
        case OpKind::conv2d: {
            const auto& a = std::get<ConvAttrs>(node.attrs);
            const Shape& s = in_shapes[0];
            if (s.size() != 4) node_shape_error(node, "expects rank-4 input");
            if (a.kernel_h > s[2] || a.kernel_w > s[3]) {
                node_shape_error(node, "kernel " + std::to_string(a.kernel_h) + "x" +
                                           std::to_string(a.kernel_w) + " exceeds input " +
                                           std::to_string(s[2]) + "x" + std::to_string(s[3]));
            }
            return Shape{s[0], a.out_channels, conv_out_extent(s[2], a.kernel_h),
                         conv_out_extent(s[3], a.kernel_w)};
        }
        case OpKind::pool2d: {
            const auto& a = std::get<PoolAttrs>(node.attrs);
            const Shape& s = in_shapes[0];
            if (s.size() != 4) node_shape_error(node, "expects rank-4 input");
            if (a.window_h > s[2] || a.window_w > s[3]) {
                node_shape_error(node, "window " + std::to_string(a.window_h) + "x" +
                                           std::to_string(a.window_w) + " exceeds input " +
                                           std::to_string(s[2]) + "x" + std::to_string(s[3]));
            }
            return Shape{s[0], s[1], pool_out_extent(s[2], a.window_h, a.stride_h),
                         pool_out_extent(s[3], a.window_w, a.stride_w)};
        }
        case OpKind::batchnorm: {
            const auto& a = std::get<NormAttrs>(node.attrs);
            const Shape& s = in_shapes[0];
            if (s.size() != 4 || s[1] != a.channels) {
                node_shape_error(node, "expects rank-4 input with " +
                                           std::to_string(a.channels) + " channels, got " +
                                           shape_str(s));
            }
            return s;
        }
        case OpKind::dense: {
            const auto& a = std::get<DenseAttrs>(node.attrs);
            const Shape& s = in_shapes[0];
            if (s.size() != 2 || s[1] != a.in_features) {
                node_shape_error(node, "expects [n," + std::to_string(a.in_features) +
                                           "], got " + shape_str(s));
            }
            return Shape{s[0], a.out_features};
        }
        case OpKind::relu:
        case OpKind::dropout:
            return in_shapes[0];
        case OpKind::softmax: {
            const Shape& s = in_shapes[0];
            if (s.size() != 2 || s[1] < 2) {
                node_shape_error(node, "expects [n,k>=2], got " + shape_str(s));
            }
            return s;
        }
        case OpKind::flatten: {
            const Shape& s = in_shapes[0];
            if (s.size() != 4) node_shape_error(node, "expects rank-4 input");
            return Shape{s[0], s[1] * s[2] * s[3]};
        }
        case OpKind::concat: {
            std::size_t total = 0;
            for (const Shape& s : in_shapes) {
                if (s.size() != 2 || s[0] != in_shapes[0][0]) {
                    node_shape_error(node, "expects rank-2 inputs with equal batch");
                }
                total += s[1];
            }
            return Shape{in_shapes[0][0], total};
        }
    }
    node_shape_error(node, "unknown op kind");
}

} // namespace

std::vector<Shape> infer_shapes(const Graph& graph, std::size_t batch) {
    std::vector<Shape> shapes(graph.nodes().size());
    for (int id : graph.order()) {
        const OpNode& node = graph.node(id);
        std::vector<Shape> in_shapes;
        in_shapes.reserve(node.inputs.size());
        for (int dep : node.inputs) {
            in_shapes.push_back(shapes[static_cast<std::size_t>(dep)]);
        }
        if (node.kind != OpKind::input && in_shapes.empty()) {
            node_shape_error(node, "has no inputs");
        }
        shapes[static_cast<std::size_t>(id)] = infer_node_shape(node, in_shapes, batch);
    }
    return shapes;
}

namespace {

template <typename T>
NormState<T> norm_state_view(const ParamStore<T>& params, const OpNode& node) {
    const auto& a = std::get<NormAttrs>(node.attrs);
    NormState<T> s;
    s.gamma = params.at(node.name + ".gamma").value;
    s.beta = params.at(node.name + ".beta").value;
    s.moving_mean = params.at(node.name + ".moving_mean").value;
    s.moving_var = params.at(node.name + ".moving_var").value;
    s.epsilon = static_cast<T>(a.epsilon);
    s.momentum = static_cast<T>(a.momentum);
    return s;
}

} // namespace

template <typename T>
Tensor<T> forward(const Graph& graph, ParamStore<T>& params, const Tensor<T>& x,
                  Mode mode, Rng& rng, Tape<T>* tape, const ExecPolicy& policy) {
    const OpNode& in_node = graph.node(graph.input_id());
    const auto& in_attrs = std::get<InputAttrs>(in_node.attrs);
    if (x.rank() != 4 || x.extent(1) != in_attrs.shape.c ||
        x.extent(2) != in_attrs.shape.h || x.extent(3) != in_attrs.shape.w) {
        node_shape_error(in_node,
                         "expects [n," + std::to_string(in_attrs.shape.c) + "," +
                             std::to_string(in_attrs.shape.h) + "," +
                             std::to_string(in_attrs.shape.w) + "], got " +
                             shape_str(x.shape()));
    }
    infer_shapes(graph, x.extent(0)); // validates the whole net before running

    std::vector<Tensor<T>> outputs(graph.nodes().size());
    std::vector<Tensor<T>> masks(mode == Mode::train ? graph.nodes().size() : 0);

    for (int id : graph.order()) {
        const OpNode& node = graph.node(id);
        auto in = [&](std::size_t i) -> const Tensor<T>& {
            return outputs[static_cast<std::size_t>(node.inputs[i])];
        };
        Tensor<T> out;
        switch (node.kind) {
            case OpKind::input:
                out = x;
                break;
            case OpKind::conv2d:
                out = conv2d_forward(in(0), params.at(node.name + ".weight").value,
                                     params.at(node.name + ".bias").value,
                                     std::get<ConvAttrs>(node.attrs), policy);
                break;
            case OpKind::relu:
                out = relu(in(0));
                break;
            case OpKind::pool2d:
                out = pool2d_forward(in(0), std::get<PoolAttrs>(node.attrs), policy);
                break;
            case OpKind::batchnorm: {
                NormState<T> state = norm_state_view(params, node);
                out = batchnorm_forward(in(0), state, mode, policy);
                if (mode == Mode::train) {
                    params.at(node.name + ".moving_mean").value = std::move(state.moving_mean);
                    params.at(node.name + ".moving_var").value = std::move(state.moving_var);
                }
                break;
            }
            case OpKind::dense:
                out = dense_forward(in(0), params.at(node.name + ".weight").value,
                                    params.at(node.name + ".bias").value, policy);
                break;
            case OpKind::dropout: {
                auto [y, mask] = dropout_forward(in(0), std::get<DropoutAttrs>(node.attrs).rate,
                                                 mode, rng);
                out = std::move(y);
                if (mode == Mode::train) {
                    masks[static_cast<std::size_t>(id)] = std::move(mask);
                }
                break;
            }
            case OpKind::flatten:
                out = flatten(in(0));
                break;
            case OpKind::concat: {
                std::vector<const Tensor<T>*> xs;
                xs.reserve(node.inputs.size());
                for (int dep : node.inputs) {
                    xs.push_back(&outputs[static_cast<std::size_t>(dep)]);
                }
                out = concat(xs);
                break;
            }
            case OpKind::softmax:
                out = softmax(in(0));
                break;
        }
        outputs[static_cast<std::size_t>(id)] = std::move(out);
    }

    Tensor<T> result = outputs[static_cast<std::size_t>(graph.output_id())];
    if (tape) {
        tape->graph = &graph;
        tape->mode = mode;
        tape->outputs = std::move(outputs);
        tape->dropout_masks = std::move(masks);
    }
    return result;
}

template <typename T>
GradMap<T> backward(const Graph& graph, const ParamStore<T>& params,
                    const Tape<T>& tape, const Tensor<T>& grad_output,
                    const ExecPolicy& policy, int at_node) {
    if (tape.graph != &graph || tape.outputs.size() != graph.nodes().size()) {
        throw StateError("tape does not belong to this graph");
    }
    if (tape.mode != Mode::train) {
        throw StateError("backward requires a train-mode tape");
    }
    if (at_node < 0) at_node = graph.output_id();
    const Tensor<T>& start_out = tape.outputs[static_cast<std::size_t>(at_node)];
    if (grad_output.shape() != start_out.shape()) {
        throw ShapeError("backward: grad_output " + shape_str(grad_output.shape()) +
                         " vs node output " + shape_str(start_out.shape()));
    }

    std::vector<std::optional<Tensor<T>>> node_grads(graph.nodes().size());
    node_grads[static_cast<std::size_t>(at_node)] = grad_output;

    GradMap<T> grads;
    auto accumulate = [&](int id, Tensor<T>&& g) {
        auto& slot = node_grads[static_cast<std::size_t>(id)];
        if (!slot) {
            slot = std::move(g);
        } else {
            *slot = elementwise(*slot, g, Elementwise::add);
        }
    };

    const auto& order = graph.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int id = *it;
        const OpNode& node = graph.node(id);
        const auto& maybe_grad = node_grads[static_cast<std::size_t>(id)];
        if (!maybe_grad) continue;
        const Tensor<T>& g = *maybe_grad;
        auto in_out = [&](std::size_t i) -> const Tensor<T>& {
            return tape.outputs[static_cast<std::size_t>(node.inputs[i])];
        };
        switch (node.kind) {
            case OpKind::input:
                break;
            case OpKind::conv2d: {
                auto cg = conv2d_backward(g, in_out(0),
                                          params.at(node.name + ".weight").value,
                                          std::get<ConvAttrs>(node.attrs), policy);
                grads[node.name + ".weight"] = std::move(cg.weights);
                grads[node.name + ".bias"] = std::move(cg.bias);
                accumulate(node.inputs[0], std::move(cg.x));
                break;
            }
            case OpKind::relu:
                accumulate(node.inputs[0], relu_backward(g, in_out(0)));
                break;
            case OpKind::pool2d:
                accumulate(node.inputs[0],
                           pool2d_backward(g, in_out(0), std::get<PoolAttrs>(node.attrs),
                                           policy));
                break;
            case OpKind::batchnorm: {
                NormState<T> state = norm_state_view(params, node);
                auto ng = batchnorm_backward(g, in_out(0), state, policy);
                grads[node.name + ".gamma"] = std::move(ng.gamma);
                grads[node.name + ".beta"] = std::move(ng.beta);
                accumulate(node.inputs[0], std::move(ng.x));
                break;
            }
            case OpKind::dense: {
                auto dg = dense_backward(g, in_out(0),
                                         params.at(node.name + ".weight").value, policy);
                grads[node.name + ".weight"] = std::move(dg.weights);
                grads[node.name + ".bias"] = std::move(dg.bias);
                accumulate(node.inputs[0], std::move(dg.x));
                break;
            }
            case OpKind::dropout: {
                const auto& mask = tape.dropout_masks[static_cast<std::size_t>(id)];
                accumulate(node.inputs[0], dropout_backward(g, mask));
                break;
            }
            case OpKind::flatten:
                accumulate(node.inputs[0], g.reshaped(in_out(0).shape()));
                break;
            case OpKind::concat: {
                std::vector<std::size_t> widths;
                widths.reserve(node.inputs.size());
                for (int dep : node.inputs) {
                    widths.push_back(tape.outputs[static_cast<std::size_t>(dep)].extent(1));
                }
                auto parts = concat_backward(g, widths);
                for (std::size_t i = 0; i < parts.size(); ++i) {
                    accumulate(node.inputs[i], std::move(parts[i]));
                }
                break;
            }
            case OpKind::softmax:
                accumulate(node.inputs[0],
                           softmax_backward(g, tape.outputs[static_cast<std::size_t>(id)]));
                break;
        }
    }

    // Exactly the trainable names: zero-fill parameters of unreached nodes.
    for (const auto& name : params.names()) {
        if (!params.at(name).trainable) continue;
        if (!grads.count(name)) {
            grads.emplace(name, Tensor<T>(params.at(name).value.shape()));
        }
    }
    return grads;
}

template Tensor<float> forward<float>(const Graph&, ParamStore<float>&,
                                      const Tensor<float>&, Mode, Rng&, Tape<float>*,
                                      const ExecPolicy&);
template Tensor<double> forward<double>(const Graph&, ParamStore<double>&,
                                        const Tensor<double>&, Mode, Rng&, Tape<double>*,
                                        const ExecPolicy&);
template GradMap<float> backward<float>(const Graph&, const ParamStore<float>&,
                                        const Tape<float>&, const Tensor<float>&,
                                        const ExecPolicy&, int);
template GradMap<double> backward<double>(const Graph&, const ParamStore<double>&,
                                          const Tape<double>&, const Tensor<double>&,
                                          const ExecPolicy&, int);

} // namespace adnet
