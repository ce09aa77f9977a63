#include "adnet/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace adnet {

Rational::Rational(long long n, long long d) : num(n), den(d) {
    if (den == 0 || num <= 0 || den < 0) {
        throw ConfigError("filter scale must be a positive rational, got " + str());
    }
    const long long g = std::gcd(num, den);
    num /= g;
    den /= g;
}

Rational Rational::parse(const std::string& text) {
    try {
        if (const auto slash = text.find('/'); slash != std::string::npos) {
            const long long n = std::stoll(text.substr(0, slash));
            const long long d = std::stoll(text.substr(slash + 1));
            return Rational(n, d);
        }
        if (const auto dot = text.find('.'); dot != std::string::npos) {
            const std::string digits = text.substr(0, dot) + text.substr(dot + 1);
            const std::size_t places = text.size() - dot - 1;
            long long den = 1;
            for (std::size_t i = 0; i < places; ++i) den *= 10;
            return Rational(std::stoll(digits), den);
        }
        return Rational(std::stoll(text), 1);
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse filter scale '" + text + "'");
    }
}

ModelConfig ModelConfig::standard() {
    ModelConfig cfg;
    cfg.branches = {
        BranchSpec{3, 2, {32, 64, 128, 256, 512}},
        BranchSpec{5, 3, {128, 256, 512}},
        BranchSpec{7, 5, {128, 256}},
    };
    return cfg;
}

void ModelConfig::validate() const {
    if (input.c < 1 || input.h < 1 || input.w < 1) {
        throw ConfigError("model input extents must be >= 1");
    }
    if (branches.empty()) {
        throw ConfigError("model needs at least one branch");
    }
    for (std::size_t b = 0; b < branches.size(); ++b) {
        const auto& br = branches[b];
        if (br.kernel < 3 || br.kernel % 2 == 0) {
            throw ConfigError("branch " + std::to_string(b + 1) +
                              ": kernel must be odd and >= 3");
        }
        if (br.pool_window < 2) {
            throw ConfigError("branch " + std::to_string(b + 1) + ": pool window must be >= 2");
        }
        if (br.filters.empty()) {
            throw ConfigError("branch " + std::to_string(b + 1) + ": needs filter counts");
        }
        for (std::size_t i = 1; i < br.filters.size(); ++i) {
            if (br.filters[i] < br.filters[i - 1]) {
                throw ConfigError("branch " + std::to_string(b + 1) +
                                  ": filter counts must be nondecreasing");
            }
        }
    }
    if (num_classes < 2) {
        throw ConfigError("model needs at least 2 classes");
    }
    if (!class_names.empty() && class_names.size() != num_classes) {
        throw ConfigError("class name count != num_classes");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw ConfigError("dropout rate must be in [0,1)");
    }
}

std::size_t ModelConfig::scaled_filters(std::size_t filters) const {
    const long long scaled = std::llround(static_cast<double>(filters) *
                                          static_cast<double>(filter_scale.num) /
                                          static_cast<double>(filter_scale.den));
    if (scaled < 1) {
        throw ConfigError("filter scale " + filter_scale.str() + " collapses a " +
                          std::to_string(filters) + "-filter block below 1");
    }
    return static_cast<std::size_t>(scaled);
}

std::string ModelConfig::fingerprint(int precision_bits) const {
    std::ostringstream os;
    os << "adnet-v1 input=" << input.c << "x" << input.h << "x" << input.w;
    os << " branches=";
    for (std::size_t b = 0; b < branches.size(); ++b) {
        if (b) os << ";";
        os << "k" << branches[b].kernel << "p" << branches[b].pool_window << "f";
        for (std::size_t i = 0; i < branches[b].filters.size(); ++i) {
            if (i) os << ",";
            os << branches[b].filters[i];
        }
    }
    os << " head=";
    for (std::size_t i = 0; i < head_widths.size(); ++i) {
        if (i) os << ",";
        os << head_widths[i];
    }
    os << " classes=";
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        if (i) os << ",";
        os << class_names[i];
    }
    os << " k=" << num_classes;
    os << " dropout=" << dropout_rate;
    os << " scale=" << filter_scale.str();
    os << " precision=" << precision_bits;
    return os.str();
}

namespace {

template <typename T>
Tensor<T> uniform_init(const Shape& shape, std::size_t fan_in, std::size_t fan_out,
                       Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor<T> t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<T>(rng.uniform(-bound, bound));
    }
    return t;
}

template <typename T>
struct GraphBuilder {
    std::vector<OpNode> nodes;
    ParamStore<T> params;
    Rng& rng;
    const ModelConfig& cfg;

    int add(std::string name, OpKind kind, NodeAttrs attrs, std::vector<int> inputs) {
        OpNode node;
        node.id = static_cast<int>(nodes.size());
        node.name = std::move(name);
        node.kind = kind;
        node.attrs = std::move(attrs);
        node.inputs = std::move(inputs);
        nodes.push_back(std::move(node));
        return nodes.back().id;
    }

    int conv(const std::string& name, int in, std::size_t in_ch, std::size_t out_ch,
             std::size_t kernel) {
        const int id = add(name, OpKind::conv2d,
                           ConvAttrs{out_ch, kernel, kernel}, {in});
        const std::size_t fan_in = in_ch * kernel * kernel;
        const std::size_t fan_out = out_ch * kernel * kernel;
        params.add(name + ".weight",
                   uniform_init<T>({out_ch, in_ch, kernel, kernel}, fan_in, fan_out, rng),
                   true);
        params.add(name + ".bias", Tensor<T>(Shape{out_ch}), true);
        nodes[static_cast<std::size_t>(id)].param_names = {name + ".weight", name + ".bias"};
        return id;
    }

    int norm(const std::string& name, int in, std::size_t channels) {
        const int id = add(name, OpKind::batchnorm,
                           NormAttrs{channels, cfg.bn_epsilon, cfg.bn_momentum}, {in});
        params.add(name + ".gamma", Tensor<T>::full({channels}, T{1}), true);
        params.add(name + ".beta", Tensor<T>(Shape{channels}), true);
        params.add(name + ".moving_mean", Tensor<T>(Shape{channels}), false);
        params.add(name + ".moving_var", Tensor<T>(Shape{channels}), false);
        nodes[static_cast<std::size_t>(id)].param_names = {
            name + ".gamma", name + ".beta", name + ".moving_mean", name + ".moving_var"};
        return id;
    }

    int dense(const std::string& name, int in, std::size_t d_in, std::size_t d_out) {
        const int id = add(name, OpKind::dense, DenseAttrs{d_in, d_out}, {in});
        params.add(name + ".weight", uniform_init<T>({d_in, d_out}, d_in, d_out, rng), true);
        params.add(name + ".bias", Tensor<T>(Shape{d_out}), true);
        nodes[static_cast<std::size_t>(id)].param_names = {name + ".weight", name + ".bias"};
        return id;
    }
};

} // namespace

template <typename T>
BuiltModel<T> build_adnet(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    GraphBuilder<T> b{{}, {}, rng, cfg};

    const int input = b.add("input", OpKind::input, InputAttrs{cfg.input}, {});

    std::vector<int> branch_ends;
    for (std::size_t bi = 0; bi < cfg.branches.size(); ++bi) {
        const auto& spec = cfg.branches[bi];
        const std::string prefix = "b" + std::to_string(bi + 1);
        int cur = input;
        std::size_t channels = cfg.input.c;
        std::size_t h = cfg.input.h, w = cfg.input.w;
        for (std::size_t blk = 0; blk < spec.filters.size(); ++blk) {
            const std::string base = prefix + ".block" + std::to_string(blk + 1);
            if (spec.kernel > h || spec.kernel > w) {
                throw ConfigError(base + ".conv: kernel " + std::to_string(spec.kernel) +
                                  " exceeds remaining extent " + std::to_string(h) + "x" +
                                  std::to_string(w));
            }
            const std::size_t out_ch = cfg.scaled_filters(spec.filters[blk]);
            cur = b.conv(base + ".conv", cur, channels, out_ch, spec.kernel);
            h = conv_out_extent(h, spec.kernel);
            w = conv_out_extent(w, spec.kernel);
            cur = b.add(base + ".relu", OpKind::relu, std::monostate{}, {cur});
            if (spec.pool_window > h || spec.pool_window > w) {
                throw ConfigError(base + ".pool: window " + std::to_string(spec.pool_window) +
                                  " exceeds remaining extent " + std::to_string(h) + "x" +
                                  std::to_string(w));
            }
            cur = b.add(base + ".pool", OpKind::pool2d,
                        PoolAttrs::square(spec.pool_window, PoolMode::average), {cur});
            h = pool_out_extent(h, spec.pool_window, spec.pool_window);
            w = pool_out_extent(w, spec.pool_window, spec.pool_window);
            cur = b.norm(base + ".norm", cur, out_ch);
            channels = out_ch;
        }
        cur = b.add(prefix + ".flatten", OpKind::flatten, std::monostate{}, {cur});
        cur = b.add(prefix + ".dropout", OpKind::dropout, DropoutAttrs{cfg.dropout_rate},
                    {cur});
        branch_ends.push_back(cur);
    }

    int cur = b.add("concat", OpKind::concat, std::monostate{}, branch_ends);

    // Static width of the concat layer feeds the first dense layer.
    std::size_t width = 0;
    for (std::size_t bi = 0; bi < cfg.branches.size(); ++bi) {
        const auto& spec = cfg.branches[bi];
        std::size_t h = cfg.input.h, w = cfg.input.w;
        for (std::size_t blk = 0; blk < spec.filters.size(); ++blk) {
            h = pool_out_extent(conv_out_extent(h, spec.kernel), spec.pool_window,
                                spec.pool_window);
            w = pool_out_extent(conv_out_extent(w, spec.kernel), spec.pool_window,
                                spec.pool_window);
        }
        width += cfg.scaled_filters(spec.filters.back()) * h * w;
    }

    for (std::size_t i = 0; i < cfg.head_widths.size(); ++i) {
        const std::string base = "head.dense" + std::to_string(i + 1);
        cur = b.dense(base, cur, width, cfg.head_widths[i]);
        width = cfg.head_widths[i];
        cur = b.add("head.relu" + std::to_string(i + 1), OpKind::relu, std::monostate{},
                    {cur});
        cur = b.add("head.dropout" + std::to_string(i + 1), OpKind::dropout,
                    DropoutAttrs{cfg.dropout_rate}, {cur});
    }
    const int logits = b.dense("head.logits", cur, width, cfg.num_classes);
    const int output = b.add("softmax", OpKind::softmax, std::monostate{}, {logits});

    BuiltModel<T> model{Graph(std::move(b.nodes), input, output), std::move(b.params),
                        logits};
    return model;
}

template <typename T>
ParamCount param_count(const ParamStore<T>& store) {
    ParamCount pc;
    for (const auto& name : store.names()) {
        const auto& e = store.at(name);
        pc.total += e.value.size();
        if (e.trainable) {
            pc.trainable += e.value.size();
        } else {
            pc.non_trainable += e.value.size();
        }
    }
    return pc;
}

template <typename T>
std::vector<SummaryRow> summarize(const Graph& graph, const ParamStore<T>& store,
                                  std::size_t batch) {
    const auto shapes = infer_shapes(graph, batch);
    std::vector<SummaryRow> rows;
    rows.reserve(graph.order().size());
    for (int id : graph.order()) {
        const OpNode& node = graph.node(id);
        SummaryRow row;
        row.name = node.name;
        row.kind = op_kind_name(node.kind);
        row.output_shape = shapes[static_cast<std::size_t>(id)];
        for (const auto& pname : node.param_names) {
            row.params += store.at(pname).value.size();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

template BuiltModel<float> build_adnet<float>(const ModelConfig&, Rng&);
template BuiltModel<double> build_adnet<double>(const ModelConfig&, Rng&);
template ParamCount param_count<float>(const ParamStore<float>&);
template ParamCount param_count<double>(const ParamStore<double>&);
template std::vector<SummaryRow> summarize<float>(const Graph&, const ParamStore<float>&,
                                                  std::size_t);
template std::vector<SummaryRow> summarize<double>(const Graph&, const ParamStore<double>&,
                                                   std::size_t);

} // namespace adnet
