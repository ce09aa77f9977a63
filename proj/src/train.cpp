#include "adnet/train.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "adnet/optim.hpp"
#include "adnet/weights_io.hpp"

namespace adnet {

void RunConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning rate must be > 0");
    if (precision_bits != 32 && precision_bits != 64) {
        throw ConfigError("precision must be 32 or 64");
    }
    if (val_fraction < 0.0 || val_fraction >= 1.0) {
        throw ConfigError("validation fraction must be in [0,1)");
    }
}

ExecPolicy run_policy(bool deterministic) {
    return deterministic ? ExecPolicy::serial() : ExecPolicy::parallel();
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& probs) {
    const std::size_t n = probs.extent(0), k = probs.extent(1);
    std::vector<int> out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const T* row = probs.data() + i * k;
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (row[j] > row[best]) best = j;
        }
        out[i] = static_cast<int>(best);
    }
    return out;
}

template <typename T>
MetricsReport build_report(const Tensor<T>& probs, const std::vector<int>& labels,
                           double mean_loss, const std::vector<std::string>& class_names) {
    MetricsReport report;
    report.mean_loss = mean_loss;
    const auto cm = confusion(labels, argmax_rows(probs), class_names.size(), class_names);
    report.pr = accuracy_precision_recall(cm);
    report.auc = macro_auc(probs, labels);
    return report;
}

template <typename T>
EvalOutcome<T> run_inference(const Graph& graph, ParamStore<T>& params,
                             const Manifest& manifest, const std::string& split,
                             std::size_t batch_size, const ExecPolicy& policy,
                             bool resize, ImageCache* cache) {
    const std::size_t k = manifest.class_names.size();
    std::size_t total = 0;
    for (const auto& e : manifest.entries) {
        if (e.split == split) ++total;
    }
    if (total == 0) {
        throw DataError("split '" + split + "' has no entries");
    }

    EvalOutcome<T> outcome;
    outcome.probs = Tensor<T>(Shape{total, k});
    outcome.labels.reserve(total);

    // Epoch 0 with the manifest seed: a fixed, reproducible visit order.
    BatchStream<T> stream(manifest, split, batch_size, 0, manifest.seed, resize, cache);
    Rng rng(0); // unused by infer mode
    std::size_t row = 0;
    double loss_sum = 0.0;
    while (auto batch = stream.next()) {
        Tensor<T> probs = forward<T>(graph, params, batch->x, Mode::infer, rng, nullptr,
                                     policy);
        for (std::size_t i = 0; i < batch->labels.size(); ++i) {
            const int y = batch->labels[i];
            const double p = std::max(static_cast<double>(probs[i * k +
                                                                 static_cast<std::size_t>(y)]),
                                      1e-12);
            loss_sum += -std::log(p);
        }
        std::memcpy(outcome.probs.data() + row * k, probs.data(),
                    probs.size() * sizeof(T));
        outcome.labels.insert(outcome.labels.end(), batch->labels.begin(),
                              batch->labels.end());
        row += batch->labels.size();
    }
    outcome.mean_loss = loss_sum / static_cast<double>(total);
    return outcome;
}

namespace {

// Re-labels a validation share of the train split, stratified per class.
Manifest carve_validation(const Manifest& manifest, double val_fraction,
                          std::uint64_t seed) {
    std::vector<std::pair<std::string, int>> train_items;
    for (const auto& e : manifest.entries) {
        if (e.split == "train") train_items.emplace_back(e.path, e.label);
    }
    Manifest val_split = stratified_split(train_items, manifest.class_names,
                                          1.0 - val_fraction, Rng::derive(seed, 0x7a11));
    Manifest out = manifest;
    std::map<std::string, const char*> assignment;
    for (const auto& e : val_split.entries) {
        assignment[e.path] = e.split == "train" ? "train" : "val";
    }
    for (auto& e : out.entries) {
        if (e.split != "train") continue;
        e.split = assignment.at(e.path);
    }
    return out;
}

} // namespace

template <typename T>
void train_model(const RunConfig& cfg, const Manifest& manifest, std::ostream& log) {
    cfg.validate();

    ModelConfig model_cfg = ModelConfig::standard();
    model_cfg.filter_scale = cfg.filter_scale;
    model_cfg.class_names = manifest.class_names;
    model_cfg.num_classes = manifest.class_names.size();

    Rng init_rng(Rng::derive(cfg.seed, 1));
    auto model = build_adnet<T>(model_cfg, init_rng);
    const ExecPolicy policy = run_policy(cfg.deterministic);

    const Manifest working = cfg.val_fraction > 0.0
                                 ? carve_validation(manifest, cfg.val_fraction, cfg.seed)
                                 : manifest;

    std::ofstream metrics(cfg.metrics_out, std::ios::binary | std::ios::trunc);
    if (!metrics) {
        throw IoError("cannot write metrics '" + cfg.metrics_out + "'");
    }
    write_metrics_header(metrics, working.class_names);

    AdamConfig adam;
    adam.learning_rate = cfg.learning_rate;
    ImageCache cache;
    const std::size_t k = working.class_names.size();
    std::uint64_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        BatchStream<T> stream(working, "train", cfg.batch_size, epoch - 1,
                              Rng::derive(cfg.seed, 2), cfg.resize, &cache);
        Tensor<T> epoch_probs(Shape{stream.total(), k});
        std::vector<int> epoch_labels;
        epoch_labels.reserve(stream.total());
        double loss_sum = 0.0;
        std::size_t seen = 0, batch_index = 0;

        while (auto batch = stream.next()) {
            Rng drop_rng(Rng::derive(cfg.seed, 0xd0000000ULL + step));
            Tape<T> tape;
            forward(model.graph, model.params, batch->x, Mode::train, drop_rng, &tape,
                    policy);
            const Tensor<T>& logits =
                tape.outputs[static_cast<std::size_t>(model.logits_id)];
            auto lv = softmax_cross_entropy(logits, batch->labels);
            if (!std::isfinite(lv.mean_loss)) {
                throw StateError("non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_index));
            }
            auto grads = backward(model.graph, model.params, tape, lv.grad_logits, policy,
                                  model.logits_id);
            adam_step(model.params, grads, adam);

            const Tensor<T>& probs =
                tape.outputs[static_cast<std::size_t>(model.graph.output_id())];
            std::memcpy(epoch_probs.data() + seen * k, probs.data(),
                        probs.size() * sizeof(T));
            epoch_labels.insert(epoch_labels.end(), batch->labels.begin(),
                                batch->labels.end());
            loss_sum += lv.mean_loss * static_cast<double>(batch->labels.size());
            seen += batch->labels.size();
            ++batch_index;
            ++step;
        }

        const double train_loss = loss_sum / static_cast<double>(seen);
        auto report = build_report(epoch_probs, epoch_labels, train_loss,
                                   working.class_names);
        write_metrics_row(metrics, epoch, "train", report);

        log << "epoch " << epoch << "/" << cfg.epochs << " train loss="
            << format_metric(train_loss) << " acc=" << format_metric(report.pr.accuracy);

        if (cfg.val_fraction > 0.0) {
            auto val = run_inference(model.graph, model.params, working, "val",
                                     cfg.batch_size, policy, cfg.resize, &cache);
            auto val_report = build_report(val.probs, val.labels, val.mean_loss,
                                           working.class_names);
            write_metrics_row(metrics, epoch, "val", val_report);
            log << " val acc=" << format_metric(val_report.pr.accuracy);
        }
        if (cfg.eval_each_epoch) {
            auto test = run_inference(model.graph, model.params, working, "test",
                                      cfg.batch_size, policy, cfg.resize, &cache);
            auto test_report = build_report(test.probs, test.labels, test.mean_loss,
                                            working.class_names);
            write_metrics_row(metrics, epoch, "test", test_report);
            log << " test acc=" << format_metric(test_report.pr.accuracy);
        }
        log << "\n";
        metrics.flush();
    }

    save_weights(cfg.weights_out, model.params, model_cfg.fingerprint(cfg.precision_bits),
                 cfg.checkpoint, adam.t);
}

template std::vector<int> argmax_rows<float>(const Tensor<float>&);
template std::vector<int> argmax_rows<double>(const Tensor<double>&);
template MetricsReport build_report<float>(const Tensor<float>&, const std::vector<int>&,
                                           double, const std::vector<std::string>&);
template MetricsReport build_report<double>(const Tensor<double>&, const std::vector<int>&,
                                            double, const std::vector<std::string>&);
template EvalOutcome<float> run_inference<float>(const Graph&, ParamStore<float>&,
                                                 const Manifest&, const std::string&,
                                                 std::size_t, const ExecPolicy&, bool,
                                                 ImageCache*);
template EvalOutcome<double> run_inference<double>(const Graph&, ParamStore<double>&,
                                                   const Manifest&, const std::string&,
                                                   std::size_t, const ExecPolicy&, bool,
                                                   ImageCache*);
template void train_model<float>(const RunConfig&, const Manifest&, std::ostream&);
template void train_model<double>(const RunConfig&, const Manifest&, std::ostream&);

} // namespace adnet
