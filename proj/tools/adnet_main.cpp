// Command-line front end: dataset splitting, architecture summary, gradient
// auditing, training, evaluation and single-image prediction.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adnet/data.hpp"
#include "adnet/gradcheck.hpp"
#include "adnet/optim.hpp"
#include "adnet/train.hpp"
#include "adnet/weights_io.hpp"

namespace {

using namespace adnet;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

int cmd_split(const std::string& data_dir, double fraction, std::uint64_t seed,
              const std::string& out_path) {
    std::vector<std::string> class_names;
    auto items = scan_class_dirs(data_dir, class_names);
    Manifest manifest = stratified_split(items, class_names, fraction, seed);
    save_manifest(manifest, out_path);

    const auto train_counts = manifest.split_counts("train");
    const auto test_counts = manifest.split_counts("test");
    std::size_t train_total = 0, test_total = 0;
    std::printf("%-24s %8s %8s %8s\n", "class", "train", "test", "total");
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        std::printf("%-24s %8zu %8zu %8zu\n", class_names[c].c_str(), train_counts[c],
                    test_counts[c], train_counts[c] + test_counts[c]);
        train_total += train_counts[c];
        test_total += test_counts[c];
    }
    std::printf("%-24s %8zu %8zu %8zu\n", "total", train_total, test_total,
                train_total + test_total);
    std::printf("manifest written to %s\n", out_path.c_str());
    return 0;
}

int cmd_summary(const Rational& scale) {
    ModelConfig cfg = ModelConfig::standard();
    cfg.filter_scale = scale;
    Rng rng(0);
    auto model = build_adnet<float>(cfg, rng);
    const auto rows = summarize(model.graph, model.params);

    std::printf("%-22s %-10s %-18s %12s\n", "layer", "kind", "output", "params");
    for (const auto& row : rows) {
        std::printf("%-22s %-10s %-18s %12zu\n", row.name.c_str(), row.kind.c_str(),
                    shape_str(row.output_shape).c_str(), row.params);
    }
    const auto pc = param_count(model.params);
    std::printf("total parameters: %zu (trainable %zu, non-trainable %zu)\n", pc.total,
                pc.trainable, pc.non_trainable);
    return 0;
}

int cmd_gradcheck(const std::string& op_filter, std::uint64_t seed,
                  const std::string& perturb_op) {
    const auto reports = run_gradient_checks(op_filter, seed, 20, perturb_op);
    if (reports.empty()) {
        std::fprintf(stderr, "error: config: no op matches filter '%s'\n",
                     op_filter.c_str());
        return 1;
    }
    bool all_pass = true;
    for (const auto& r : reports) {
        std::printf("%-24s worst rel err %.3e (tol %.0e) %s\n", r.op.c_str(),
                    r.worst_rel_err, r.tolerance, r.pass ? "ok" : "FAIL");
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 1;
}

int cmd_train(RunConfig cfg) {
    cfg.validate();
    Manifest manifest = load_manifest(cfg.manifest_path);
    if (cfg.precision_bits == 64) {
        train_model<double>(cfg, manifest, std::cout);
    } else {
        train_model<float>(cfg, manifest, std::cout);
    }
    std::printf("weights written to %s\n", cfg.weights_out.c_str());
    std::printf("metrics written to %s\n", cfg.metrics_out.c_str());
    return 0;
}

// Rebuilds the graph for the caller's configuration and checks it against the
// fingerprint stored in the weights file.
template <typename T>
int run_eval(const WeightsMeta& meta, const std::string& weights_path,
             const Manifest& manifest, const std::string& split, const Rational& scale,
             std::size_t batch_size, bool deterministic, bool resize,
             const std::string& metrics_path, const std::string& confusion_path,
             int precision_bits) {
    ModelConfig cfg = ModelConfig::standard();
    cfg.filter_scale = scale;
    cfg.class_names = manifest.class_names;
    cfg.num_classes = manifest.class_names.size();
    const std::string expected = cfg.fingerprint(precision_bits);
    if (expected != meta.fingerprint) {
        throw CompatError("weights '" + weights_path + "' do not match this run: file has '" +
                          meta.fingerprint + "', expected '" + expected + "'");
    }

    auto loaded = load_weights<T>(weights_path);
    Rng rng(0);
    auto model = build_adnet<T>(cfg, rng);
    const ExecPolicy policy = run_policy(deterministic);
    ImageCache cache;
    auto outcome = run_inference(model.graph, loaded.store, manifest, split, batch_size,
                                 policy, resize, &cache);
    auto report = build_report(outcome.probs, outcome.labels, outcome.mean_loss,
                               manifest.class_names);

    std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
    if (!metrics) throw IoError("cannot write metrics '" + metrics_path + "'");
    write_metrics_header(metrics, manifest.class_names);
    write_metrics_row(metrics, 0, split, report);

    const auto cm = confusion(outcome.labels, argmax_rows(outcome.probs),
                              manifest.class_names.size(), manifest.class_names);
    std::ofstream conf(confusion_path, std::ios::binary | std::ios::trunc);
    if (!conf) throw IoError("cannot write confusion '" + confusion_path + "'");
    write_confusion_csv(conf, cm);

    std::printf("split: %s samples: %zu\n", split.c_str(), outcome.labels.size());
    std::printf("loss: %s\n", fmt(report.mean_loss).c_str());
    std::printf("accuracy: %s\n", fmt(report.pr.accuracy).c_str());
    std::printf("macro_auc: %s\n", format_metric(report.auc.macro).c_str());
    return 0;
}

int cmd_eval(const std::string& weights_path, const std::string& manifest_path,
             const std::string& split, const std::string& scale_text,
             std::size_t batch_size, bool deterministic, bool resize,
             const std::string& metrics_path, const std::string& confusion_path,
             int precision_flag) {
    Manifest manifest = load_manifest(manifest_path);
    const WeightsMeta meta = peek_weights(weights_path);
    const int file_bits = fingerprint_precision(meta.fingerprint);
    const int bits = precision_flag != 0 ? precision_flag : (file_bits != 0 ? file_bits : 32);
    const Rational scale = Rational::parse(scale_text);
    if (bits == 64) {
        return run_eval<double>(meta, weights_path, manifest, split, scale, batch_size,
                                deterministic, resize, metrics_path, confusion_path, bits);
    }
    return run_eval<float>(meta, weights_path, manifest, split, scale, batch_size,
                           deterministic, resize, metrics_path, confusion_path, bits);
}

template <typename T>
int run_predict(const WeightsMeta& meta, const std::string& weights_path,
                const std::string& image_path, bool resize) {
    // Prediction trusts the file's own fingerprint for the architecture.
    const std::string scale_text = [&] {
        const auto pos = meta.fingerprint.find("scale=");
        if (pos == std::string::npos) return std::string("1/1");
        const auto end = meta.fingerprint.find(' ', pos);
        return meta.fingerprint.substr(pos + 6, end - pos - 6);
    }();
    const std::string classes_text = [&] {
        const auto pos = meta.fingerprint.find("classes=");
        if (pos == std::string::npos) return std::string();
        const auto end = meta.fingerprint.find(' ', pos);
        return meta.fingerprint.substr(pos + 8, end - pos - 8);
    }();
    std::vector<std::string> class_names;
    for (std::size_t start = 0; start <= classes_text.size();) {
        const auto comma = classes_text.find(',', start);
        const auto end = comma == std::string::npos ? classes_text.size() : comma;
        if (end > start) class_names.push_back(classes_text.substr(start, end - start));
        start = end + 1;
    }
    if (class_names.empty()) {
        throw FormatError("weights '" + weights_path + "' carry no class table");
    }

    ModelConfig cfg = ModelConfig::standard();
    cfg.filter_scale = Rational::parse(scale_text);
    cfg.class_names = class_names;
    cfg.num_classes = class_names.size();

    auto loaded = load_weights<T>(weights_path);
    Rng rng(0);
    auto model = build_adnet<T>(cfg, rng);

    Tensor<T> planes = load_image_tensor<T>(image_path, resize);
    Tensor<T> x(Shape{1, 3, kImageSide, kImageSide}, std::vector<T>(
        planes.values().begin(), planes.values().end()));
    Tensor<T> probs = forward<T>(model.graph, loaded.store, x, Mode::infer, rng, nullptr,
                                 run_policy(false));

    const auto pred = argmax_rows(probs);
    std::printf("class: %s\n", class_names[static_cast<std::size_t>(pred[0])].c_str());
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        std::printf("p(%s)=%s\n", class_names[c].c_str(),
                    fmt(static_cast<double>(probs[c])).c_str());
    }
    return 0;
}

int cmd_predict(const std::string& weights_path, const std::string& image_path,
                bool resize) {
    const WeightsMeta meta = peek_weights(weights_path);
    const int bits = fingerprint_precision(meta.fingerprint);
    if (bits == 64) {
        return run_predict<double>(meta, weights_path, image_path, resize);
    }
    return run_predict<float>(meta, weights_path, image_path, resize);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Three-branch convolutional classifier for dementia staging MRI slices"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a key=value file");

    // split
    auto* split = app.add_subcommand("split", "Stratified train/test manifest from a class-per-directory tree");
    std::string split_data, split_out = "manifest.csv";
    double split_fraction = 0.9;
    std::uint64_t split_seed = 0;
    split->add_option("--data", split_data, "Dataset root (one directory per class)")
        ->required();
    split->add_option("--fraction", split_fraction, "Train fraction (0,1)");
    split->add_option("--seed", split_seed, "Split seed");
    split->add_option("--out", split_out, "Manifest output path");

    // summary
    auto* summary = app.add_subcommand("summary", "Print layer table and parameter counts");
    std::string summary_scale = "1/1";
    summary->add_option("--filter-scale", summary_scale, "Width multiplier (rational)");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference audit of backward passes");
    std::string gc_op, gc_perturb;
    std::uint64_t gc_seed = 0;
    gradcheck->add_option("--op", gc_op, "Only ops whose name contains this");
    gradcheck->add_option("--seed", gc_seed, "Base seed");
    gradcheck->add_option("--perturb-op", gc_perturb, "Corrupt this op's gradient (harness self-test)")
        ->group("");

    // train
    auto* train = app.add_subcommand("train", "Train on the manifest's train split");
    RunConfig run;
    std::string train_scale = "1/1";
    train->add_option("--manifest", run.manifest_path, "Manifest CSV")->required();
    train->add_option("--epochs", run.epochs, "Training epochs");
    train->add_option("--batch-size", run.batch_size, "Mini-batch size");
    train->add_option("--lr", run.learning_rate, "Adam learning rate");
    train->add_option("--seed", run.seed, "Run seed");
    train->add_option("--out", run.weights_out, "Weights output path");
    train->add_option("--metrics", run.metrics_out, "Metrics CSV output path");
    train->add_option("--filter-scale", train_scale, "Width multiplier (rational)");
    train->add_option("--precision", run.precision_bits, "32 or 64")
        ->check(CLI::IsMember({32, 64}));
    train->add_flag("--deterministic", run.deterministic,
                    "Single-threaded, byte-stable reruns");
    train->add_flag("--eval-each-epoch", run.eval_each_epoch,
                    "Also evaluate the test split every epoch");
    train->add_option("--val-fraction", run.val_fraction,
                      "Carve a validation share out of the train split");
    train->add_flag("--resize", run.resize, "Bilinearly resize off-size images");
    train->add_flag("--checkpoint", run.checkpoint,
                    "Include optimizer state in the weights file");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate weights on a manifest split");
    std::string eval_weights, eval_manifest, eval_split = "test";
    std::string eval_scale = "1/1", eval_metrics = "eval_metrics.csv";
    std::string eval_confusion = "confusion.csv";
    std::size_t eval_batch = 32;
    bool eval_det = false, eval_resize = false;
    int eval_precision = 0;
    eval->add_option("--weights", eval_weights, "Weights file")->required();
    eval->add_option("--manifest", eval_manifest, "Manifest CSV")->required();
    eval->add_option("--split", eval_split, "train, val or test")
        ->check(CLI::IsMember({"train", "val", "test"}));
    eval->add_option("--filter-scale", eval_scale, "Width multiplier used at training time");
    eval->add_option("--batch-size", eval_batch, "Mini-batch size");
    eval->add_option("--metrics", eval_metrics, "Metrics CSV output path");
    eval->add_option("--confusion", eval_confusion, "Confusion matrix CSV output path");
    eval->add_option("--precision", eval_precision, "Override precision (default: from file)")
        ->check(CLI::IsMember({32, 64}));
    eval->add_flag("--deterministic", eval_det, "Single-threaded");
    eval->add_flag("--resize", eval_resize, "Bilinearly resize off-size images");

    // predict
    auto* predict = app.add_subcommand("predict", "Classify one image");
    std::string pred_weights, pred_image;
    bool pred_resize = false;
    predict->add_option("--weights", pred_weights, "Weights file")->required();
    predict->add_option("--image", pred_image, "PNG or JPEG image")->required();
    predict->add_flag("--resize", pred_resize, "Bilinearly resize off-size images");

    CLI11_PARSE(app, argc, argv);

    try {
        if (split->parsed()) {
            if (split_fraction <= 0.0 || split_fraction >= 1.0) {
                throw ConfigError("fraction must be in (0,1)");
            }
            return cmd_split(split_data, split_fraction, split_seed, split_out);
        }
        if (summary->parsed()) {
            return cmd_summary(Rational::parse(summary_scale));
        }
        if (gradcheck->parsed()) {
            return cmd_gradcheck(gc_op, gc_seed, gc_perturb);
        }
        if (train->parsed()) {
            run.filter_scale = Rational::parse(train_scale);
            return cmd_train(run);
        }
        if (eval->parsed()) {
            return cmd_eval(eval_weights, eval_manifest, eval_split, eval_scale, eval_batch,
                            eval_det, eval_resize, eval_metrics, eval_confusion,
                            eval_precision);
        }
        if (predict->parsed()) {
            return cmd_predict(pred_weights, pred_image, pred_resize);
        }
    } catch (const adnet::Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 1;
    }
    return 0;
}
