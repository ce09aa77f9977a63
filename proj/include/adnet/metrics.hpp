#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "adnet/tensor.hpp"

namespace adnet {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::vector<std::vector<std::size_t>> counts;
    std::vector<std::string> class_names;

    std::size_t k() const { return counts.size(); }
    std::size_t total() const;
    std::size_t trace() const;
};

ConfusionMatrix confusion(const std::vector<int>& true_labels,
                          const std::vector<int>& predicted_labels, std::size_t k,
                          std::vector<std::string> class_names = {});

// Zero-denominator precision/recall stay unset rather than being coerced.
struct PrecisionRecall {
    double accuracy = 0.0;
    std::vector<std::optional<double>> precision;
    std::vector<std::optional<double>> recall;
};

PrecisionRecall accuracy_precision_recall(const ConfusionMatrix& cm);

// One-vs-rest AUC per class (rank form, ties get half credit), averaged
// unweighted over the classes that appear in true_labels.
struct AucResult {
    std::vector<std::optional<double>> per_class;
    std::optional<double> macro;
    bool has_undefined_class = false;
};

template <typename T>
AucResult macro_auc(const Tensor<T>& scores, const std::vector<int>& true_labels);

struct MetricsReport {
    double mean_loss = 0.0;
    PrecisionRecall pr;
    AucResult auc;
};

// metrics.csv: epoch, split, loss, accuracy, per-class precision and recall,
// macro AUC. Undefined values serialize as "NA".
void write_metrics_header(std::ostream& os, const std::vector<std::string>& class_names);
void write_metrics_row(std::ostream& os, std::size_t epoch, const std::string& split,
                       const MetricsReport& report);

// k x k counts with a leading header row/column of class names.
void write_confusion_csv(std::ostream& os, const ConfusionMatrix& cm);

std::string format_metric(const std::optional<double>& value);

} // namespace adnet
