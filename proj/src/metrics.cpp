#include "adnet/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "adnet/errors.hpp"

namespace adnet {

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (const auto& row : counts) {
        for (std::size_t v : row) t += v;
    }
    return t;
}

std::size_t ConfusionMatrix::trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
    return t;
}

ConfusionMatrix confusion(const std::vector<int>& true_labels,
                          const std::vector<int>& predicted_labels, std::size_t k,
                          std::vector<std::string> class_names) {
    if (true_labels.size() != predicted_labels.size()) {
        throw DataError("confusion: " + std::to_string(true_labels.size()) + " true vs " +
                        std::to_string(predicted_labels.size()) + " predicted labels");
    }
    ConfusionMatrix cm;
    cm.counts.assign(k, std::vector<std::size_t>(k, 0));
    if (class_names.empty()) {
        for (std::size_t i = 0; i < k; ++i) {
            class_names.push_back("class" + std::to_string(i));
        }
    }
    if (class_names.size() != k) {
        throw DataError("confusion: class name table size != k");
    }
    cm.class_names = std::move(class_names);
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        const int t = true_labels[i], p = predicted_labels[i];
        if (t < 0 || static_cast<std::size_t>(t) >= k || p < 0 ||
            static_cast<std::size_t>(p) >= k) {
            throw DataError("confusion: label outside [0," + std::to_string(k) + ") at row " +
                            std::to_string(i));
        }
        ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    return cm;
}

PrecisionRecall accuracy_precision_recall(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    if (total == 0) {
        throw DataError("metrics need at least one sample");
    }
    PrecisionRecall pr;
    pr.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
    const std::size_t k = cm.k();
    pr.precision.resize(k);
    pr.recall.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t col = 0, row = 0;
        for (std::size_t i = 0; i < k; ++i) {
            col += cm.counts[i][j];
            row += cm.counts[j][i];
        }
        if (col > 0) {
            pr.precision[j] = static_cast<double>(cm.counts[j][j]) / static_cast<double>(col);
        }
        if (row > 0) {
            pr.recall[j] = static_cast<double>(cm.counts[j][j]) / static_cast<double>(row);
        }
    }
    return pr;
}

template <typename T>
AucResult macro_auc(const Tensor<T>& scores, const std::vector<int>& true_labels) {
    if (scores.rank() != 2) {
        throw DataError("macro_auc: scores must be [n,k]");
    }
    const std::size_t n = scores.extent(0), k = scores.extent(1);
    if (true_labels.size() != n) {
        throw DataError("macro_auc: label count != score rows");
    }
    for (int y : true_labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= k) {
            throw DataError("macro_auc: label outside [0," + std::to_string(k) + ")");
        }
    }

    AucResult result;
    result.per_class.resize(k);
    double sum = 0.0;
    std::size_t defined = 0;

    std::vector<std::pair<double, int>> items(n); // (score, is_positive)
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            items[i] = {static_cast<double>(scores[i * k + c]),
                        true_labels[i] == static_cast<int>(c) ? 1 : 0};
            pos += static_cast<std::size_t>(items[i].second);
        }
        const std::size_t neg = n - pos;
        if (pos == 0 || neg == 0) {
            result.has_undefined_class = true;
            continue;
        }
        std::sort(items.begin(), items.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        // Rank-sum with average ranks over tie groups (half credit for ties).
        double rank_sum_pos = 0.0;
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j < n && items[j].first == items[i].first) ++j;
            const double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // 1-based mean
            for (std::size_t t = i; t < j; ++t) {
                if (items[t].second) rank_sum_pos += avg_rank;
            }
            i = j;
        }
        const double p = static_cast<double>(pos);
        const double auc =
            (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
        result.per_class[c] = auc;
        sum += auc;
        ++defined;
    }
    if (defined > 0) {
        result.macro = sum / static_cast<double>(defined);
    }
    return result;
}

std::string format_metric(const std::optional<double>& value) {
    if (!value) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", *value);
    return buf;
}

void write_metrics_header(std::ostream& os, const std::vector<std::string>& class_names) {
    os << "epoch,split,loss,accuracy";
    for (const auto& name : class_names) os << ",precision_" << name;
    for (const auto& name : class_names) os << ",recall_" << name;
    os << ",macro_auc\n";
}

void write_metrics_row(std::ostream& os, std::size_t epoch, const std::string& split,
                       const MetricsReport& report) {
    os << epoch << "," << split << "," << format_metric(report.mean_loss) << ","
       << format_metric(report.pr.accuracy);
    for (const auto& p : report.pr.precision) os << "," << format_metric(p);
    for (const auto& r : report.pr.recall) os << "," << format_metric(r);
    os << "," << format_metric(report.auc.macro) << "\n";
}

void write_confusion_csv(std::ostream& os, const ConfusionMatrix& cm) {
    os << "true\\pred";
    for (const auto& name : cm.class_names) os << "," << name;
    os << "\n";
    for (std::size_t i = 0; i < cm.k(); ++i) {
        os << cm.class_names[i];
        for (std::size_t j = 0; j < cm.k(); ++j) os << "," << cm.counts[i][j];
        os << "\n";
    }
}

template AucResult macro_auc<float>(const Tensor<float>&, const std::vector<int>&);
template AucResult macro_auc<double>(const Tensor<double>&, const std::vector<int>&);

} // namespace adnet
