#pragma once

#include <string>
#include <vector>

namespace wbc::metrics {

/// K x K contingency table; rows are true classes, columns are predictions.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<long> counts;  // row-major, counts[i*K + j]

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int k) : num_classes(k), counts(static_cast<std::size_t>(k) * k, 0) {}

    long at(int truth, int predicted) const {
        return counts[static_cast<std::size_t>(truth) * num_classes + predicted];
    }
    long& at(int truth, int predicted) {
        return counts[static_cast<std::size_t>(truth) * num_classes + predicted];
    }
    long total() const;
    long support(int truth) const;  // row sum

    struct ClassCounts {
        long tp = 0, fp = 0, fn = 0, tn = 0;
    };
    ClassCounts class_counts(int cls) const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted,
                                 int num_classes);

/// Row-normalized matrix (each row sums to 1). Rows with zero support come
/// back all-zero and are reported through `zero_rows` when provided.
std::vector<double> normalize_confusion(const ConfusionMatrix& cm, std::vector<bool>* zero_rows = nullptr);

/// One-vs-rest metrics per class:
///   precision   TP / (TP + FP)
///   recall      TP / (TP + FN)
///   f1          TP / (TP + 0.5*(FP + FN))
///   specificity TN / (TN + FP)
/// A zero denominator yields 0 and sets the row's `degenerate` flag. The
/// summary carries the per-column mean (AV) and population standard
/// deviation (STD) across classes.
struct PerClassReport {
    struct Row {
        double precision = 0, recall = 0, f1 = 0, specificity = 0;
        long support = 0;
        bool degenerate = false;
    };
    std::vector<Row> rows;
    double av_precision = 0, av_recall = 0, av_f1 = 0, av_specificity = 0, av_support = 0;
    double std_precision = 0, std_recall = 0, std_f1 = 0, std_specificity = 0;
};

PerClassReport per_class_report(const ConfusionMatrix& cm);

double overall_accuracy(const ConfusionMatrix& cm);

/// Support-weighted averages: sum_i (support_i / total) * metric_i.
struct WeightedAverages {
    double precision = 0, recall = 0, f1 = 0;
};
WeightedAverages weighted_averages(const ConfusionMatrix& cm);

/// Mean of the one-vs-rest true-positive and true-negative rates,
/// (TPR + TNR) / 2, for a single class.
double balanced_rate(const ConfusionMatrix& cm, int cls);

/// One-vs-rest ROC for a class: thresholds sweep the distinct scores in
/// descending order (predict positive when score >= threshold), preceded by
/// a +infinity sentinel that contributes the (0, 0) corner. The final point
/// is always (1, 1). AUC is the trapezoidal area under the curve, which
/// equals the probability a positive outscores a negative with ties
/// counted 1/2.
struct RocPoint {
    double threshold = 0, fpr = 0, tpr = 0;
};
struct RocCurve {
    int cls = 0;
    std::vector<RocPoint> points;
    double auc = 0;
};
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& truth, int cls);

/// CSV codecs used by the report writers (and by tests to verify that
/// rendered reports round-trip without loss).
std::string confusion_to_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);
ConfusionMatrix confusion_from_csv(const std::string& csv);

}  // namespace wbc::metrics
