#include "wbc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "wbc/errors.hpp"

namespace wbc::metrics {

long ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0L);
}

long ConfusionMatrix::support(int truth) const {
    long sum = 0;
    for (int j = 0; j < num_classes; ++j) sum += at(truth, j);
    return sum;
}

ConfusionMatrix::ClassCounts ConfusionMatrix::class_counts(int cls) const {
    ClassCounts c;
    const long all = total();
    c.tp = at(cls, cls);
    c.fn = support(cls) - c.tp;
    for (int i = 0; i < num_classes; ++i) c.fp += at(i, cls);
    c.fp -= c.tp;
    c.tn = all - c.tp - c.fp - c.fn;
    return c;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted,
                                 int num_classes) {
    if (truth.size() != predicted.size()) {
        throw ShapeError("confusion_matrix: " + std::to_string(truth.size()) + " truth labels vs " +
                         std::to_string(predicted.size()) + " predictions");
    }
    if (num_classes <= 0) throw std::invalid_argument("confusion_matrix: non-positive class count");
    ConfusionMatrix cm(num_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = predicted[i];
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
            throw std::out_of_range("confusion_matrix: label pair (" + std::to_string(t) + ", " +
                                    std::to_string(p) + ") outside [0, " + std::to_string(num_classes) +
                                    ") at sample " + std::to_string(i));
        }
        ++cm.at(t, p);
    }
    return cm;
}

std::vector<double> normalize_confusion(const ConfusionMatrix& cm, std::vector<bool>* zero_rows) {
    const int k = cm.num_classes;
    std::vector<double> out(static_cast<std::size_t>(k) * k, 0.0);
    if (zero_rows) zero_rows->assign(static_cast<std::size_t>(k), false);
    for (int i = 0; i < k; ++i) {
        const long s = cm.support(i);
        if (s == 0) {
            if (zero_rows) (*zero_rows)[static_cast<std::size_t>(i)] = true;
            continue;
        }
        for (int j = 0; j < k; ++j) {
            out[static_cast<std::size_t>(i) * k + j] = static_cast<double>(cm.at(i, j)) / static_cast<double>(s);
        }
    }
    return out;
}

namespace {

double safe_ratio(long num, long den, bool* degenerate) {
    if (den == 0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

struct MeanStd {
    double mean = 0, stddev = 0;
};

MeanStd population_stats(const std::vector<double>& xs) {
    MeanStd ms;
    if (xs.empty()) return ms;
    const double n = static_cast<double>(xs.size());
    for (double x : xs) ms.mean += x;
    ms.mean /= n;
    double var = 0;
    for (double x : xs) var += (x - ms.mean) * (x - ms.mean);
    ms.stddev = std::sqrt(var / n);
    return ms;
}

}  // namespace

PerClassReport per_class_report(const ConfusionMatrix& cm) {
    PerClassReport report;
    std::vector<double> precisions, recalls, f1s, specificities, supports;
    for (int c = 0; c < cm.num_classes; ++c) {
        const auto cc = cm.class_counts(c);
        PerClassReport::Row row;
        row.support = cc.tp + cc.fn;
        row.precision = safe_ratio(cc.tp, cc.tp + cc.fp, &row.degenerate);
        row.recall = safe_ratio(cc.tp, cc.tp + cc.fn, &row.degenerate);
        // f1 via its counting form: TP / (TP + (FP + FN)/2). Equal to the
        // harmonic mean of precision and recall when both are defined.
        const double f1_den = static_cast<double>(cc.tp) + 0.5 * static_cast<double>(cc.fp + cc.fn);
        if (f1_den == 0.0) {
            row.degenerate = true;
            row.f1 = 0.0;
        } else {
            row.f1 = static_cast<double>(cc.tp) / f1_den;
        }
        row.specificity = safe_ratio(cc.tn, cc.tn + cc.fp, &row.degenerate);
        precisions.push_back(row.precision);
        recalls.push_back(row.recall);
        f1s.push_back(row.f1);
        specificities.push_back(row.specificity);
        supports.push_back(static_cast<double>(row.support));
        report.rows.push_back(row);
    }
    const auto p = population_stats(precisions);
    const auto r = population_stats(recalls);
    const auto f = population_stats(f1s);
    const auto s = population_stats(specificities);
    const auto sup = population_stats(supports);
    report.av_precision = p.mean;
    report.av_recall = r.mean;
    report.av_f1 = f.mean;
    report.av_specificity = s.mean;
    report.av_support = sup.mean;
    report.std_precision = p.stddev;
    report.std_recall = r.stddev;
    report.std_f1 = f.stddev;
    report.std_specificity = s.stddev;
    return report;
}

double overall_accuracy(const ConfusionMatrix& cm) {
    const long all = cm.total();
    if (all == 0) return 0.0;
    long diag = 0;
    for (int i = 0; i < cm.num_classes; ++i) diag += cm.at(i, i);
    return static_cast<double>(diag) / static_cast<double>(all);
}

WeightedAverages weighted_averages(const ConfusionMatrix& cm) {
    WeightedAverages wa;
    const long all = cm.total();
    if (all == 0) return wa;
    const auto report = per_class_report(cm);
    for (int c = 0; c < cm.num_classes; ++c) {
        const double w = static_cast<double>(report.rows[static_cast<std::size_t>(c)].support) /
                         static_cast<double>(all);
        wa.precision += w * report.rows[static_cast<std::size_t>(c)].precision;
        wa.recall += w * report.rows[static_cast<std::size_t>(c)].recall;
        wa.f1 += w * report.rows[static_cast<std::size_t>(c)].f1;
    }
    return wa;
}

double balanced_rate(const ConfusionMatrix& cm, int cls) {
    if (cls < 0 || cls >= cm.num_classes) throw std::out_of_range("balanced_rate: class out of range");
    const auto cc = cm.class_counts(cls);
    bool degenerate = false;
    const double tpr = safe_ratio(cc.tp, cc.tp + cc.fn, &degenerate);
    const double tnr = safe_ratio(cc.tn, cc.tn + cc.fp, &degenerate);
    return 0.5 * (tpr + tnr);
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& truth, int cls) {
    if (scores.size() != truth.size()) throw ShapeError("roc_curve: scores/labels length mismatch");
    if (scores.empty()) throw std::invalid_argument("roc_curve: empty input");

    long positives = 0, negatives = 0;
    for (int t : truth) (t == cls ? positives : negatives)++;
    if (positives == 0 || negatives == 0) {
        throw std::invalid_argument("roc_curve: class " + std::to_string(cls) +
                                    " needs at least one positive and one negative sample");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.cls = cls;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});

    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        // Consume the whole tie group: one ROC point per distinct score.
        while (i < order.size() && scores[order[i]] == threshold) {
            (truth[order[i]] == cls ? tp : fp)++;
            ++i;
        }
        curve.points.push_back({threshold,
                                static_cast<double>(fp) / static_cast<double>(negatives),
                                static_cast<double>(tp) / static_cast<double>(positives)});
    }

    double auc = 0.0;
    for (std::size_t p = 1; p < curve.points.size(); ++p) {
        const auto& a = curve.points[p - 1];
        const auto& b = curve.points[p];
        auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    curve.auc = auc;
    return curve;
}

std::string confusion_to_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
    if (static_cast<int>(class_names.size()) != cm.num_classes) {
        throw ShapeError("confusion_to_csv: name count does not match matrix size");
    }
    std::ostringstream out;
    out << "truth\\predicted";
    for (const auto& name : class_names) out << ',' << name;
    out << '\n';
    for (int i = 0; i < cm.num_classes; ++i) {
        out << class_names[static_cast<std::size_t>(i)];
        for (int j = 0; j < cm.num_classes; ++j) out << ',' << cm.at(i, j);
        out << '\n';
    }
    return out.str();
}

ConfusionMatrix confusion_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw DataFormatError("confusion_from_csv: empty input");
    const int k = static_cast<int>(std::count(line.begin(), line.end(), ','));
    ConfusionMatrix cm(k);
    int row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (row >= k) throw DataFormatError("confusion_from_csv: too many rows");
        std::istringstream cells(line);
        std::string cell;
        std::getline(cells, cell, ',');  // row label
        for (int j = 0; j < k; ++j) {
            if (!std::getline(cells, cell, ',')) throw DataFormatError("confusion_from_csv: short row");
            cm.at(row, j) = std::stol(cell);
        }
        ++row;
    }
    if (row != k) throw DataFormatError("confusion_from_csv: expected " + std::to_string(k) + " rows");
    return cm;
}

}  // namespace wbc::metrics
