#include "noisylab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "noisylab/detail/numfmt.hpp"

namespace noisylab {

std::size_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < n_classes; ++i) t += at(i, i);
    return t;
}

ConfusionMatrix confusion(std::span<const std::uint8_t> y_true,
                          std::span<const std::uint8_t> y_pred, std::size_t n_classes) {
    if (y_true.size() != y_pred.size()) {
        throw std::invalid_argument("confusion: length mismatch " + std::to_string(y_true.size()) +
                                    " vs " + std::to_string(y_pred.size()));
    }
    if (y_true.empty()) {
        throw std::invalid_argument("confusion: empty input");
    }
    ConfusionMatrix cm;
    cm.n_classes = n_classes;
    cm.counts.assign(n_classes * n_classes, 0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] >= n_classes || y_pred[i] >= n_classes) {
            throw std::invalid_argument("confusion: label out of range at index " + std::to_string(i));
        }
        ++cm.counts[y_true[i] * n_classes + y_pred[i]];
    }
    return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    if (cm.n_classes == 0 || total == 0) {
        throw std::invalid_argument("compute_metrics: empty confusion matrix");
    }

    MetricsReport r;
    r.cm = cm;
    r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
    r.top1_accuracy = r.accuracy;

    r.per_class_precision.resize(cm.n_classes);
    r.per_class_recall.resize(cm.n_classes);
    r.per_class_f1.resize(cm.n_classes);

    for (std::size_t k = 0; k < cm.n_classes; ++k) {
        std::size_t tp = cm.at(k, k);
        std::size_t fp = 0, fn = 0;
        for (std::size_t j = 0; j < cm.n_classes; ++j) {
            if (j == k) continue;
            fp += cm.at(j, k);
            fn += cm.at(k, j);
        }
        bool undefined = false;
        if (tp + fp > 0) {
            r.per_class_precision[k] = static_cast<double>(tp) / static_cast<double>(tp + fp);
        } else {
            undefined = true;
        }
        if (tp + fn > 0) {
            r.per_class_recall[k] = static_cast<double>(tp) / static_cast<double>(tp + fn);
        } else {
            undefined = true;
        }
        if (r.per_class_precision[k] && r.per_class_recall[k]) {
            const double p = *r.per_class_precision[k];
            const double rec = *r.per_class_recall[k];
            if (p + rec > 0.0) {
                r.per_class_f1[k] = 2.0 * p * rec / (p + rec);
            } else {
                undefined = true;
            }
        }
        if (undefined) r.undefined_classes.push_back(k);
    }

    auto macro = [&](const std::vector<std::optional<double>>& per_class) -> std::optional<double> {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& v : per_class) {
            if (v) {
                sum += *v;
                ++n;
            }
        }
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
    };
    r.precision_macro = macro(r.per_class_precision);
    r.recall_macro = macro(r.per_class_recall);
    r.f1_macro = macro(r.per_class_f1);
    return r;
}

namespace {

AggregateStat aggregate_one(const std::vector<std::optional<double>>& values) {
    AggregateStat s;
    std::vector<double> defined;
    for (const auto& v : values) {
        if (v) defined.push_back(*v);
    }
    s.n_defined = defined.size();
    s.n_excluded = values.size() - defined.size();
    if (defined.empty()) return s;

    const double mean = std::accumulate(defined.begin(), defined.end(), 0.0) /
                        static_cast<double>(defined.size());
    s.mean = mean;
    if (defined.size() >= 2) {
        double ss = 0.0;
        for (double v : defined) ss += (v - mean) * (v - mean);
        s.stddev = std::sqrt(ss / static_cast<double>(defined.size() - 1));
    }
    return s;
}

}  // namespace

AggregateReport aggregate(const std::vector<MetricsReport>& reports) {
    if (reports.size() < 2) {
        throw std::invalid_argument("aggregate: need at least 2 reports, got " +
                                    std::to_string(reports.size()));
    }
    AggregateReport agg;
    agg.n_runs = reports.size();

    auto collect = [&](auto getter) {
        std::vector<std::optional<double>> vals;
        vals.reserve(reports.size());
        for (const auto& r : reports) vals.push_back(getter(r));
        return aggregate_one(vals);
    };
    agg.accuracy = collect([](const MetricsReport& r) { return std::optional<double>(r.accuracy); });
    agg.top1_accuracy = collect([](const MetricsReport& r) { return std::optional<double>(r.top1_accuracy); });
    agg.precision_macro = collect([](const MetricsReport& r) { return r.precision_macro; });
    agg.recall_macro = collect([](const MetricsReport& r) { return r.recall_macro; });
    agg.f1_macro = collect([](const MetricsReport& r) { return r.f1_macro; });
    return agg;
}

double growth_rate(double baseline, double improved) {
    if (!(baseline > 0.0)) {
        throw std::invalid_argument("growth_rate: baseline must be positive");
    }
    return (improved - baseline) / baseline * 100.0;
}

namespace {

std::string opt_str(const std::optional<double>& v) {
    if (!v) return "nan";
    return detail::format_double(*v);
}

}  // namespace

std::string aggregate_to_csv(const AggregateReport& report, const std::string& method) {
    std::ostringstream os;
    auto row = [&](const char* name, const AggregateStat& s) {
        os << method << ',' << name << ',' << opt_str(s.mean) << ',' << opt_str(s.stddev) << ','
           << s.n_defined << ',' << s.n_excluded << '\n';
    };
    row("accuracy", report.accuracy);
    row("top1_accuracy", report.top1_accuracy);
    row("precision", report.precision_macro);
    row("recall", report.recall_macro);
    row("f1", report.f1_macro);
    return os.str();
}

std::string metrics_to_csv(const MetricsReport& report) {
    std::ostringstream os;
    os << "accuracy," << detail::format_double(report.accuracy) << '\n';
    os << "top1_accuracy," << detail::format_double(report.top1_accuracy) << '\n';
    os << "precision," << opt_str(report.precision_macro) << '\n';
    os << "recall," << opt_str(report.recall_macro) << '\n';
    os << "f1," << opt_str(report.f1_macro) << '\n';
    return os.str();
}

}  // namespace noisylab
