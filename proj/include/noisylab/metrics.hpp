#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace noisylab {

/// counts[actual][predicted], one-vs-rest TP/FP/FN derive from it.
struct ConfusionMatrix {
    std::size_t n_classes = 0;
    std::vector<std::size_t> counts;  // row-major C x C

    std::size_t at(std::size_t actual, std::size_t predicted) const {
        return counts[actual * n_classes + predicted];
    }
    std::size_t total() const;
    std::size_t trace() const;
};

ConfusionMatrix confusion(std::span<const std::uint8_t> y_true,
                          std::span<const std::uint8_t> y_pred, std::size_t n_classes);

/// Accuracy and top-1 accuracy are the same quantity for single-label argmax
/// prediction (both trace/total); the report carries both fields because the
/// tables downstream print both columns. Per-class precision is undefined when
/// a class is never predicted (TP+FP = 0) and recall when a class never occurs
/// (TP+FN = 0); undefined values are excluded from the macro means and the
/// affected classes listed in undefined_classes.
struct MetricsReport {
    double accuracy = 0.0;
    double top1_accuracy = 0.0;
    std::optional<double> precision_macro;
    std::optional<double> recall_macro;
    std::optional<double> f1_macro;
    std::vector<std::optional<double>> per_class_precision;
    std::vector<std::optional<double>> per_class_recall;
    std::vector<std::optional<double>> per_class_f1;
    std::vector<std::size_t> undefined_classes;
    ConfusionMatrix cm;
};

MetricsReport compute_metrics(const ConfusionMatrix& cm);

/// Mean and sample (n-1) standard deviation of one metric across runs.
/// Undefined per-run values are excluded; n_excluded records how many.
struct AggregateStat {
    std::optional<double> mean;
    std::optional<double> stddev;  // needs >= 2 defined values
    std::size_t n_defined = 0;
    std::size_t n_excluded = 0;
};

struct AggregateReport {
    std::size_t n_runs = 0;
    AggregateStat accuracy;
    AggregateStat top1_accuracy;
    AggregateStat precision_macro;
    AggregateStat recall_macro;
    AggregateStat f1_macro;
};

/// Requires at least 2 reports.
AggregateReport aggregate(const std::vector<MetricsReport>& reports);

/// (improved - baseline) / baseline * 100. Baseline must be positive.
double growth_rate(double baseline, double improved);

/// One CSV row per metric: metric,mean,std,n_defined,n_excluded.
std::string aggregate_to_csv(const AggregateReport& report, const std::string& method);

std::string metrics_to_csv(const MetricsReport& report);

}  // namespace noisylab
