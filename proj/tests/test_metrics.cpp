#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "noisylab/metrics.hpp"
#include "noisylab/rng.hpp"

using namespace noisylab;

TEST_CASE("confusion counts actual x predicted") {
    const std::vector<std::uint8_t> y_true = {0, 0, 1};
    const std::vector<std::uint8_t> y_pred = {0, 1, 1};
    const ConfusionMatrix cm = confusion(y_true, y_pred, 2);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.at(1, 1) == 1);
    CHECK(cm.at(1, 0) == 0);
    CHECK(cm.total() == 3);

    CHECK_THROWS_AS(confusion(std::vector<std::uint8_t>{}, std::vector<std::uint8_t>{}, 2),
                    std::invalid_argument);
    CHECK_THROWS_AS(confusion(y_true, std::vector<std::uint8_t>{0}, 2), std::invalid_argument);
    CHECK_THROWS_AS(confusion(y_true, std::vector<std::uint8_t>{0, 1, 2}, 2), std::invalid_argument);
}

TEST_CASE("perfect predictions give all-ones metrics") {
    const std::vector<std::uint8_t> y = {0, 1, 2, 0, 1, 2};
    const MetricsReport r = compute_metrics(confusion(y, y, 3));
    CHECK(r.accuracy == 1.0);
    CHECK(r.top1_accuracy == 1.0);
    CHECK(*r.precision_macro == 1.0);
    CHECK(*r.recall_macro == 1.0);
    CHECK(*r.f1_macro == 1.0);
    CHECK(r.undefined_classes.empty());
}

TEST_CASE("binary TP=2 FP=1 FN=1 TN=6") {
    // class 1 is "positive": counts[1][1]=TP, counts[0][1]=FP, counts[1][0]=FN
    ConfusionMatrix cm;
    cm.n_classes = 2;
    cm.counts = {6, 1, 1, 2};
    const MetricsReport r = compute_metrics(cm);
    CHECK(*r.per_class_precision[1] == doctest::Approx(2.0 / 3.0));
    CHECK(*r.per_class_recall[1] == doctest::Approx(2.0 / 3.0));
    CHECK(*r.per_class_f1[1] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("a single-class predictor leaves the other precisions undefined") {
    // balanced 3-class truth, everything predicted as class 0
    const std::vector<std::uint8_t> y_true = {0, 0, 1, 1, 2, 2};
    const std::vector<std::uint8_t> y_pred(6, 0);
    const MetricsReport r = compute_metrics(confusion(y_true, y_pred, 3));
    CHECK(*r.per_class_recall[0] == 1.0);
    CHECK_FALSE(r.per_class_precision[1].has_value());
    CHECK_FALSE(r.per_class_precision[2].has_value());
    CHECK(r.undefined_classes == std::vector<std::size_t>{1, 2});
    // macro mean excludes the undefined classes rather than coercing to zero
    CHECK(*r.precision_macro == doctest::Approx(1.0 / 3.0));
}

// Criterion-style check: recompute per-class precision/recall/F1 with an
// independent one-vs-rest TP/FP/FN counting oracle on randomized matrices;
// values must agree exactly (identical integer arithmetic).
TEST_CASE("metrics match a per-class counting oracle on random confusions") {
    Rng rng(271);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t c = 2 + rng.next_below(5);
        ConfusionMatrix cm;
        cm.n_classes = c;
        cm.counts.resize(c * c);
        for (auto& v : cm.counts) v = rng.next_below(7);
        if (cm.total() == 0) cm.counts[0] = 1;
        const MetricsReport r = compute_metrics(cm);

        std::size_t correct = 0;
        for (std::size_t k = 0; k < c; ++k) correct += cm.at(k, k);
        CHECK(r.accuracy == static_cast<double>(correct) / static_cast<double>(cm.total()));

        for (std::size_t k = 0; k < c; ++k) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (std::size_t a = 0; a < c; ++a) {
                for (std::size_t p = 0; p < c; ++p) {
                    const std::size_t n = cm.at(a, p);
                    if (a == k && p == k) tp += n;
                    if (a != k && p == k) fp += n;
                    if (a == k && p != k) fn += n;
                }
            }
            if (tp + fp == 0) {
                CHECK_FALSE(r.per_class_precision[k].has_value());
            } else {
                CHECK(*r.per_class_precision[k] == static_cast<double>(tp) / static_cast<double>(tp + fp));
            }
            if (tp + fn == 0) {
                CHECK_FALSE(r.per_class_recall[k].has_value());
            } else {
                CHECK(*r.per_class_recall[k] == static_cast<double>(tp) / static_cast<double>(tp + fn));
            }
            if (r.per_class_precision[k] && r.per_class_recall[k]) {
                const double p = *r.per_class_precision[k];
                const double rec = *r.per_class_recall[k];
                if (p + rec > 0) {
                    CHECK(*r.per_class_f1[k] == 2.0 * p * rec / (p + rec));
                }
            }
        }
    }
}

TEST_CASE("F1 is the harmonic mean when defined") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        ConfusionMatrix cm;
        cm.n_classes = 3;
        cm.counts.resize(9);
        for (auto& v : cm.counts) v = 1 + rng.next_below(9);
        const MetricsReport r = compute_metrics(cm);
        for (std::size_t k = 0; k < 3; ++k) {
            REQUIRE(r.per_class_f1[k].has_value());
            const double p = *r.per_class_precision[k];
            const double rec = *r.per_class_recall[k];
            CHECK(*r.per_class_f1[k] == doctest::Approx(2.0 / (1.0 / p + 1.0 / rec)));
        }
    }
}

TEST_CASE("micro recall over exactly balanced classes equals accuracy") {
    Rng rng(123);
    for (int trial = 0; trial < 20; ++trial) {
        // build a balanced truth, arbitrary predictions
        std::vector<std::uint8_t> y_true, y_pred;
        for (std::uint8_t k = 0; k < 3; ++k) {
            for (int i = 0; i < 30; ++i) {
                y_true.push_back(k);
                y_pred.push_back(static_cast<std::uint8_t>(rng.next_below(3)));
            }
        }
        const MetricsReport r = compute_metrics(confusion(y_true, y_pred, 3));
        // balanced classes: unweighted mean of per-class recall = accuracy
        double mean_recall = 0.0;
        for (std::size_t k = 0; k < 3; ++k) mean_recall += *r.per_class_recall[k];
        mean_recall /= 3.0;
        CHECK(mean_recall == doctest::Approx(r.accuracy).epsilon(1e-12));
    }
}

TEST_CASE("aggregate computes mean and sample std") {
    ConfusionMatrix cm8;
    cm8.n_classes = 2;
    cm8.counts = {8, 2, 0, 0};  // accuracy 0.8
    ConfusionMatrix cm9;
    cm9.n_classes = 2;
    cm9.counts = {9, 1, 0, 0};  // accuracy 0.9
    const std::vector<MetricsReport> reports = {compute_metrics(cm8), compute_metrics(cm9)};
    const AggregateReport agg = aggregate(reports);
    CHECK(*agg.accuracy.mean == doctest::Approx(0.85));
    CHECK(*agg.accuracy.stddev == doctest::Approx(std::sqrt(0.005)));

    const std::vector<MetricsReport> same = {compute_metrics(cm8), compute_metrics(cm8)};
    CHECK(*aggregate(same).accuracy.stddev == 0.0);

    CHECK_THROWS_AS(aggregate({compute_metrics(cm8)}), std::invalid_argument);
}

TEST_CASE("aggregate excludes undefined values and counts them") {
    // one report where class-1 precision is undefined everywhere
    ConfusionMatrix defined;
    defined.n_classes = 2;
    defined.counts = {5, 1, 1, 5};
    ConfusionMatrix degenerate;
    degenerate.n_classes = 2;
    degenerate.counts = {6, 0, 6, 0};  // class 1 never predicted -> undefined precision, f1
    std::vector<MetricsReport> reports = {compute_metrics(defined), compute_metrics(defined),
                                          compute_metrics(degenerate)};
    const AggregateReport agg = aggregate(reports);
    CHECK(agg.accuracy.n_defined == 3);
    CHECK(agg.f1_macro.n_defined == 3);  // macro still defined (class 0 remains)
    CHECK(agg.f1_macro.n_excluded == 0);
}

TEST_CASE("growth_rate") {
    CHECK(growth_rate(0.835, 0.892) == doctest::Approx(6.8263473).epsilon(1e-6));
    CHECK(growth_rate(0.835, 0.892) > 6.72);
    CHECK(growth_rate(0.835, 0.892) < 6.92);
    CHECK(growth_rate(0.7, 0.7) == 0.0);
    CHECK(growth_rate(0.5, 0.6) == doctest::Approx(20.0));
    CHECK_THROWS_AS(growth_rate(0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(growth_rate(-1.0, 0.5), std::invalid_argument);
}

TEST_CASE("metric permutation invariance") {
    Rng rng(55);
    std::vector<std::uint8_t> y_true(60), y_pred(60);
    for (std::size_t i = 0; i < 60; ++i) {
        y_true[i] = static_cast<std::uint8_t>(rng.next_below(3));
        y_pred[i] = static_cast<std::uint8_t>(rng.next_below(3));
    }
    const MetricsReport before = compute_metrics(confusion(y_true, y_pred, 3));

    std::vector<std::size_t> order(60);
    for (std::size_t i = 0; i < 60; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<std::uint8_t> t2(60), p2(60);
    for (std::size_t i = 0; i < 60; ++i) {
        t2[i] = y_true[order[i]];
        p2[i] = y_pred[order[i]];
    }
    const MetricsReport after = compute_metrics(confusion(t2, p2, 3));
    CHECK(before.accuracy == after.accuracy);
    CHECK(*before.f1_macro == *after.f1_macro);
    CHECK(*before.precision_macro == *after.precision_macro);
}
