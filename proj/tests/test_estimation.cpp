#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "noisylab/dataset.hpp"
#include "noisylab/estimation.hpp"
#include "noisylab/rng.hpp"
#include "oracles.hpp"

using namespace noisylab;

namespace {

Tensor from_rows3(const double (&rows)[3][3]) {
    Tensor t({3, 3});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) t.at(i, j) = rows[i][j];
    return t;
}

}  // namespace

TEST_CASE("mse reproduces the published estimator scores exactly") {
    const Tensor true05 = from_rows3({{0.5, 0.2, 0.3}, {0.3, 0.5, 0.2}, {0.2, 0.3, 0.5}});
    const Tensor est05 = from_rows3({{0.50795323, 0.20026277, 0.3369517},
                                     {0.29097453, 0.51545948, 0.24141385},
                                     {0.20107204, 0.28427809, 0.42163846}});
    CHECK(std::abs(mse(true05, est05) - 0.001094796813976767) < 1e-12);

    const Tensor true06 = from_rows3({{0.4, 0.3, 0.3}, {0.3, 0.4, 0.3}, {0.3, 0.3, 0.4}});
    const Tensor est06 = from_rows3({{0.36052278, 0.29172212, 0.30938146},
                                     {0.30907449, 0.38835666, 0.29762521},
                                     {0.33040264, 0.31992134, 0.39299306}});
    CHECK(std::abs(mse(true06, est06) - 0.00036764631834922286) < 1e-12);
}

TEST_CASE("mse is symmetric, non-negative, zero iff equal") {
    Rng rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        Tensor a({3, 3}), b({3, 3});
        for (double& v : a.values()) v = rng.next_double();
        for (double& v : b.values()) v = rng.next_double();
        CHECK(mse(a, b) == mse(b, a));
        CHECK(mse(a, b) >= 0.0);
        CHECK(mse(a, a) == 0.0);
        if (a != b) CHECK(mse(a, b) > 0.0);
    }
    CHECK_THROWS_AS(mse(Tensor({2, 2}), Tensor({3, 3})), std::invalid_argument);
}

TEST_CASE("a predictor emitting the noisy label one-hot estimates the identity") {
    Rng rng(42);
    const std::size_t n = 300;
    Tensor images({n, 4, 4, 1});
    for (double& v : images.values()) v = rng.next_double();
    std::vector<std::uint8_t> labels(n);
    for (auto& y : labels) y = static_cast<std::uint8_t>(rng.next_below(3));

    // the predictor peeks at the labels through the batch index
    std::size_t cursor = 0;
    const BatchPredictor predictor = [&](const Tensor& batch) {
        Tensor probs({batch.dim(0), 3});
        for (std::size_t i = 0; i < batch.dim(0); ++i) probs.at(i, labels[cursor + i]) = 1.0;
        cursor += batch.dim(0);
        return probs;
    };
    const EstimationReport report = estimate_transition(predictor, images, labels, 3, 64);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(report.estimated.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
    CHECK(report.per_class_counts[0] + report.per_class_counts[1] + report.per_class_counts[2] == n);
}

TEST_CASE("estimation requires every class to be observed") {
    Tensor images({4, 4, 4, 1});
    const std::vector<std::uint8_t> labels = {0, 1, 0, 1};  // class 2 missing
    const BatchPredictor uniform = [](const Tensor& batch) {
        Tensor probs({batch.dim(0), 3});
        for (double& v : probs.values()) v = 1.0 / 3.0;
        return probs;
    };
    CHECK_THROWS_WITH_AS(estimate_transition(uniform, images, labels, 3),
                         doctest::Contains("class 2"), std::invalid_argument);
}

TEST_CASE("estimates are row-stochastic for any predictor") {
    Rng rng(43);
    Tensor images({100, 4, 4, 1});
    for (double& v : images.values()) v = rng.next_double();
    std::vector<std::uint8_t> labels(100);
    for (std::size_t i = 0; i < 100; ++i) labels[i] = static_cast<std::uint8_t>(i % 4);

    Rng pred_rng(44);
    const BatchPredictor noisy_predictor = [&pred_rng](const Tensor& batch) {
        Tensor logits({batch.dim(0), 4});
        for (double& v : logits.values()) v = pred_rng.uniform(-2.0, 2.0);
        Tensor probs({batch.dim(0), 4});
        for (std::size_t i = 0; i < batch.dim(0); ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 4; ++j) sum += std::exp(logits.at(i, j));
            for (std::size_t j = 0; j < 4; ++j) probs.at(i, j) = std::exp(logits.at(i, j)) / sum;
        }
        return probs;
    };
    const EstimationReport report = estimate_transition(noisy_predictor, images, labels, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 4; ++j) sum += report.estimated.at(i, j);
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

// Bayes-posterior oracle: with Gaussian pixel noise around class templates,
// the clean posterior is softmax of -||x - t_k||^2 / (2 sigma^2). Feeding it
// to the estimator over noisy-labeled data must recover the injected matrix
// (uniform priors, doubly stochastic T).
TEST_CASE("estimator recovers fashion05 from the Bayes posterior oracle") {
    SyntheticSpec spec;
    spec.samples_per_class = 5000;
    const LabeledDataset clean = generate_synthetic(spec, 45);
    const TransitionMatrix truth = TransitionMatrix::known_matrix("fashion05");
    const auto [noisy, record] = inject_noise(clean.labels, truth, 46);

    std::vector<Tensor> templates;
    for (std::size_t k = 0; k < 3; ++k) templates.push_back(class_template(spec, k));
    const double inv_two_sigma_sq = 1.0 / (2.0 * spec.pixel_noise_sigma * spec.pixel_noise_sigma);

    const BatchPredictor bayes = [&](const Tensor& batch) {
        const std::size_t m = batch.dim(0);
        const std::size_t pixels = batch.size() / m;
        Tensor probs({m, 3});
        for (std::size_t i = 0; i < m; ++i) {
            double scores[3];
            for (std::size_t k = 0; k < 3; ++k) {
                double d = 0.0;
                const double* x = batch.data() + i * pixels;
                const double* t = templates[k].data();
                for (std::size_t p = 0; p < pixels; ++p) {
                    const double diff = x[p] - t[p];
                    d += diff * diff;
                }
                scores[k] = -d * inv_two_sigma_sq;
            }
            const double m0 = std::max({scores[0], scores[1], scores[2]});
            double sum = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                scores[k] = std::exp(scores[k] - m0);
                sum += scores[k];
            }
            for (std::size_t k = 0; k < 3; ++k) probs.at(i, k) = scores[k] / sum;
        }
        return probs;
    };

    const EstimationReport report = estimate_transition(bayes, clean.images, noisy, 3);
    CHECK(*&report.condition_number > 0.0);
    CHECK(mse(truth.entries(), report.estimated.entries()) < 0.005);

    // determinism: the same inputs give the same estimate
    const EstimationReport again = estimate_transition(bayes, clean.images, noisy, 3);
    CHECK(again.estimated == report.estimated);
}
