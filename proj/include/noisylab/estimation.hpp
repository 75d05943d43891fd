#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noisylab/model.hpp"
#include "noisylab/tensor.hpp"
#include "noisylab/transition.hpp"

namespace noisylab {

struct EstimationReport {
    TransitionMatrix estimated;
    std::vector<std::size_t> per_class_counts;  // samples per observed noisy class
    std::optional<double> mse_vs_truth;
    double condition_number = 0.0;

    /// Matrix CSV plus a one-line summary (mse, condition number, counts).
    std::string summary_line() const;
    void save_csv(const std::string& path) const;
};

/// Maps an image batch (n, H, W, C) to class probabilities (n, C).
using BatchPredictor = std::function<Tensor(const Tensor&)>;

/// Estimates the transition matrix from a probabilistic classifier and
/// noisy-labeled data: column j of the raw estimate is the mean predicted
/// probability vector over S_j = {x : noisy label = j}, i.e.
/// M[i][j] = (1/|S_j|) sum_{x in S_j} P(class = i | x); rows are then
/// renormalized to make the estimate row-stochastic in the forward
/// orientation. The estimate matches the true matrix when the classifier
/// approximates the clean class posterior, priors are uniform, and the true
/// matrix is doubly stochastic (as the published 3-class matrices are).
///
/// Every class must appear among the noisy labels; the error names the first
/// missing one. Inference runs in fixed-size batches in index order, so the
/// result is deterministic for a given predictor and data.
EstimationReport estimate_transition(const BatchPredictor& predict, const Tensor& images,
                                     std::span<const std::uint8_t> noisy_labels,
                                     std::size_t n_classes, std::size_t batch_size = 256);

/// Convenience overload running the model in inference mode (no dropout).
EstimationReport estimate_transition(const Model& model, const Tensor& images,
                                     std::span<const std::uint8_t> noisy_labels);

/// Mean squared difference over all entries. Works on raw matrices (not
/// validated TransitionMatrix values) because published estimates need not be
/// row-stochastic. Dimension mismatch throws.
double mse(const Tensor& a, const Tensor& b);
double mse(const TransitionMatrix& a, const TransitionMatrix& b);

}  // namespace noisylab
