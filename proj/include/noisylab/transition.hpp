#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noisylab/tensor.hpp"

namespace noisylab {

/// Row-stochastic matrix of label flip probabilities:
/// at(i, j) = P(noisy label = j | true label = i).
///
/// Immutable after construction and safe for concurrent reads. Rows whose
/// sums deviate from 1 by at most 1e-6 are renormalized on construction
/// (tolerates decimal truncation in user input); larger deviations are
/// rejected. After construction every row sums to 1 within 1e-9.
class TransitionMatrix {
public:
    /// Validates and renormalizes a square probability matrix.
    /// Throws std::invalid_argument on dimension mismatch, entries outside
    /// [0, 1], or row sums off by more than 1e-6.
    static TransitionMatrix from_rows(const Tensor& rows);
    static TransitionMatrix from_rows(const std::vector<std::vector<double>>& rows);
    static TransitionMatrix from_rows(std::initializer_list<std::vector<double>> rows) {
        return from_rows(std::vector<std::vector<double>>(rows));
    }

    /// Ground-truth matrices published for the two 3-class fashion datasets.
    /// Accepts "fashion05" or "fashion06"; anything else (e.g. "cifar", which
    /// has no published matrix) throws.
    static TransitionMatrix known_matrix(const std::string& name);

    /// Symmetric noise: diagonal 1 - rho, off-diagonal rho / (n_classes - 1).
    static TransitionMatrix symmetric(std::size_t n_classes, double rho);

    static TransitionMatrix identity(std::size_t n_classes);

    std::size_t n_classes() const { return entries_.rows(); }
    double at(std::size_t i, std::size_t j) const { return entries_.at(i, j); }
    const Tensor& entries() const { return entries_; }

    /// Per-class off-diagonal mass, component i = 1 - at(i, i).
    /// For two classes this is (rho_{+1}, rho_{-1}).
    std::vector<double> flip_rates() const;

    // Plain-text CSV: one row per line, comma-separated decimals, no header.
    std::string to_csv() const;
    static TransitionMatrix parse_csv(const std::string& text);
    void save_csv(const std::string& path) const;
    static TransitionMatrix load_csv(const std::string& path);

    bool operator==(const TransitionMatrix& other) const = default;

private:
    explicit TransitionMatrix(Tensor entries) : entries_(std::move(entries)) {}
    Tensor entries_;
};

/// What a noise-injection pass actually did, for validation.
struct NoiseInjectionRecord {
    std::uint64_t seed = 0;
    std::size_t n_flipped = 0;
    /// Observed flip frequencies, rows indexed by true class. Rows of classes
    /// absent from the input are all zero.
    Tensor empirical_matrix;
};

/// Samples a noisy label for each input label from the categorical
/// distribution given by the label's row of T (inverse-CDF over a splitmix
/// stream derived from `seed`). Pure function of (labels, T, seed); identical
/// inputs give identical outputs on every platform.
std::pair<std::vector<std::uint8_t>, NoiseInjectionRecord> inject_noise(
    std::span<const std::uint8_t> labels, const TransitionMatrix& T, std::uint64_t seed);

}  // namespace noisylab
