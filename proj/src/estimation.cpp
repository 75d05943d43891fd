#include "noisylab/estimation.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "noisylab/linalg.hpp"

namespace noisylab {

std::string EstimationReport::summary_line() const {
    std::ostringstream os;
    os.precision(12);
    os << "mse=";
    if (mse_vs_truth) {
        os << *mse_vs_truth;
    } else {
        os << "n/a";
    }
    os << " cond=" << condition_number << " counts=";
    for (std::size_t i = 0; i < per_class_counts.size(); ++i) {
        if (i) os << '/';
        os << per_class_counts[i];
    }
    return os.str();
}

void EstimationReport::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("EstimationReport: cannot write " + path);
    out << estimated.to_csv();
    out << "# " << summary_line() << '\n';
}

EstimationReport estimate_transition(const BatchPredictor& predict, const Tensor& images,
                                     std::span<const std::uint8_t> noisy_labels,
                                     std::size_t n_classes, std::size_t batch_size) {
    if (images.rank() != 4) {
        throw std::invalid_argument("estimate_transition: images must be (n, H, W, C), got " +
                                    images.shape_str());
    }
    const std::size_t n = images.dim(0);
    if (n != noisy_labels.size()) {
        throw std::invalid_argument("estimate_transition: " + std::to_string(n) + " images vs " +
                                    std::to_string(noisy_labels.size()) + " labels");
    }

    std::vector<std::size_t> counts(n_classes, 0);
    for (std::uint8_t y : noisy_labels) {
        if (y >= n_classes) {
            throw std::invalid_argument("estimate_transition: label " + std::to_string(y) +
                                        " out of range");
        }
        ++counts[y];
    }
    for (std::size_t j = 0; j < n_classes; ++j) {
        if (counts[j] == 0) {
            throw std::invalid_argument("estimate_transition: no samples observed with noisy class " +
                                        std::to_string(j));
        }
    }

    // Column j accumulates predicted probability vectors of S_j; accumulation
    // runs in index order for bit-reproducibility.
    Tensor sums({n_classes, n_classes});
    const std::size_t pixels = images.size() / n;
    for (std::size_t begin = 0; begin < n; begin += batch_size) {
        const std::size_t m = std::min(batch_size, n - begin);
        Tensor chunk({m, images.dim(1), images.dim(2), images.dim(3)});
        std::copy_n(images.data() + begin * pixels, m * pixels, chunk.data());
        const Tensor probs = predict(chunk);
        if (probs.rank() != 2 || probs.rows() != m || probs.cols() != n_classes) {
            throw std::invalid_argument("estimate_transition: predictor returned " + probs.shape_str());
        }
        for (std::size_t i = 0; i < m; ++i) {
            const std::uint8_t j = noisy_labels[begin + i];
            for (std::size_t k = 0; k < n_classes; ++k) {
                sums.at(k, j) += probs.at(i, k);
            }
        }
    }

    // Mean over each set, then renormalize rows into a stochastic matrix.
    Tensor raw({n_classes, n_classes});
    for (std::size_t i = 0; i < n_classes; ++i) {
        for (std::size_t j = 0; j < n_classes; ++j) {
            raw.at(i, j) = sums.at(i, j) / static_cast<double>(counts[j]);
        }
    }
    for (std::size_t i = 0; i < n_classes; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < n_classes; ++j) row_sum += raw.at(i, j);
        if (row_sum <= 0.0) {
            throw std::runtime_error("estimate_transition: degenerate all-zero row " + std::to_string(i));
        }
        for (std::size_t j = 0; j < n_classes; ++j) raw.at(i, j) /= row_sum;
    }

    EstimationReport report{TransitionMatrix::from_rows(raw), std::move(counts), std::nullopt,
                            linalg::condition_number_1(raw)};
    return report;
}

EstimationReport estimate_transition(const Model& model, const Tensor& images,
                                     std::span<const std::uint8_t> noisy_labels) {
    return estimate_transition(
        [&model](const Tensor& batch) { return model.predict_proba(batch); }, images, noisy_labels,
        model.n_classes());
}

double mse(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("mse: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    if (a.size() == 0) throw std::invalid_argument("mse: empty tensors");
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        total += d * d;
    }
    return total / static_cast<double>(a.size());
}

double mse(const TransitionMatrix& a, const TransitionMatrix& b) {
    return mse(a.entries(), b.entries());
}

}  // namespace noisylab
