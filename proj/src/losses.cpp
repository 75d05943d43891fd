#include "noisylab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "noisylab/linalg.hpp"

namespace noisylab {

namespace {

constexpr double kProbFloor = 1e-12;

double clip_prob(double p) { return std::clamp(p, kProbFloor, 1.0); }

void check_batch(const Tensor& probs, std::span<const std::uint8_t> labels) {
    if (probs.rank() != 2) {
        throw std::invalid_argument("loss: expected (batch, C) probabilities, got " + probs.shape_str());
    }
    if (probs.rows() != labels.size()) {
        throw std::invalid_argument("loss: batch size " + std::to_string(probs.rows()) +
                                    " does not match " + std::to_string(labels.size()) + " labels");
    }
    const std::size_t n_classes = probs.cols();
    for (std::uint8_t y : labels) {
        if (y >= n_classes) {
            throw std::invalid_argument("loss: label " + std::to_string(y) + " out of range for " +
                                        std::to_string(n_classes) + " classes");
        }
    }
}

}  // namespace

std::string loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::cross_entropy: return "cross_entropy";
        case LossKind::nll: return "nll";
        case LossKind::reweighted: return "reweighted";
        case LossKind::backward: return "backward";
    }
    return "?";
}

LossKind loss_kind_from_name(const std::string& name) {
    if (name == "cross_entropy" || name == "ce") return LossKind::cross_entropy;
    if (name == "nll") return LossKind::nll;
    if (name == "reweighted") return LossKind::reweighted;
    if (name == "backward") return LossKind::backward;
    throw std::invalid_argument("unknown loss kind '" + name + "'");
}

void LossSpec::validate() const {
    if ((kind == LossKind::reweighted || kind == LossKind::backward) && !T) {
        throw std::invalid_argument("LossSpec: " + loss_kind_name(kind) + " requires a transition matrix");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("LossSpec: epsilon must be positive");
    if (!(mix_lambda >= 0.0 && mix_lambda < 1.0)) {
        throw std::invalid_argument("LossSpec: mix_lambda must be in [0, 1)");
    }
}

LossResult cross_entropy(const Tensor& probs, std::span<const std::uint8_t> labels) {
    check_batch(probs, labels);
    const std::size_t batch = probs.rows();
    const std::size_t n_classes = probs.cols();

    LossResult r;
    r.grad_logits = Tensor({batch, n_classes});
    const double inv_batch = 1.0 / static_cast<double>(batch);
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const std::uint8_t y = labels[i];
        total += -std::log(clip_prob(probs.at(i, y)));
        for (std::size_t k = 0; k < n_classes; ++k) {
            r.grad_logits.at(i, k) = (probs.at(i, k) - (k == y ? 1.0 : 0.0)) * inv_batch;
        }
    }
    r.value = total * inv_batch;
    return r;
}

LossResult nll(const Tensor& log_probs, std::span<const std::uint8_t> labels) {
    check_batch(log_probs, labels);
    const std::size_t batch = log_probs.rows();
    const std::size_t n_classes = log_probs.cols();
    const double log_floor = std::log(kProbFloor);

    LossResult r;
    r.grad_logits = Tensor({batch, n_classes});
    const double inv_batch = 1.0 / static_cast<double>(batch);
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const std::uint8_t y = labels[i];
        total += -std::max(log_probs.at(i, y), log_floor);
        for (std::size_t k = 0; k < n_classes; ++k) {
            const double p = std::exp(log_probs.at(i, k));
            r.grad_logits.at(i, k) = (p - (k == y ? 1.0 : 0.0)) * inv_batch;
        }
    }
    r.value = total * inv_batch;
    return r;
}

std::vector<double> beta_weight(const Tensor& probs, std::span<const std::uint8_t> noisy_labels,
                                const TransitionMatrix& T, double epsilon) {
    check_batch(probs, noisy_labels);
    const std::size_t n_classes = probs.cols();
    if (T.n_classes() != n_classes) {
        throw std::invalid_argument("beta_weight: T has " + std::to_string(T.n_classes()) +
                                    " classes, probabilities have " + std::to_string(n_classes));
    }

    std::vector<double> beta(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const std::uint8_t y = noisy_labels[i];
        // Noisy posterior at the observed label: sum_k p_k * T[k][y].
        double noisy_p = 0.0;
        for (std::size_t k = 0; k < n_classes; ++k) noisy_p += probs.at(i, k) * T.at(k, y);
        beta[i] = probs.at(i, y) / (noisy_p + epsilon);
    }
    return beta;
}

LossResult reweighted_ce(const Tensor& probs, std::span<const std::uint8_t> noisy_labels,
                         const TransitionMatrix& T, double epsilon) {
    std::vector<double> beta = beta_weight(probs, noisy_labels, T, epsilon);
    const std::size_t batch = probs.rows();
    const std::size_t n_classes = probs.cols();

    LossResult r;
    r.grad_logits = Tensor({batch, n_classes});
    const double inv_batch = 1.0 / static_cast<double>(batch);
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const std::uint8_t y = noisy_labels[i];
        total += beta[i] * -std::log(clip_prob(probs.at(i, y)));
        for (std::size_t k = 0; k < n_classes; ++k) {
            r.grad_logits.at(i, k) = beta[i] * (probs.at(i, k) - (k == y ? 1.0 : 0.0)) * inv_batch;
        }
    }
    r.value = total * inv_batch;
    r.weights = std::move(beta);
    return r;
}

StabilizedInverse stabilized_inverse(const TransitionMatrix& T, double mix_lambda,
                                     double cond_threshold) {
    StabilizedInverse out;
    out.condition_number = linalg::condition_number_1(T.entries());
    if (out.condition_number <= cond_threshold) {
        out.used = T.entries();
        out.inverse = linalg::invert(out.used);
        return out;
    }

    // Ill-conditioned (or singular): invert (1 - lambda) T + lambda I instead.
    const std::size_t n = T.n_classes();
    out.mixed = true;
    out.used = Tensor({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out.used.at(i, j) = (1.0 - mix_lambda) * T.at(i, j) + (i == j ? mix_lambda : 0.0);
        }
    }
    if (!linalg::try_invert(out.used, out.inverse)) {
        throw std::runtime_error("stabilized_inverse: matrix singular even after identity mixing");
    }
    return out;
}

LossResult backward_corrected_with(const Tensor& probs, std::span<const std::uint8_t> noisy_labels,
                                   const Tensor& inverse) {
    check_batch(probs, noisy_labels);
    const std::size_t batch = probs.rows();
    const std::size_t n_classes = probs.cols();
    if (inverse.rank() != 2 || inverse.rows() != n_classes || inverse.cols() != n_classes) {
        throw std::invalid_argument("backward_corrected: inverse shape mismatch");
    }

    LossResult r;
    r.grad_logits = Tensor({batch, n_classes});
    const double inv_batch = 1.0 / static_cast<double>(batch);
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const std::uint8_t y = noisy_labels[i];
        // Corrected loss: (T^-1 l)[y] with l_j = -log p_j.
        double corrected = 0.0;
        double row_sum = 0.0;
        for (std::size_t j = 0; j < n_classes; ++j) {
            const double a = inverse.at(y, j);
            corrected += a * -std::log(clip_prob(probs.at(i, j)));
            row_sum += a;
        }
        total += corrected;
        for (std::size_t k = 0; k < n_classes; ++k) {
            r.grad_logits.at(i, k) = (probs.at(i, k) * row_sum - inverse.at(y, k)) * inv_batch;
        }
    }
    r.value = total * inv_batch;
    return r;
}

LossResult backward_corrected(const Tensor& probs, std::span<const std::uint8_t> noisy_labels,
                              const TransitionMatrix& T, double mix_lambda, double cond_threshold) {
    if (T.n_classes() != probs.cols()) {
        throw std::invalid_argument("backward_corrected: T has " + std::to_string(T.n_classes()) +
                                    " classes, probabilities have " + std::to_string(probs.cols()));
    }
    const StabilizedInverse inv = stabilized_inverse(T, mix_lambda, cond_threshold);
    return backward_corrected_with(probs, noisy_labels, inv.inverse);
}

Loss::Loss(LossSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    if (spec_.kind == LossKind::backward) {
        inverse_ = stabilized_inverse(*spec_.T, spec_.mix_lambda, spec_.cond_threshold);
    }
}

LossResult Loss::operator()(const Tensor& probs, std::span<const std::uint8_t> labels) const {
    switch (spec_.kind) {
        case LossKind::cross_entropy:
            return cross_entropy(probs, labels);
        case LossKind::nll: {
            Tensor log_probs = probs;
            for (double& v : log_probs.values()) v = std::log(clip_prob(v));
            return nll(log_probs, labels);
        }
        case LossKind::reweighted:
            return reweighted_ce(probs, labels, *spec_.T, spec_.epsilon);
        case LossKind::backward:
            return backward_corrected_with(probs, labels, inverse_->inverse);
    }
    throw std::logic_error("Loss: unknown kind");
}

}  // namespace noisylab
