#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noisylab/tensor.hpp"
#include "noisylab/transition.hpp"

namespace noisylab {

enum class LossKind { cross_entropy, nll, reweighted, backward };

std::string loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

/// Selects a loss and its correction parameters. `reweighted` and `backward`
/// require a transition matrix.
struct LossSpec {
    LossKind kind = LossKind::cross_entropy;
    std::optional<TransitionMatrix> T;
    double epsilon = 1e-7;        // beta denominator stabilizer
    double mix_lambda = 0.2;      // identity-mix weight for ill-conditioned T
    double cond_threshold = 1e4;  // condition number that triggers mixing

    void validate() const;
};

/// Mean batch loss plus its gradient with respect to the pre-softmax logits
/// (composed analytically with softmax). `weights` carries the per-sample
/// beta vector for the reweighted loss.
struct LossResult {
    double value = 0.0;
    Tensor grad_logits;  // (batch, C)
    std::optional<std::vector<double>> weights;
};

/// Mean of -log probs[i][label_i], probabilities clipped to [1e-12, 1]
/// before the log.
LossResult cross_entropy(const Tensor& probs, std::span<const std::uint8_t> labels);

/// Negative log likelihood on log-probabilities; same value as cross_entropy
/// on exp(log_probs).
LossResult nll(const Tensor& log_probs, std::span<const std::uint8_t> labels);

/// Importance weights: beta_i = P(y_i | x_i) / (P_noisy(y_i | x_i) + epsilon)
/// where the noisy posterior is the model posterior pushed through T,
/// p_noisy[j] = sum_k probs[k] * T[k][j].
std::vector<double> beta_weight(const Tensor& probs, std::span<const std::uint8_t> noisy_labels,
                                const TransitionMatrix& T, double epsilon = 1e-7);

/// Cross-entropy scaled per sample by beta. Beta is treated as a constant in
/// the gradient (it is a computed weight, not a differentiated path).
LossResult reweighted_ce(const Tensor& probs, std::span<const std::uint8_t> noisy_labels,
                         const TransitionMatrix& T, double epsilon = 1e-7);

/// Inverse of T, or of (1 - mix_lambda) * T + mix_lambda * I when T's 1-norm
/// condition number exceeds cond_threshold. `used` is the matrix that was
/// actually inverted; inverse * used == I within 1e-9 max-norm.
struct StabilizedInverse {
    Tensor inverse;
    Tensor used;
    bool mixed = false;
    double condition_number = 0.0;  // of the original T
};

StabilizedInverse stabilized_inverse(const TransitionMatrix& T, double mix_lambda = 0.2,
                                     double cond_threshold = 1e4);

/// Backward-corrected loss: with l_j = -log probs[i][j], the per-sample loss
/// is (T^-1 l)[noisy_label_i]. The inverse is constant; gradients flow
/// through l only. Individual corrected losses may be negative (the inverse
/// has negative entries); the batch mean is still the quantity minimized.
LossResult backward_corrected(const Tensor& probs, std::span<const std::uint8_t> noisy_labels,
                              const TransitionMatrix& T, double mix_lambda = 0.2,
                              double cond_threshold = 1e4);

/// As backward_corrected but with a precomputed inverse (training loops
/// invert T once, not per batch).
LossResult backward_corrected_with(const Tensor& probs, std::span<const std::uint8_t> noisy_labels,
                                   const Tensor& inverse);

/// A LossSpec bound into a callable. Pure w.r.t. its inputs; safe for
/// concurrent invocation.
class Loss {
public:
    explicit Loss(LossSpec spec);

    LossResult operator()(const Tensor& probs, std::span<const std::uint8_t> labels) const;

    const LossSpec& spec() const { return spec_; }

private:
    LossSpec spec_;
    std::optional<StabilizedInverse> inverse_;  // backward kind only
};

}  // namespace noisylab
