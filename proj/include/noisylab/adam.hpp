#pragma once

#include <cstddef>
#include <vector>

#include "noisylab/tensor.hpp"

namespace noisylab {

struct AdamConfig {
    double alpha = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction:
///   m_t = b1 m_{t-1} + (1-b1) g,   v_t = b2 v_{t-1} + (1-b2) g^2
///   m' = m_t / (1 - b1^t),         v' = v_t / (1 - b2^t)
///   theta -= alpha * m' / (sqrt(v') + eps)
/// t is incremented before the bias correction of each step.
class AdamState {
public:
    AdamState() = default;
    explicit AdamState(const std::vector<const Tensor*>& params, AdamConfig config = {});

    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

    std::size_t t() const { return t_; }
    const AdamConfig& config() const { return config_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }

private:
    AdamConfig config_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::size_t t_ = 0;
};

}  // namespace noisylab
