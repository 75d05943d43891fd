#include "noisylab/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace noisylab {

AdamState::AdamState(const std::vector<const Tensor*>& params, AdamConfig config)
    : config_(config) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor* p : params) {
        m_.push_back(Tensor::zeros_like(*p));
        v_.push_back(Tensor::zeros_like(*p));
    }
}

void AdamState::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw std::invalid_argument("AdamState: parameter/gradient count mismatch");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));

    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& theta = *params[p];
        const Tensor& g = grads[p];
        if (!theta.same_shape(m_[p]) || !g.same_shape(m_[p])) {
            throw std::invalid_argument("AdamState: shape mismatch for parameter " + std::to_string(p));
        }
        Tensor& m = m_[p];
        Tensor& v = v_[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double gi = g[i];
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] -= config_.alpha * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

}  // namespace noisylab
