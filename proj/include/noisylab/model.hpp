#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noisylab/dataset.hpp"
#include "noisylab/layers.hpp"
#include "noisylab/tensor.hpp"

namespace noisylab {

/// Ordered layer stack ending in a softmax over n_classes. Layer shapes are
/// validated at construction. A model being trained is exclusively owned by
/// that training run; inference on a settled model is safe for concurrent
/// callers.
class Model {
public:
    /// Activations retained by a training-mode forward pass for backward().
    struct Cache {
        std::vector<Tensor> inputs;                       // input to each layer
        std::vector<Tensor> dropout_masks;                // per layer, empty unless dropout
        std::vector<std::vector<std::uint32_t>> argmax;   // per layer, empty unless maxpool
        Tensor logits;                                    // input to the final softmax
        Tensor probs;
    };

    struct Gradients {
        std::vector<Tensor> params;  // aligned with parameters() order
        Tensor input;                // gradient w.r.t. the batch input
    };

    /// "small_cnn": conv16-relu-pool-conv32-relu-pool-conv64-relu-dropout-
    /// flatten-dense64-relu-dense(C)-softmax, needs H, W divisible by 4.
    /// "enhanced_cnn": conv32-relu-pool-conv64-relu-pool-conv128-relu-pool-
    /// conv128-relu-dropout-flatten-dense200-relu-dense(C)-softmax, needs
    /// H, W divisible by 8. Weights drawn uniform +-sqrt(6/fan_in) from seed,
    /// biases zero.
    static Model build(const std::string& architecture_name, Shape3 input_shape,
                       std::size_t n_classes, std::uint64_t seed);

    /// Arbitrary validated stack; architecture_name is "custom".
    static Model custom(std::vector<Layer> layers, Shape3 input_shape, std::size_t n_classes,
                        std::uint64_t seed);

    /// Runs the stack. Dropout fires only when training, with masks drawn
    /// from `seed`. Output rows sum to 1 within 1e-9.
    Tensor forward(const Tensor& batch, bool training, std::uint64_t seed,
                   Cache* cache = nullptr) const;

    /// Backpropagates a gradient w.r.t. the pre-softmax logits through the
    /// cached activations.
    Gradients backward(const Cache& cache, const Tensor& grad_logits) const;

    /// Deterministic inference (no dropout); processes internally in chunks
    /// so large inputs do not blow up activation memory.
    Tensor predict_proba(const Tensor& batch) const;

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::size_t parameter_count() const;

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers_mut() { return layers_; }
    std::size_t n_classes() const { return n_classes_; }
    Shape3 input_shape() const { return input_shape_; }
    const std::string& architecture_name() const { return architecture_name_; }

    /// NLMD checkpoint: magic "NLMD", version u32 LE, architecture name,
    /// input shape, class count, layer descriptor table, then every parameter
    /// tensor as little-endian f64 in parameters() order.
    void save(const std::string& path) const;
    static Model load(const std::string& path);

    bool operator==(const Model& other) const = default;

private:
    Model() = default;
    void validate_chain() const;

    std::vector<Layer> layers_;
    Shape3 input_shape_;
    std::size_t n_classes_ = 0;
    std::string architecture_name_;
};

}  // namespace noisylab
