#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noisylab/rng.hpp"
#include "noisylab/tensor.hpp"

namespace noisylab {

enum class LayerKind : std::uint8_t {
    conv2d = 0,
    maxpool2x2 = 1,
    relu = 2,
    dropout = 3,
    flatten = 4,
    dense = 5,
    softmax = 6,
};

std::string layer_kind_name(LayerKind kind);

/// One network layer. Convolutions are fixed at 3x3 kernels, stride 1, zero
/// padding that preserves the spatial size; max pooling is 2x2 stride 2.
struct Layer {
    LayerKind kind = LayerKind::relu;

    // conv2d
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    Tensor kernels;  // (3, 3, Cin, Cout)

    // dense
    std::size_t in_features = 0;
    std::size_t out_features = 0;
    Tensor weights;  // (In, Out)

    Tensor bias;  // (Cout) or (Out)

    // dropout
    double rate = 0.0;

    static Layer conv(std::size_t in_channels, std::size_t out_channels);
    static Layer maxpool();
    static Layer relu_();
    static Layer dropout_(double rate);
    static Layer flatten_();
    static Layer dense_(std::size_t in_features, std::size_t out_features);
    static Layer softmax_();

    bool has_params() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }

    bool operator==(const Layer& other) const = default;
};

// Batched layer primitives. Inputs and activations are (N, H, W, C) for
// spatial layers and (N, F) for dense ones.
namespace ops {

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);
void conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out,
                     Tensor& grad_in, Tensor& grad_kernels, Tensor& grad_bias);

Tensor maxpool_forward(const Tensor& input, std::vector<std::uint32_t>& argmax);
Tensor maxpool_backward(const Tensor& grad_out, const std::vector<std::uint32_t>& argmax,
                        const std::vector<std::size_t>& input_shape);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

/// Inverted dropout: kept activations are scaled by 1/(1-rate) so the
/// expected activation is unchanged. `mask` receives the applied scales.
Tensor dropout_forward(const Tensor& input, double rate, Rng& rng, Tensor& mask);
Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask);

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);
void dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                    Tensor& grad_in, Tensor& grad_weights, Tensor& grad_bias);

/// Numerically stable row softmax; every output row sums to 1 within 1e-9.
Tensor softmax_rows(const Tensor& logits);

}  // namespace ops

}  // namespace noisylab
