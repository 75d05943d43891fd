#include "noisylab/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace noisylab {

std::string layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::maxpool2x2: return "maxpool2x2";
        case LayerKind::relu: return "relu";
        case LayerKind::dropout: return "dropout";
        case LayerKind::flatten: return "flatten";
        case LayerKind::dense: return "dense";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

Layer Layer::conv(std::size_t in_channels, std::size_t out_channels) {
    Layer l;
    l.kind = LayerKind::conv2d;
    l.in_channels = in_channels;
    l.out_channels = out_channels;
    l.kernels = Tensor({3, 3, in_channels, out_channels});
    l.bias = Tensor({out_channels});
    return l;
}

Layer Layer::maxpool() {
    Layer l;
    l.kind = LayerKind::maxpool2x2;
    return l;
}

Layer Layer::relu_() { return Layer{}; }

Layer Layer::dropout_(double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw std::invalid_argument("dropout rate must be in [0, 1)");
    }
    Layer l;
    l.kind = LayerKind::dropout;
    l.rate = rate;
    return l;
}

Layer Layer::flatten_() {
    Layer l;
    l.kind = LayerKind::flatten;
    return l;
}

Layer Layer::dense_(std::size_t in_features, std::size_t out_features) {
    Layer l;
    l.kind = LayerKind::dense;
    l.in_features = in_features;
    l.out_features = out_features;
    l.weights = Tensor({in_features, out_features});
    l.bias = Tensor({out_features});
    return l;
}

Layer Layer::softmax_() {
    Layer l;
    l.kind = LayerKind::softmax;
    return l;
}

namespace ops {

namespace {

void require_nhwc(const Tensor& t, const char* who) {
    if (t.rank() != 4) {
        throw std::invalid_argument(std::string(who) + ": expected (N, H, W, C), got " + t.shape_str());
    }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    require_nhwc(input, "conv2d");
    const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), cin = input.dim(3);
    const std::size_t cout = kernels.dim(3);
    if (kernels.dim(0) != 3 || kernels.dim(1) != 3 || kernels.dim(2) != cin) {
        throw std::invalid_argument("conv2d: kernel shape " + kernels.shape_str() +
                                    " incompatible with input " + input.shape_str());
    }

    Tensor out({n, h, w, cout});
    std::vector<double> acc(cout);
    const double* in = input.data();
    const double* k = kernels.data();
    double* o = out.data();

    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t oy = 0; oy < h; ++oy) {
            for (std::size_t ox = 0; ox < w; ++ox) {
                for (std::size_t co = 0; co < cout; ++co) acc[co] = bias[co];
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - 1;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - 1;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        const double* in_px = in + ((ni * h + iy) * w + ix) * cin;
                        const double* kbase = k + (ky * 3 + kx) * cin * cout;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            const double iv = in_px[ci];
                            const double* kr = kbase + ci * cout;
                            for (std::size_t co = 0; co < cout; ++co) acc[co] += iv * kr[co];
                        }
                    }
                }
                double* out_px = o + ((ni * h + oy) * w + ox) * cout;
                for (std::size_t co = 0; co < cout; ++co) out_px[co] = acc[co];
            }
        }
    }
    return out;
}

void conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out,
                     Tensor& grad_in, Tensor& grad_kernels, Tensor& grad_bias) {
    const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), cin = input.dim(3);
    const std::size_t cout = kernels.dim(3);
    if (!grad_out.same_shape(Tensor({n, h, w, cout}))) {
        throw std::invalid_argument("conv2d backward: grad shape " + grad_out.shape_str() + " mismatch");
    }

    grad_in = Tensor::zeros_like(input);
    grad_kernels = Tensor::zeros_like(kernels);
    grad_bias = Tensor({cout});

    const double* in = input.data();
    const double* k = kernels.data();
    const double* go = grad_out.data();
    double* gi = grad_in.data();
    double* gk = grad_kernels.data();

    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t oy = 0; oy < h; ++oy) {
            for (std::size_t ox = 0; ox < w; ++ox) {
                const double* go_px = go + ((ni * h + oy) * w + ox) * cout;
                for (std::size_t co = 0; co < cout; ++co) grad_bias[co] += go_px[co];
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - 1;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - 1;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        const std::size_t px = ((ni * h + iy) * w + ix) * cin;
                        const std::size_t kb = (ky * 3 + kx) * cin * cout;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            const double iv = in[px + ci];
                            const double* kr = k + kb + ci * cout;
                            double* gkr = gk + kb + ci * cout;
                            double g_in = 0.0;
                            for (std::size_t co = 0; co < cout; ++co) {
                                const double g = go_px[co];
                                g_in += kr[co] * g;
                                gkr[co] += iv * g;
                            }
                            gi[px + ci] += g_in;
                        }
                    }
                }
            }
        }
    }
}

Tensor maxpool_forward(const Tensor& input, std::vector<std::uint32_t>& argmax) {
    require_nhwc(input, "maxpool2x2");
    const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
    if (h % 2 != 0 || w % 2 != 0) {
        throw std::invalid_argument("maxpool2x2: spatial dims must be even, got " + input.shape_str());
    }
    const std::size_t oh = h / 2, ow = w / 2;
    Tensor out({n, oh, ow, c});
    argmax.assign(out.size(), 0);

    const double* in = input.data();
    double* o = out.data();
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                for (std::size_t ci = 0; ci < c; ++ci) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (std::size_t dy = 0; dy < 2; ++dy) {
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const std::size_t idx = ((ni * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ci;
                            if (in[idx] > best) {  // ties keep the first in scan order
                                best = in[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    const std::size_t oidx = ((ni * oh + oy) * ow + ox) * c + ci;
                    o[oidx] = best;
                    argmax[oidx] = static_cast<std::uint32_t>(best_idx);
                }
            }
        }
    }
    return out;
}

Tensor maxpool_backward(const Tensor& grad_out, const std::vector<std::uint32_t>& argmax,
                        const std::vector<std::size_t>& input_shape) {
    Tensor grad_in(input_shape);
    const double* go = grad_out.data();
    double* gi = grad_in.data();
    for (std::size_t i = 0; i < grad_out.size(); ++i) gi[argmax[i]] += go[i];
    return grad_in;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.values()) v = std::max(0.0, v);
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i) {
        if (input[i] <= 0.0) grad_in[i] = 0.0;
    }
    return grad_in;
}

Tensor dropout_forward(const Tensor& input, double rate, Rng& rng, Tensor& mask) {
    mask = Tensor::zeros_like(input);
    Tensor out = input;
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double scale = rng.next_double() >= rate ? keep_scale : 0.0;
        mask[i] = scale;
        out[i] *= scale;
    }
    return out;
}

Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask) {
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] *= mask[i];
    return grad_in;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (input.rank() != 2 || input.cols() != weights.rows()) {
        throw std::invalid_argument("dense: input " + input.shape_str() + " incompatible with weights " +
                                    weights.shape_str());
    }
    const std::size_t n = input.rows(), fin = weights.rows(), fout = weights.cols();
    Tensor out({n, fout});
    const double* in = input.data();
    const double* wt = weights.data();
    double* o = out.data();
    for (std::size_t ni = 0; ni < n; ++ni) {
        double* orow = o + ni * fout;
        for (std::size_t j = 0; j < fout; ++j) orow[j] = bias[j];
        const double* irow = in + ni * fin;
        for (std::size_t i = 0; i < fin; ++i) {
            const double iv = irow[i];
            const double* wrow = wt + i * fout;
            for (std::size_t j = 0; j < fout; ++j) orow[j] += iv * wrow[j];
        }
    }
    return out;
}

void dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                    Tensor& grad_in, Tensor& grad_weights, Tensor& grad_bias) {
    const std::size_t n = input.rows(), fin = weights.rows(), fout = weights.cols();
    if (grad_out.rank() != 2 || grad_out.rows() != n || grad_out.cols() != fout) {
        throw std::invalid_argument("dense backward: grad shape " + grad_out.shape_str() + " mismatch");
    }
    grad_in = Tensor({n, fin});
    grad_weights = Tensor::zeros_like(weights);
    grad_bias = Tensor({fout});

    const double* in = input.data();
    const double* wt = weights.data();
    const double* go = grad_out.data();
    double* gi = grad_in.data();
    double* gw = grad_weights.data();

    for (std::size_t ni = 0; ni < n; ++ni) {
        const double* grow = go + ni * fout;
        const double* irow = in + ni * fin;
        double* girow = gi + ni * fin;
        for (std::size_t j = 0; j < fout; ++j) grad_bias[j] += grow[j];
        for (std::size_t i = 0; i < fin; ++i) {
            const double* wrow = wt + i * fout;
            double* gwrow = gw + i * fout;
            const double iv = irow[i];
            double acc = 0.0;
            for (std::size_t j = 0; j < fout; ++j) {
                acc += wrow[j] * grow[j];
                gwrow[j] += iv * grow[j];
            }
            girow[i] = acc;
        }
    }
}

Tensor softmax_rows(const Tensor& logits) {
    if (logits.rank() != 2) {
        throw std::invalid_argument("softmax: expected (N, C), got " + logits.shape_str());
    }
    const std::size_t n = logits.rows(), c = logits.cols();
    Tensor out({n, c});
    for (std::size_t i = 0; i < n; ++i) {
        double m = logits.at(i, 0);
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, logits.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double e = std::exp(logits.at(i, j) - m);
            out.at(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= sum;
    }
    return out;
}

}  // namespace ops

}  // namespace noisylab
