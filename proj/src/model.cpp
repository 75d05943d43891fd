#include "noisylab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "noisylab/detail/binio.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

namespace {

constexpr char kMagic[4] = {'N', 'L', 'M', 'D'};
constexpr std::uint32_t kVersion = 1;

// Shape of the data flowing between layers: spatial (H, W, C) until flatten,
// a flat feature count afterwards.
struct FlowShape {
    bool spatial = true;
    std::size_t h = 0, w = 0, c = 0;
    std::size_t features = 0;
};

void init_params(Layer& layer, std::uint64_t seed) {
    auto fill_uniform = [](Tensor& t, double bound, Rng& rng) {
        for (double& v : t.values()) v = rng.uniform(-bound, bound);
    };
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(layer.kind)));
    if (layer.kind == LayerKind::conv2d) {
        const double bound = std::sqrt(6.0 / static_cast<double>(9 * layer.in_channels));
        fill_uniform(layer.kernels, bound, rng);
    } else if (layer.kind == LayerKind::dense) {
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.in_features));
        fill_uniform(layer.weights, bound, rng);
    }
    // biases stay zero
}

}  // namespace

void Model::validate_chain() const {
    if (layers_.empty()) throw std::invalid_argument("Model: no layers");
    if (input_shape_.height == 0 || input_shape_.width == 0 || input_shape_.channels == 0) {
        throw std::invalid_argument("Model: bad input shape");
    }
    if (n_classes_ < 2) throw std::invalid_argument("Model: need at least 2 classes");

    FlowShape s{true, input_shape_.height, input_shape_.width, input_shape_.channels, 0};
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& l = layers_[i];
        const bool last = (i + 1 == layers_.size());
        if ((l.kind == LayerKind::softmax) != last) {
            throw std::invalid_argument("Model: softmax must be exactly the final layer");
        }
        switch (l.kind) {
            case LayerKind::conv2d:
                if (!s.spatial || l.in_channels != s.c) {
                    throw std::invalid_argument("Model: conv2d layer " + std::to_string(i) +
                                                " expects " + std::to_string(l.in_channels) +
                                                " input channels");
                }
                s.c = l.out_channels;
                break;
            case LayerKind::maxpool2x2:
                if (!s.spatial || s.h % 2 != 0 || s.w % 2 != 0) {
                    throw std::invalid_argument("Model: maxpool2x2 layer " + std::to_string(i) +
                                                " needs even spatial dims, has " + std::to_string(s.h) +
                                                "x" + std::to_string(s.w));
                }
                s.h /= 2;
                s.w /= 2;
                break;
            case LayerKind::relu:
            case LayerKind::dropout:
                break;
            case LayerKind::flatten:
                if (!s.spatial) throw std::invalid_argument("Model: flatten after flatten");
                s.spatial = false;
                s.features = s.h * s.w * s.c;
                break;
            case LayerKind::dense:
                if (s.spatial || l.in_features != s.features) {
                    throw std::invalid_argument("Model: dense layer " + std::to_string(i) + " expects " +
                                                std::to_string(l.in_features) + " features, has " +
                                                std::to_string(s.spatial ? 0 : s.features));
                }
                s.features = l.out_features;
                break;
            case LayerKind::softmax:
                if (s.spatial || s.features != n_classes_) {
                    throw std::invalid_argument("Model: softmax input must be the " +
                                                std::to_string(n_classes_) + " class logits");
                }
                break;
        }
    }
}

Model Model::build(const std::string& architecture_name, Shape3 input_shape,
                   std::size_t n_classes, std::uint64_t seed) {
    constexpr double kDropoutRate = 0.3;
    std::vector<Layer> layers;
    const std::size_t h = input_shape.height, w = input_shape.width, c = input_shape.channels;

    if (architecture_name == "small_cnn") {
        if (h % 4 != 0 || w % 4 != 0) {
            throw std::invalid_argument("small_cnn needs H and W divisible by 4, got " +
                                        std::to_string(h) + "x" + std::to_string(w));
        }
        layers.push_back(Layer::conv(c, 16));
        layers.push_back(Layer::relu_());
        layers.push_back(Layer::maxpool());
        layers.push_back(Layer::conv(16, 32));
        layers.push_back(Layer::relu_());
        layers.push_back(Layer::maxpool());
        layers.push_back(Layer::conv(32, 64));
        layers.push_back(Layer::relu_());
        layers.push_back(Layer::dropout_(kDropoutRate));
        layers.push_back(Layer::flatten_());
        layers.push_back(Layer::dense_((h / 4) * (w / 4) * 64, 64));
        layers.push_back(Layer::relu_());
        layers.push_back(Layer::dense_(64, n_classes));
        layers.push_back(Layer::softmax_());
    } else if (architecture_name == "enhanced_cnn") {
        if (h % 8 != 0 || w % 8 != 0) {
            throw std::invalid_argument("enhanced_cnn needs H and W divisible by 8, got " +
                                        std::to_string(h) + "x" + std::to_string(w));
        }
        layers.push_back(Layer::conv(c, 32));
        layers.push_back(Layer::relu_());
        layers.push_back(Layer::maxpool());
        layers.push_back(Layer::conv(32, 64));
        layers.push_back(Layer::relu_());
        layers.push_back(Layer::maxpool());
        layers.push_back(Layer::conv(64, 128));
        layers.push_back(Layer::relu_());
        layers.push_back(Layer::maxpool());
        layers.push_back(Layer::conv(128, 128));
        layers.push_back(Layer::relu_());
        layers.push_back(Layer::dropout_(kDropoutRate));
        layers.push_back(Layer::flatten_());
        layers.push_back(Layer::dense_((h / 8) * (w / 8) * 128, 200));
        layers.push_back(Layer::relu_());
        layers.push_back(Layer::dense_(200, n_classes));
        layers.push_back(Layer::softmax_());
    } else {
        throw std::invalid_argument("Model: unknown architecture '" + architecture_name +
                                    "' (known: small_cnn, enhanced_cnn)");
    }

    Model m;
    m.layers_ = std::move(layers);
    m.input_shape_ = input_shape;
    m.n_classes_ = n_classes;
    m.architecture_name_ = architecture_name;
    m.validate_chain();
    for (std::size_t i = 0; i < m.layers_.size(); ++i) {
        init_params(m.layers_[i], derive_seed(seed, i));
    }
    return m;
}

Model Model::custom(std::vector<Layer> layers, Shape3 input_shape, std::size_t n_classes,
                    std::uint64_t seed) {
    Model m;
    m.layers_ = std::move(layers);
    m.input_shape_ = input_shape;
    m.n_classes_ = n_classes;
    m.architecture_name_ = "custom";
    m.validate_chain();
    for (std::size_t i = 0; i < m.layers_.size(); ++i) {
        init_params(m.layers_[i], derive_seed(seed, i));
    }
    return m;
}

Tensor Model::forward(const Tensor& batch, bool training, std::uint64_t seed, Cache* cache) const {
    if (batch.rank() != 4 || batch.dim(1) != input_shape_.height ||
        batch.dim(2) != input_shape_.width || batch.dim(3) != input_shape_.channels) {
        throw std::invalid_argument("Model: batch shape " + batch.shape_str() + " does not match input " +
                                    std::to_string(input_shape_.height) + "x" +
                                    std::to_string(input_shape_.width) + "x" +
                                    std::to_string(input_shape_.channels));
    }

    if (!batch.all_finite()) {
        throw std::runtime_error("Model: non-finite values in input batch");
    }
    if (cache) {
        cache->inputs.assign(layers_.size(), Tensor());
        cache->dropout_masks.assign(layers_.size(), Tensor());
        cache->argmax.assign(layers_.size(), {});
    }

    const std::size_t n = batch.dim(0);
    Tensor x = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& l = layers_[i];
        if (cache) cache->inputs[i] = x;
        switch (l.kind) {
            case LayerKind::conv2d:
                x = ops::conv2d_forward(x, l.kernels, l.bias);
                break;
            case LayerKind::maxpool2x2: {
                std::vector<std::uint32_t> argmax;
                x = ops::maxpool_forward(x, argmax);
                if (cache) cache->argmax[i] = std::move(argmax);
                break;
            }
            case LayerKind::relu:
                x = ops::relu_forward(x);
                break;
            case LayerKind::dropout: {
                if (training && l.rate > 0.0) {
                    Rng rng(derive_seed(seed, 0xd20ull, i));
                    Tensor mask;
                    x = ops::dropout_forward(x, l.rate, rng, mask);
                    if (cache) cache->dropout_masks[i] = std::move(mask);
                }
                // inference mode: identity (inverted dropout needs no rescale)
                break;
            }
            case LayerKind::flatten:
                x = x.reshaped({n, x.size() / n});
                break;
            case LayerKind::dense:
                x = ops::dense_forward(x, l.weights, l.bias);
                break;
            case LayerKind::softmax:
                if (cache) cache->logits = x;
                x = ops::softmax_rows(x);
                break;
        }
    }
    if (cache) {
        cache->probs = x;
    }
    if (!x.all_finite()) {
        throw std::runtime_error("Model: non-finite activations in forward pass");
    }
    return x;
}

Model::Gradients Model::backward(const Cache& cache, const Tensor& grad_logits) const {
    if (cache.inputs.size() != layers_.size()) {
        throw std::invalid_argument("Model: cache does not match this model");
    }
    if (!grad_logits.same_shape(cache.logits)) {
        throw std::invalid_argument("Model: grad_logits shape " + grad_logits.shape_str() +
                                    " does not match cached logits " + cache.logits.shape_str());
    }

    // Parameter gradient slots aligned with parameters() order.
    std::vector<std::size_t> slot_of_layer(layers_.size(), 0);
    std::size_t n_slots = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].has_params()) {
            slot_of_layer[i] = n_slots;
            n_slots += 2;
        }
    }

    Gradients out;
    out.params.resize(n_slots);

    Tensor g = grad_logits;
    // grad_logits is already the gradient at the softmax input, so the
    // softmax layer itself is skipped.
    for (std::size_t ri = layers_.size() - 1; ri-- > 0;) {
        const Layer& l = layers_[ri];
        const Tensor& input = cache.inputs[ri];
        switch (l.kind) {
            case LayerKind::conv2d: {
                Tensor gi, gk, gb;
                ops::conv2d_backward(input, l.kernels, g, gi, gk, gb);
                out.params[slot_of_layer[ri]] = std::move(gk);
                out.params[slot_of_layer[ri] + 1] = std::move(gb);
                g = std::move(gi);
                break;
            }
            case LayerKind::maxpool2x2:
                g = ops::maxpool_backward(g, cache.argmax[ri], input.shape());
                break;
            case LayerKind::relu:
                g = ops::relu_backward(input, g);
                break;
            case LayerKind::dropout:
                if (!cache.dropout_masks[ri].empty()) {
                    g = ops::dropout_backward(g, cache.dropout_masks[ri]);
                }
                break;
            case LayerKind::flatten:
                g = g.reshaped(input.shape());
                break;
            case LayerKind::dense: {
                Tensor gi, gw, gb;
                ops::dense_backward(input, l.weights, g, gi, gw, gb);
                out.params[slot_of_layer[ri]] = std::move(gw);
                out.params[slot_of_layer[ri] + 1] = std::move(gb);
                g = std::move(gi);
                break;
            }
            case LayerKind::softmax:
                throw std::logic_error("Model: softmax inside the stack");
        }
    }
    out.input = std::move(g);
    return out;
}

Tensor Model::predict_proba(const Tensor& batch) const {
    constexpr std::size_t kChunk = 256;
    const std::size_t n = batch.dim(0);
    if (n <= kChunk) {
        return forward(batch, /*training=*/false, /*seed=*/0);
    }

    const std::size_t pixels = batch.size() / n;
    Tensor out({n, n_classes_});
    for (std::size_t begin = 0; begin < n; begin += kChunk) {
        const std::size_t m = std::min(kChunk, n - begin);
        Tensor chunk({m, batch.dim(1), batch.dim(2), batch.dim(3)});
        std::copy_n(batch.data() + begin * pixels, m * pixels, chunk.data());
        const Tensor probs = forward(chunk, /*training=*/false, /*seed=*/0);
        std::copy_n(probs.data(), m * n_classes_, out.data() + begin * n_classes_);
    }
    return out;
}

std::vector<Tensor*> Model::parameters() {
    std::vector<Tensor*> out;
    for (Layer& l : layers_) {
        if (l.kind == LayerKind::conv2d) {
            out.push_back(&l.kernels);
            out.push_back(&l.bias);
        } else if (l.kind == LayerKind::dense) {
            out.push_back(&l.weights);
            out.push_back(&l.bias);
        }
    }
    return out;
}

std::vector<const Tensor*> Model::parameters() const {
    std::vector<const Tensor*> out;
    for (const Layer& l : layers_) {
        if (l.kind == LayerKind::conv2d) {
            out.push_back(&l.kernels);
            out.push_back(&l.bias);
        } else if (l.kind == LayerKind::dense) {
            out.push_back(&l.weights);
            out.push_back(&l.bias);
        }
    }
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* t : parameters()) n += t->size();
    return n;
}

void Model::save(const std::string& path) const {
    std::string out;
    out.append(kMagic, 4);
    detail::put_u32(out, kVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(architecture_name_.size()));
    out.append(architecture_name_);
    detail::put_u32(out, static_cast<std::uint32_t>(n_classes_));
    detail::put_u32(out, static_cast<std::uint32_t>(input_shape_.height));
    detail::put_u32(out, static_cast<std::uint32_t>(input_shape_.width));
    detail::put_u32(out, static_cast<std::uint32_t>(input_shape_.channels));
    detail::put_u32(out, static_cast<std::uint32_t>(layers_.size()));
    for (const Layer& l : layers_) {
        detail::put_u8(out, static_cast<std::uint8_t>(l.kind));
        switch (l.kind) {
            case LayerKind::conv2d:
                detail::put_u32(out, static_cast<std::uint32_t>(l.in_channels));
                detail::put_u32(out, static_cast<std::uint32_t>(l.out_channels));
                break;
            case LayerKind::dense:
                detail::put_u32(out, static_cast<std::uint32_t>(l.in_features));
                detail::put_u32(out, static_cast<std::uint32_t>(l.out_features));
                break;
            case LayerKind::dropout:
                detail::put_f64(out, l.rate);
                break;
            default:
                break;
        }
    }
    for (const Tensor* p : parameters()) {
        for (double v : p->values()) detail::put_f64(out, v);
    }
    detail::write_file(path, out, "Model");
}

Model Model::load(const std::string& path) {
    const std::string bytes = detail::read_file(path, "Model");
    detail::ByteReader r(bytes, "Model " + path);

    r.need(4);
    char magic[4];
    for (int i = 0; i < 4; ++i) magic[i] = static_cast<char>(r.u8());
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("Model: bad magic in " + path + ", expected 'NLMD'");
    }
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw std::runtime_error("Model: unsupported checkpoint version " + std::to_string(version));
    }

    Model m;
    const std::uint32_t name_len = r.u32();
    r.need(name_len);
    for (std::uint32_t i = 0; i < name_len; ++i) m.architecture_name_.push_back(static_cast<char>(r.u8()));
    m.n_classes_ = r.u32();
    m.input_shape_.height = r.u32();
    m.input_shape_.width = r.u32();
    m.input_shape_.channels = r.u32();
    const std::uint32_t n_layers = r.u32();
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const std::uint8_t kind = r.u8();
        switch (static_cast<LayerKind>(kind)) {
            case LayerKind::conv2d: {
                const std::uint32_t cin = r.u32();
                const std::uint32_t cout = r.u32();
                m.layers_.push_back(Layer::conv(cin, cout));
                break;
            }
            case LayerKind::dense: {
                const std::uint32_t fin = r.u32();
                const std::uint32_t fout = r.u32();
                m.layers_.push_back(Layer::dense_(fin, fout));
                break;
            }
            case LayerKind::dropout:
                m.layers_.push_back(Layer::dropout_(r.f64()));
                break;
            case LayerKind::maxpool2x2:
                m.layers_.push_back(Layer::maxpool());
                break;
            case LayerKind::relu:
                m.layers_.push_back(Layer::relu_());
                break;
            case LayerKind::flatten:
                m.layers_.push_back(Layer::flatten_());
                break;
            case LayerKind::softmax:
                m.layers_.push_back(Layer::softmax_());
                break;
            default:
                throw std::runtime_error("Model: unknown layer kind " + std::to_string(kind) +
                                         " in " + path);
        }
    }
    m.validate_chain();
    for (Tensor* p : m.parameters()) {
        for (double& v : p->values()) v = r.f64();
    }
    if (r.remaining() != 0) {
        throw std::runtime_error("Model: trailing bytes in " + path);
    }
    return m;
}

}  // namespace noisylab
