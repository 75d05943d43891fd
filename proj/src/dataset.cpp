#include "noisylab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "noisylab/detail/binio.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

namespace {

constexpr char kMagic[4] = {'N', 'L', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

Shape3 LabeledDataset::sample_shape() const {
    if (images.rank() != 4) {
        throw std::invalid_argument("LabeledDataset: images must have shape (n, H, W, C), got " +
                                    images.shape_str());
    }
    return {images.dim(1), images.dim(2), images.dim(3)};
}

void LabeledDataset::validate() const {
    if (images.rank() != 4) {
        throw std::invalid_argument("LabeledDataset: images must have shape (n, H, W, C), got " +
                                    images.shape_str());
    }
    if (labels.empty() || images.dim(0) != labels.size()) {
        throw std::invalid_argument("LabeledDataset: image count " + std::to_string(images.dim(0)) +
                                    " does not match " + std::to_string(labels.size()) + " labels");
    }
    if (n_classes < 2) {
        throw std::invalid_argument("LabeledDataset: need at least 2 classes");
    }
    for (std::uint8_t y : labels) {
        if (y >= n_classes) {
            throw std::invalid_argument("LabeledDataset: label " + std::to_string(y) + " out of range");
        }
    }
}

void LabeledDataset::save(const std::string& path) const {
    validate();
    std::string out;
    out.reserve(29 + images.size() * 8 + labels.size());
    out.append(kMagic, 4);
    detail::put_u32(out, kVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(labels.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(images.dim(1)));
    detail::put_u32(out, static_cast<std::uint32_t>(images.dim(2)));
    detail::put_u32(out, static_cast<std::uint32_t>(images.dim(3)));
    detail::put_u32(out, static_cast<std::uint32_t>(n_classes));
    detail::put_u8(out, static_cast<std::uint8_t>(quality));
    for (double v : images.values()) detail::put_f64(out, v);
    for (std::uint8_t y : labels) detail::put_u8(out, y);
    detail::write_file(path, out, "LabeledDataset");
}

LabeledDataset LabeledDataset::load(const std::string& path) {
    const std::string bytes = detail::read_file(path, "LabeledDataset");
    detail::ByteReader r(bytes, "LabeledDataset " + path);

    r.need(4);
    char magic[4];
    for (int i = 0; i < 4; ++i) magic[i] = static_cast<char>(r.u8());
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("LabeledDataset: bad magic in " + path + ", expected 'NLDS'");
    }
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw std::runtime_error("LabeledDataset: unsupported version " + std::to_string(version) +
                                 " in " + path + ", expected " + std::to_string(kVersion));
    }
    const std::uint32_t n = r.u32();
    const std::uint32_t h = r.u32();
    const std::uint32_t w = r.u32();
    const std::uint32_t c = r.u32();
    const std::uint32_t n_classes = r.u32();
    const std::uint8_t quality = r.u8();
    if (quality > 1) {
        throw std::runtime_error("LabeledDataset: bad label_quality byte in " + path);
    }

    LabeledDataset ds;
    ds.images = Tensor({n, h, w, c});
    for (double& v : ds.images.values()) v = r.f64();
    ds.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint8_t y = r.u8();
        if (y >= n_classes) {
            throw std::runtime_error("LabeledDataset: label " + std::to_string(y) +
                                     " out of range in " + path);
        }
        ds.labels[i] = y;
    }
    ds.n_classes = n_classes;
    ds.quality = static_cast<LabelQuality>(quality);
    ds.name = std::filesystem::path(path).stem().string();
    ds.validate();
    return ds;
}

Tensor class_template(const SyntheticSpec& spec, std::size_t k) {
    if (k >= spec.n_classes) {
        throw std::invalid_argument("class_template: class index out of range");
    }
    const std::size_t motif = k % 4;
    const std::size_t variant = k / 4;
    const double on = spec.template_contrast;

    Tensor t({spec.height, spec.width, spec.channels});
    for (std::size_t y = 0; y < spec.height; ++y) {
        for (std::size_t x = 0; x < spec.width; ++x) {
            bool lit = false;
            switch (motif) {
                case 0: {  // one filled quadrant
                    const bool right = (variant % 4 == 1 || variant % 4 == 3);
                    const bool bottom = (variant % 4 >= 2);
                    lit = (right ? x >= spec.width / 2 : x < spec.width / 2) &&
                          (bottom ? y >= spec.height / 2 : y < spec.height / 2);
                    break;
                }
                case 1:  // horizontal stripes
                    lit = (y / (2 + variant % 3)) % 2 == 0;
                    break;
                case 2:  // vertical stripes
                    lit = (x / (2 + variant % 3)) % 2 == 0;
                    break;
                default:  // diagonal stripes
                    lit = ((x + y) / (2 + variant % 3)) % 2 == 0;
                    break;
            }
            for (std::size_t c = 0; c < spec.channels; ++c) {
                t[(y * spec.width + x) * spec.channels + c] = lit ? on : 0.0;
            }
        }
    }
    return t;
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.n_classes < 2) throw std::invalid_argument("generate_synthetic: need at least 2 classes");
    if (spec.samples_per_class == 0) throw std::invalid_argument("generate_synthetic: samples_per_class must be positive");
    if (spec.height % 4 != 0 || spec.width % 4 != 0) {
        throw std::invalid_argument("generate_synthetic: H and W must be divisible by 4");
    }
    if (!(spec.template_contrast > 0.0 && spec.template_contrast <= 1.0)) {
        throw std::invalid_argument("generate_synthetic: template_contrast must be in (0, 1]");
    }
    if (spec.pixel_noise_sigma < 0.0) {
        throw std::invalid_argument("generate_synthetic: pixel_noise_sigma must be non-negative");
    }

    std::vector<Tensor> templates;
    templates.reserve(spec.n_classes);
    for (std::size_t k = 0; k < spec.n_classes; ++k) templates.push_back(class_template(spec, k));

    const std::size_t n = spec.n_classes * spec.samples_per_class;
    const std::size_t pixels = spec.height * spec.width * spec.channels;

    LabeledDataset ds;
    ds.images = Tensor({n, spec.height, spec.width, spec.channels});
    ds.labels.resize(n);
    ds.n_classes = spec.n_classes;
    ds.quality = LabelQuality::clean;
    ds.name = "synthetic";

    Rng rng(derive_seed(seed, 0x73796e7468ull));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = i % spec.n_classes;  // interleaved, exactly balanced
        ds.labels[i] = static_cast<std::uint8_t>(k);
        double* dst = ds.images.data() + i * pixels;
        const double* src = templates[k].data();
        for (std::size_t p = 0; p < pixels; ++p) {
            double v = src[p];
            if (spec.pixel_noise_sigma > 0.0) v += spec.pixel_noise_sigma * rng.next_gaussian();
            dst[p] = std::clamp(v, 0.0, 1.0);
        }
    }
    return ds;
}

Tensor normalize(const Tensor& raw) {
    for (double v : raw.values()) {
        if (!(v >= 0.0 && v <= 255.0)) {
            throw std::invalid_argument("normalize: pixel value " + std::to_string(v) +
                                        " outside [0, 255]");
        }
    }
    Tensor out = raw;
    for (double& v : out.values()) v /= 255.0;
    return out;
}

SplitPair split(const LabeledDataset& dataset, double fraction, std::uint64_t seed) {
    dataset.validate();
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw std::invalid_argument("split: fraction must be in (0, 1)");
    }
    const std::size_t n = dataset.size();
    const std::size_t n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train == n) {
        throw std::invalid_argument("split: fraction " + std::to_string(fraction) +
                                    " leaves an empty side for n = " + std::to_string(n));
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0x73706c6974ull));
    rng.shuffle(order);

    const std::size_t pixels = dataset.images.size() / n;
    auto gather = [&](std::size_t begin, std::size_t end, const std::string& suffix) {
        LabeledDataset out;
        out.images = Tensor({end - begin, dataset.images.dim(1), dataset.images.dim(2), dataset.images.dim(3)});
        out.labels.resize(end - begin);
        out.n_classes = dataset.n_classes;
        out.quality = dataset.quality;
        out.name = dataset.name.empty() ? suffix : dataset.name + "/" + suffix;
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t src = order[i];
            std::copy_n(dataset.images.data() + src * pixels, pixels,
                        out.images.data() + (i - begin) * pixels);
            out.labels[i - begin] = dataset.labels[src];
        }
        return out;
    };

    SplitPair pair;
    pair.train = gather(0, n_train, "train");
    pair.val = gather(n_train, n, "val");
    pair.seed = seed;
    pair.fraction = fraction;
    return pair;
}

}  // namespace noisylab
