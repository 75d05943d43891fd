#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noisylab/tensor.hpp"

namespace noisylab {

enum class LabelQuality : std::uint8_t { clean = 0, noisy = 1 };

struct Shape3 {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    bool operator==(const Shape3&) const = default;
};

/// Image tensor (n, H, W, C) plus integer labels. Immutable by convention
/// after construction; multiple training runs may read it concurrently.
struct LabeledDataset {
    Tensor images;
    std::vector<std::uint8_t> labels;
    std::size_t n_classes = 0;
    LabelQuality quality = LabelQuality::clean;
    std::string name;

    std::size_t size() const { return labels.size(); }
    Shape3 sample_shape() const;

    /// Checks the (n, H, W, C) / label-count / label-range invariants; throws
    /// std::invalid_argument on violation.
    void validate() const;

    /// NLDS binary format, bit-exact:
    /// magic "NLDS", version u32 LE = 1, n u32, H u32, W u32, C u32,
    /// n_classes u32, label_quality u8 (0 clean / 1 noisy),
    /// pixels as n*H*W*C little-endian f64, then n label bytes.
    void save(const std::string& path) const;
    static LabeledDataset load(const std::string& path);
};

/// Desk-scale synthetic stand-in for the grayscale benchmark sets: one
/// deterministic geometric template per class plus i.i.d. Gaussian pixel
/// noise, balanced classes, pixels in [0, 1].
struct SyntheticSpec {
    std::size_t n_classes = 3;
    std::size_t samples_per_class = 500;
    std::size_t height = 16;
    std::size_t width = 16;
    std::size_t channels = 1;
    double template_contrast = 1.0;
    double pixel_noise_sigma = 0.25;
};

/// The noise-free pattern for class k, in [0, template_contrast].
Tensor class_template(const SyntheticSpec& spec, std::size_t k);

LabeledDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Divides integer pixel values in [0, 255] by 255. Values outside that range
/// are rejected; data that is already in [0, 1] also passes the range check,
/// so not normalizing twice is the caller's responsibility.
Tensor normalize(const Tensor& raw);

struct SplitPair {
    LabeledDataset train;
    LabeledDataset val;
    std::uint64_t seed = 0;
    double fraction = 0.0;
};

/// Uniformly random permutation from `seed`; the first floor(fraction * n)
/// samples become train, the rest val. Deterministic per seed; throws if
/// either side would be empty.
SplitPair split(const LabeledDataset& dataset, double fraction, std::uint64_t seed);

}  // namespace noisylab
