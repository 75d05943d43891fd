#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noisylab/adam.hpp"
#include "noisylab/dataset.hpp"
#include "noisylab/losses.hpp"
#include "noisylab/model.hpp"

namespace noisylab {

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t max_epochs = 30;
    std::size_t patience = 5;
    std::uint64_t seed = 0;
    double val_fraction = 0.2;  // consumed by callers that split before train()
    AdamConfig adam;

    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct History {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;

    /// CSV: header "epoch,train_loss,val_loss", one row per epoch.
    std::string to_csv() const;
    void save_csv(const std::string& path) const;
};

/// Mini-batch Adam over reshuffled epochs, early stopping on validation loss
/// (min-delta 0) with the best-epoch weights restored on return. Identical
/// (data, config, seed) give bitwise-identical trajectories. Throws on empty
/// datasets and aborts with a diagnostic if the loss goes non-finite.
History train(Model& model, const LabeledDataset& train_set, const LabeledDataset& val_set,
              const Loss& loss, const TrainConfig& config);

/// Fast-gradient-sign probe: x + eps * sign(grad_x loss), clamped to [0, 1]
/// per pixel. x has shape (H, W, C).
Tensor fgsm_example(const Model& model, const Tensor& x, std::uint8_t y_true, const Loss& loss,
                    double eps);

}  // namespace noisylab
