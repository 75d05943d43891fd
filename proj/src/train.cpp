#include "noisylab/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "noisylab/detail/numfmt.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

namespace {

void gather_batch(const LabeledDataset& ds, const std::vector<std::size_t>& order,
                  std::size_t begin, std::size_t end, Tensor& images,
                  std::vector<std::uint8_t>& labels) {
    const std::size_t pixels = ds.images.size() / ds.size();
    images = Tensor({end - begin, ds.images.dim(1), ds.images.dim(2), ds.images.dim(3)});
    labels.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const std::size_t src = order[i];
        std::copy_n(ds.images.data() + src * pixels, pixels, images.data() + (i - begin) * pixels);
        labels[i - begin] = ds.labels[src];
    }
}

double dataset_loss(const Model& model, const LabeledDataset& ds, const Loss& loss,
                    std::size_t batch_size) {
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    double total = 0.0;
    Tensor images;
    std::vector<std::uint8_t> labels;
    for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, ds.size());
        gather_batch(ds, order, begin, end, images, labels);
        const Tensor probs = model.forward(images, /*training=*/false, /*seed=*/0);
        total += loss(probs, labels).value * static_cast<double>(end - begin);
    }
    return total / static_cast<double>(ds.size());
}

std::vector<Tensor> snapshot_params(const Model& model) {
    std::vector<Tensor> out;
    for (const Tensor* p : model.parameters()) out.push_back(*p);
    return out;
}

void restore_params(Model& model, const std::vector<Tensor>& snapshot) {
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = snapshot[i];
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw std::invalid_argument("TrainConfig: val_fraction must be in (0, 1)");
    }
}

std::string History::to_csv() const {
    std::ostringstream os;
    os << "epoch,train_loss,val_loss\n";
    for (const EpochStats& e : epochs) {
        os << e.epoch << ',' << detail::format_double(e.train_loss) << ','
           << detail::format_double(e.val_loss) << '\n';
    }
    return os.str();
}

void History::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("History: cannot write " + path);
    out << to_csv();
}

History train(Model& model, const LabeledDataset& train_set, const LabeledDataset& val_set,
              const Loss& loss, const TrainConfig& config) {
    config.validate();
    train_set.validate();
    val_set.validate();
    if (train_set.size() == 0 || val_set.size() == 0) {
        throw std::invalid_argument("train: empty dataset");
    }

    auto params = model.parameters();
    AdamState adam({params.begin(), params.end()}, config.adam);

    History history;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_params = snapshot_params(model);
    std::size_t wait = 0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    Tensor images;
    std::vector<std::uint8_t> labels;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, 0x5d0ull, epoch));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < train_set.size(); begin += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(begin + config.batch_size, train_set.size());
            gather_batch(train_set, order, begin, end, images, labels);

            Model::Cache cache;
            const std::uint64_t dropout_seed = derive_seed(config.seed, epoch, batch_index);
            const Tensor probs = model.forward(images, /*training=*/true, dropout_seed, &cache);
            const LossResult lr = loss(probs, labels);
            if (!std::isfinite(lr.value)) {
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batch_index));
            }
            epoch_loss += lr.value * static_cast<double>(end - begin);

            Model::Gradients grads = model.backward(cache, lr.grad_logits);
            adam.step(params, grads.params);
        }
        epoch_loss /= static_cast<double>(train_set.size());

        const double val_loss = dataset_loss(model, val_set, loss, config.batch_size);
        if (!std::isfinite(val_loss)) {
            throw std::runtime_error("train: non-finite validation loss at epoch " + std::to_string(epoch));
        }
        history.epochs.push_back({epoch, epoch_loss, val_loss});

        if (val_loss < best_val) {
            best_val = val_loss;
            best_params = snapshot_params(model);
            history.best_epoch = epoch;
            wait = 0;
        } else {
            ++wait;
            if (wait >= config.patience) break;
        }
    }

    restore_params(model, best_params);
    history.best_val_loss = best_val;
    return history;
}

Tensor fgsm_example(const Model& model, const Tensor& x, std::uint8_t y_true, const Loss& loss,
                    double eps) {
    if (eps < 0.0) throw std::invalid_argument("fgsm_example: eps must be non-negative");
    const Shape3 in = model.input_shape();
    if (x.rank() != 3 || x.dim(0) != in.height || x.dim(1) != in.width || x.dim(2) != in.channels) {
        throw std::invalid_argument("fgsm_example: input shape " + x.shape_str() + " mismatch");
    }

    const Tensor batch = x.reshaped({1, in.height, in.width, in.channels});
    Model::Cache cache;
    const Tensor probs = model.forward(batch, /*training=*/false, /*seed=*/0, &cache);
    const std::uint8_t labels[1] = {y_true};
    const LossResult lr = loss(probs, std::span<const std::uint8_t>(labels, 1));
    const Model::Gradients grads = model.backward(cache, lr.grad_logits);

    Tensor adv = x;
    const Tensor& g = grads.input;
    for (std::size_t i = 0; i < adv.size(); ++i) {
        const double sign = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
        adv[i] = std::clamp(adv[i] + eps * sign, 0.0, 1.0);
    }
    return adv;
}

}  // namespace noisylab
