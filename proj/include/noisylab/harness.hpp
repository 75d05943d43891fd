#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "noisylab/dataset.hpp"
#include "noisylab/estimation.hpp"
#include "noisylab/metrics.hpp"
#include "noisylab/model.hpp"
#include "noisylab/train.hpp"
#include "noisylab/transition.hpp"

namespace noisylab {

enum class Method { ce_baseline, reweighted, backward };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

enum class NoiseSource { fashion05, fashion06, symmetric, file, estimate };

struct NoiseSpec {
    NoiseSource source = NoiseSource::fashion05;
    double rho = 0.0;       // symmetric only
    std::string path;       // file only
};

/// Either a synthetic recipe (fresh data per run) or a pair of dataset files
/// (fixed data, per-run noise/split/init seeds still vary).
struct DataSource {
    std::optional<SyntheticSpec> synthetic = SyntheticSpec{};
    std::size_t test_per_class = 200;  // synthetic only
    std::string train_file;
    std::string test_file;
};

struct ExperimentConfig {
    DataSource dataset;
    NoiseSpec noise;
    std::vector<Method> methods = {Method::ce_baseline, Method::reweighted, Method::backward};
    bool normalization = true;
    std::string architecture = "small_cnn";
    std::size_t n_runs = 10;
    std::uint64_t base_seed = 0;
    TrainConfig train;
    /// Also run the transition-matrix estimator each run. Forced on when the
    /// noise source is "estimate" (there is no other way to get T).
    bool estimate_t = false;

    void validate() const;

    /// Strict JSON: unknown keys are errors.
    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_json_file(const std::string& path);
    std::string to_json_text() const;
};

struct RunEstimate {
    Tensor matrix;
    double condition_number = 0.0;
    std::optional<double> mse_vs_truth;
};

struct MethodOutcome {
    Method method = Method::ce_baseline;
    std::vector<MetricsReport> runs;
    AggregateReport aggregate;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<MethodOutcome> methods;
    std::vector<RunEstimate> estimates;  // empty unless estimation ran
    std::optional<double> mean_estimate_mse;
    std::vector<double> run_seconds;

    /// Growth of a method's aggregate mean over the ce_baseline mean, in
    /// percent; empty when ce_baseline was not run or a mean is undefined.
    std::optional<double> growth_vs_baseline(Method m, const std::string& metric) const;

    std::string to_json_text() const;
    static ExperimentResult from_json_text(const std::string& text);
    void save_json(const std::string& path) const;
    static ExperimentResult load_json(const std::string& path);

    /// One row per method x metric; byte-identical for identical configs.
    std::string to_csv() const;
    /// Markdown table: metric rows, per-method mean +- std columns with a
    /// growth-rate column after each non-baseline method.
    std::string to_markdown() const;
};

/// Runs the full protocol: per run derive seed = base_seed + run, build or
/// load the data, inject noise into the train+val pool only (test labels stay
/// clean), split, optionally estimate T with an auxiliary cross-entropy
/// model, train every method, evaluate on the clean test set, and aggregate.
/// When out_dir is non-empty, partial results are flushed there after every
/// run (result.partial.json) so long experiments survive interruption.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir = "");

/// Trains a model with one method's loss. The reweighted method first runs a
/// plain cross-entropy phase so its importance weights are computed from an
/// informative posterior; training the self-referential weights from scratch
/// can lock onto confident wrong predictions at high flip rates.
History train_method(Model& model, const LabeledDataset& train_set, const LabeledDataset& val_set,
                     Method method, const std::optional<TransitionMatrix>& T,
                     const TrainConfig& config);

/// Argmax prediction (ties to the lowest class index) and confusion-based
/// metrics of a model on a dataset.
MetricsReport evaluate_model(const Model& model, const LabeledDataset& test);

}  // namespace noisylab
