#include "noisylab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "noisylab/detail/numfmt.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

using nlohmann::json;

namespace {

// Seed stream tags; one per independent random decision in a run.
enum SeedTag : std::uint64_t {
    kTagTrainPool = 1,
    kTagTest = 2,
    kTagNoise = 3,
    kTagSplit = 4,
    kTagAux = 5,
    kTagModel = 6,
    kTagTrain = 7,
};

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
        }
    }
}

std::string noise_source_name(NoiseSource s) {
    switch (s) {
        case NoiseSource::fashion05: return "fashion05";
        case NoiseSource::fashion06: return "fashion06";
        case NoiseSource::symmetric: return "symmetric";
        case NoiseSource::file: return "file";
        case NoiseSource::estimate: return "estimate";
    }
    return "?";
}

NoiseSource noise_source_from_name(const std::string& name) {
    if (name == "fashion05") return NoiseSource::fashion05;
    if (name == "fashion06") return NoiseSource::fashion06;
    if (name == "symmetric") return NoiseSource::symmetric;
    if (name == "file") return NoiseSource::file;
    if (name == "estimate") return NoiseSource::estimate;
    throw std::invalid_argument("config: unknown noise source '" + name + "'");
}

TransitionMatrix resolve_truth(const NoiseSpec& noise, std::size_t n_classes) {
    switch (noise.source) {
        case NoiseSource::fashion05:
        case NoiseSource::fashion06: {
            TransitionMatrix t = TransitionMatrix::known_matrix(noise_source_name(noise.source));
            if (t.n_classes() != n_classes) {
                throw std::invalid_argument("noise: " + noise_source_name(noise.source) + " is " +
                                            std::to_string(t.n_classes()) + "-class but the dataset has " +
                                            std::to_string(n_classes));
            }
            return t;
        }
        case NoiseSource::symmetric:
            return TransitionMatrix::symmetric(n_classes, noise.rho);
        case NoiseSource::file: {
            TransitionMatrix t = TransitionMatrix::load_csv(noise.path);
            if (t.n_classes() != n_classes) {
                throw std::invalid_argument("noise: matrix in " + noise.path + " is " +
                                            std::to_string(t.n_classes()) + "-class but the dataset has " +
                                            std::to_string(n_classes));
            }
            return t;
        }
        case NoiseSource::estimate:
            throw std::logic_error("resolve_truth called for estimate source");
    }
    throw std::logic_error("resolve_truth: bad source");
}

AggregateReport single_run_aggregate(const MetricsReport& r) {
    AggregateReport agg;
    agg.n_runs = 1;
    auto one = [](std::optional<double> v) {
        AggregateStat s;
        if (v) {
            s.mean = v;
            s.n_defined = 1;
        } else {
            s.n_excluded = 1;
        }
        return s;
    };
    agg.accuracy = one(r.accuracy);
    agg.top1_accuracy = one(r.top1_accuracy);
    agg.precision_macro = one(r.precision_macro);
    agg.recall_macro = one(r.recall_macro);
    agg.f1_macro = one(r.f1_macro);
    return agg;
}

void finalize_aggregates(ExperimentResult& result) {
    for (MethodOutcome& mo : result.methods) {
        if (mo.runs.size() >= 2) {
            mo.aggregate = aggregate(mo.runs);
        } else if (mo.runs.size() == 1) {
            mo.aggregate = single_run_aggregate(mo.runs[0]);
        } else {
            mo.aggregate = AggregateReport{};
        }
    }
    double total = 0.0;
    std::size_t n = 0;
    for (const RunEstimate& e : result.estimates) {
        if (e.mse_vs_truth) {
            total += *e.mse_vs_truth;
            ++n;
        }
    }
    if (n > 0) {
        result.mean_estimate_mse = total / static_cast<double>(n);
    } else {
        result.mean_estimate_mse.reset();
    }
}

const AggregateStat* stat_by_name(const AggregateReport& agg, const std::string& metric) {
    if (metric == "accuracy") return &agg.accuracy;
    if (metric == "top1_accuracy") return &agg.top1_accuracy;
    if (metric == "precision") return &agg.precision_macro;
    if (metric == "recall") return &agg.recall_macro;
    if (metric == "f1") return &agg.f1_macro;
    return nullptr;
}

constexpr const char* kMetricNames[] = {"accuracy", "top1_accuracy", "precision", "recall", "f1"};
constexpr const char* kMetricLabels[] = {"Accuracy", "Top1 Acc", "Precision", "Recall", "F1 Score"};

json tensor_rows_to_json(const Tensor& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m.at(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Tensor tensor_rows_from_json(const json& rows) {
    const std::size_t n = rows.size();
    if (n == 0) throw std::invalid_argument("result: empty matrix");
    Tensor m({n, rows[0].size()});
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != m.cols()) throw std::invalid_argument("result: ragged matrix");
        for (std::size_t j = 0; j < m.cols(); ++j) m.at(i, j) = rows[i][j].get<double>();
    }
    return m;
}

json opt_to_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

std::optional<double> opt_from_json(const json& v) {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::ce_baseline: return "ce_baseline";
        case Method::reweighted: return "reweighted";
        case Method::backward: return "backward";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "ce_baseline") return Method::ce_baseline;
    if (name == "reweighted") return Method::reweighted;
    if (name == "backward") return Method::backward;
    throw std::invalid_argument("config: unknown method '" + name + "'");
}

void ExperimentConfig::validate() const {
    if (n_runs < 1) throw std::invalid_argument("config: n_runs must be >= 1");
    if (methods.empty()) throw std::invalid_argument("config: at least one method must be selected");
    if (architecture != "small_cnn" && architecture != "enhanced_cnn") {
        throw std::invalid_argument("config: unknown architecture '" + architecture + "'");
    }
    if (dataset.synthetic) {
        if (dataset.test_per_class == 0) {
            throw std::invalid_argument("config: test_per_class must be positive");
        }
    } else if (dataset.train_file.empty() || dataset.test_file.empty()) {
        throw std::invalid_argument("config: dataset needs either a synthetic spec or train/test files");
    }
    if (noise.source == NoiseSource::symmetric && !(noise.rho >= 0.0 && noise.rho < 1.0)) {
        throw std::invalid_argument("config: symmetric noise needs rho in [0, 1)");
    }
    if (noise.source == NoiseSource::file && noise.path.empty()) {
        throw std::invalid_argument("config: file noise source needs a path");
    }
    train.validate();
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
    }
    check_keys(root, {"dataset", "noise", "methods", "normalization", "architecture", "n_runs",
                      "base_seed", "train", "estimate_t"},
               "top level");

    ExperimentConfig cfg;
    if (root.contains("dataset")) {
        const json& d = root["dataset"];
        check_keys(d, {"synthetic", "train_file", "test_file"}, "dataset");
        if (d.contains("synthetic")) {
            const json& s = d["synthetic"];
            check_keys(s, {"n_classes", "samples_per_class", "test_per_class", "height", "width",
                           "channels", "template_contrast", "pixel_noise_sigma"},
                       "dataset.synthetic");
            SyntheticSpec spec;
            if (s.contains("n_classes")) spec.n_classes = s["n_classes"].get<std::size_t>();
            if (s.contains("samples_per_class")) spec.samples_per_class = s["samples_per_class"].get<std::size_t>();
            if (s.contains("height")) spec.height = s["height"].get<std::size_t>();
            if (s.contains("width")) spec.width = s["width"].get<std::size_t>();
            if (s.contains("channels")) spec.channels = s["channels"].get<std::size_t>();
            if (s.contains("template_contrast")) spec.template_contrast = s["template_contrast"].get<double>();
            if (s.contains("pixel_noise_sigma")) spec.pixel_noise_sigma = s["pixel_noise_sigma"].get<double>();
            cfg.dataset.synthetic = spec;
            if (s.contains("test_per_class")) cfg.dataset.test_per_class = s["test_per_class"].get<std::size_t>();
        }
        if (d.contains("train_file")) cfg.dataset.train_file = d["train_file"].get<std::string>();
        if (d.contains("test_file")) cfg.dataset.test_file = d["test_file"].get<std::string>();
        if (d.contains("synthetic") && (!cfg.dataset.train_file.empty() || !cfg.dataset.test_file.empty())) {
            throw std::invalid_argument("config: dataset cannot be both synthetic and file-backed");
        }
        if (!d.contains("synthetic")) cfg.dataset.synthetic.reset();
    }
    if (root.contains("noise")) {
        const json& n = root["noise"];
        check_keys(n, {"source", "rho", "path"}, "noise");
        if (n.contains("source")) cfg.noise.source = noise_source_from_name(n["source"].get<std::string>());
        if (n.contains("rho")) cfg.noise.rho = n["rho"].get<double>();
        if (n.contains("path")) cfg.noise.path = n["path"].get<std::string>();
    }
    if (root.contains("methods")) {
        cfg.methods.clear();
        for (const json& m : root["methods"]) cfg.methods.push_back(method_from_name(m.get<std::string>()));
    }
    if (root.contains("normalization")) cfg.normalization = root["normalization"].get<bool>();
    if (root.contains("architecture")) cfg.architecture = root["architecture"].get<std::string>();
    if (root.contains("n_runs")) cfg.n_runs = root["n_runs"].get<std::size_t>();
    if (root.contains("base_seed")) cfg.base_seed = root["base_seed"].get<std::uint64_t>();
    if (root.contains("train")) {
        const json& t = root["train"];
        check_keys(t, {"batch_size", "max_epochs", "patience", "val_fraction", "learning_rate",
                       "beta1", "beta2", "adam_epsilon"},
                   "train");
        if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<std::size_t>();
        if (t.contains("max_epochs")) cfg.train.max_epochs = t["max_epochs"].get<std::size_t>();
        if (t.contains("patience")) cfg.train.patience = t["patience"].get<std::size_t>();
        if (t.contains("val_fraction")) cfg.train.val_fraction = t["val_fraction"].get<double>();
        if (t.contains("learning_rate")) cfg.train.adam.alpha = t["learning_rate"].get<double>();
        if (t.contains("beta1")) cfg.train.adam.beta1 = t["beta1"].get<double>();
        if (t.contains("beta2")) cfg.train.adam.beta2 = t["beta2"].get<double>();
        if (t.contains("adam_epsilon")) cfg.train.adam.epsilon = t["adam_epsilon"].get<double>();
    }
    if (root.contains("estimate_t")) cfg.estimate_t = root["estimate_t"].get<bool>();
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::string ExperimentConfig::to_json_text() const {
    json root;
    if (dataset.synthetic) {
        const SyntheticSpec& s = *dataset.synthetic;
        root["dataset"]["synthetic"] = {
            {"n_classes", s.n_classes},
            {"samples_per_class", s.samples_per_class},
            {"test_per_class", dataset.test_per_class},
            {"height", s.height},
            {"width", s.width},
            {"channels", s.channels},
            {"template_contrast", s.template_contrast},
            {"pixel_noise_sigma", s.pixel_noise_sigma},
        };
    } else {
        root["dataset"] = {{"train_file", dataset.train_file}, {"test_file", dataset.test_file}};
    }
    root["noise"] = {{"source", noise_source_name(noise.source)}};
    if (noise.source == NoiseSource::symmetric) root["noise"]["rho"] = noise.rho;
    if (noise.source == NoiseSource::file) root["noise"]["path"] = noise.path;
    json methods_json = json::array();
    for (Method m : methods) methods_json.push_back(method_name(m));
    root["methods"] = std::move(methods_json);
    root["normalization"] = normalization;
    root["architecture"] = architecture;
    root["n_runs"] = n_runs;
    root["base_seed"] = base_seed;
    root["train"] = {
        {"batch_size", train.batch_size},   {"max_epochs", train.max_epochs},
        {"patience", train.patience},       {"val_fraction", train.val_fraction},
        {"learning_rate", train.adam.alpha}, {"beta1", train.adam.beta1},
        {"beta2", train.adam.beta2},        {"adam_epsilon", train.adam.epsilon},
    };
    root["estimate_t"] = estimate_t;
    return root.dump(2) + "\n";
}

History train_method(Model& model, const LabeledDataset& train_set, const LabeledDataset& val_set,
                     Method method, const std::optional<TransitionMatrix>& T,
                     const TrainConfig& config) {
    LossSpec spec;
    switch (method) {
        case Method::ce_baseline:
            spec.kind = LossKind::cross_entropy;
            break;
        case Method::reweighted:
            spec.kind = LossKind::reweighted;
            spec.T = T;
            break;
        case Method::backward:
            spec.kind = LossKind::backward;
            spec.T = T;
            break;
    }
    if (method == Method::reweighted) {
        // posterior warm start: fit with plain cross-entropy, then reweight
        TrainConfig warm = config;
        warm.seed = derive_seed(config.seed, 0x3aa);
        train(model, train_set, val_set, Loss(LossSpec{}), warm);
    }
    return train(model, train_set, val_set, Loss(std::move(spec)), config);
}

MetricsReport evaluate_model(const Model& model, const LabeledDataset& test) {
    test.validate();
    const Tensor probs = model.predict_proba(test.images);
    std::vector<std::uint8_t> pred(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < probs.cols(); ++j) {
            if (probs.at(i, j) > probs.at(i, best)) best = j;
        }
        pred[i] = static_cast<std::uint8_t>(best);
    }
    return compute_metrics(confusion(test.labels, pred, test.n_classes));
}

std::optional<double> ExperimentResult::growth_vs_baseline(Method m, const std::string& metric) const {
    const MethodOutcome* baseline = nullptr;
    const MethodOutcome* target = nullptr;
    for (const MethodOutcome& mo : methods) {
        if (mo.method == Method::ce_baseline) baseline = &mo;
        if (mo.method == m) target = &mo;
    }
    if (!baseline || !target || baseline == target) return std::nullopt;
    const AggregateStat* bs = stat_by_name(baseline->aggregate, metric);
    const AggregateStat* ts = stat_by_name(target->aggregate, metric);
    if (!bs || !ts || !bs->mean || !ts->mean || !(*bs->mean > 0.0)) return std::nullopt;
    return growth_rate(*bs->mean, *ts->mean);
}

std::string ExperimentResult::to_json_text() const {
    json root;
    root["config"] = json::parse(config.to_json_text());

    json methods_json = json::array();
    for (const MethodOutcome& mo : methods) {
        json runs = json::array();
        for (const MetricsReport& r : mo.runs) {
            json run;
            run["accuracy"] = r.accuracy;
            run["top1_accuracy"] = r.top1_accuracy;
            run["precision"] = opt_to_json(r.precision_macro);
            run["recall"] = opt_to_json(r.recall_macro);
            run["f1"] = opt_to_json(r.f1_macro);
            run["undefined_classes"] = r.undefined_classes;
            json cm = json::array();
            for (std::size_t a = 0; a < r.cm.n_classes; ++a) {
                json row = json::array();
                for (std::size_t p = 0; p < r.cm.n_classes; ++p) row.push_back(r.cm.at(a, p));
                cm.push_back(std::move(row));
            }
            run["confusion"] = std::move(cm);
            runs.push_back(std::move(run));
        }
        json agg;
        auto put_stat = [&](const char* name, const AggregateStat& s) {
            agg[name] = {{"mean", opt_to_json(s.mean)},
                         {"std", opt_to_json(s.stddev)},
                         {"n_defined", s.n_defined},
                         {"n_excluded", s.n_excluded}};
        };
        put_stat("accuracy", mo.aggregate.accuracy);
        put_stat("top1_accuracy", mo.aggregate.top1_accuracy);
        put_stat("precision", mo.aggregate.precision_macro);
        put_stat("recall", mo.aggregate.recall_macro);
        put_stat("f1", mo.aggregate.f1_macro);

        json growth;
        for (const char* metric : kMetricNames) {
            growth[metric] = opt_to_json(growth_vs_baseline(mo.method, metric));
        }
        methods_json.push_back({{"method", method_name(mo.method)},
                                {"runs", std::move(runs)},
                                {"aggregate", std::move(agg)},
                                {"growth_rate", std::move(growth)}});
    }
    root["methods"] = std::move(methods_json);

    if (!estimates.empty()) {
        json est = json::array();
        for (const RunEstimate& e : estimates) {
            est.push_back({{"matrix", tensor_rows_to_json(e.matrix)},
                           {"condition_number", e.condition_number},
                           {"mse", opt_to_json(e.mse_vs_truth)}});
        }
        root["estimation"] = {{"per_run", std::move(est)}, {"mean_mse", opt_to_json(mean_estimate_mse)}};
    }
    root["run_seconds"] = run_seconds;
    return root.dump(2) + "\n";
}

ExperimentResult ExperimentResult::from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("result: JSON parse error: ") + e.what());
    }

    ExperimentResult result;
    result.config = ExperimentConfig::from_json_text(root.at("config").dump());
    for (const json& mj : root.at("methods")) {
        MethodOutcome mo;
        mo.method = method_from_name(mj.at("method").get<std::string>());
        for (const json& run : mj.at("runs")) {
            const json& cm_json = run.at("confusion");
            ConfusionMatrix cm;
            cm.n_classes = cm_json.size();
            cm.counts.resize(cm.n_classes * cm.n_classes);
            for (std::size_t a = 0; a < cm.n_classes; ++a) {
                for (std::size_t p = 0; p < cm.n_classes; ++p) {
                    cm.counts[a * cm.n_classes + p] = cm_json[a][p].get<std::size_t>();
                }
            }
            mo.runs.push_back(compute_metrics(cm));
        }
        result.methods.push_back(std::move(mo));
    }
    if (root.contains("estimation")) {
        for (const json& e : root["estimation"].at("per_run")) {
            RunEstimate re;
            re.matrix = tensor_rows_from_json(e.at("matrix"));
            re.condition_number = e.at("condition_number").get<double>();
            re.mse_vs_truth = opt_from_json(e.at("mse"));
            result.estimates.push_back(std::move(re));
        }
    }
    if (root.contains("run_seconds")) {
        result.run_seconds = root["run_seconds"].get<std::vector<double>>();
    }
    finalize_aggregates(result);
    return result;
}

void ExperimentResult::save_json(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("result: cannot write " + path);
    out << to_json_text();
}

ExperimentResult ExperimentResult::load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("result: cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::string ExperimentResult::to_csv() const {
    std::ostringstream os;
    os << "method,metric,mean,std,n_defined,n_excluded,growth_rate_pct\n";
    auto num = [](const std::optional<double>& v) {
        if (!v) return std::string("nan");
        return detail::format_double(*v);
    };
    for (const MethodOutcome& mo : methods) {
        for (const char* metric : kMetricNames) {
            const AggregateStat* s = stat_by_name(mo.aggregate, metric);
            os << method_name(mo.method) << ',' << metric << ',' << num(s->mean) << ','
               << num(s->stddev) << ',' << s->n_defined << ',' << s->n_excluded << ',';
            const std::optional<double> growth = growth_vs_baseline(mo.method, metric);
            if (growth) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.2f", *growth);
                os << buf;
            }
            os << '\n';
        }
    }
    return os.str();
}

std::string ExperimentResult::to_markdown() const {
    std::ostringstream os;
    const bool has_baseline =
        std::any_of(methods.begin(), methods.end(),
                    [](const MethodOutcome& mo) { return mo.method == Method::ce_baseline; });

    os << "| Score |";
    for (const MethodOutcome& mo : methods) {
        os << ' ' << method_name(mo.method) << " |";
        if (has_baseline && mo.method != Method::ce_baseline) os << " Growth Rate |";
    }
    os << "\n|---|";
    for (const MethodOutcome& mo : methods) {
        os << "---|";
        if (has_baseline && mo.method != Method::ce_baseline) os << "---|";
    }
    os << '\n';

    auto fmt3 = [](const std::optional<double>& v) {
        if (!v) return std::string("nan");
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", *v);
        return std::string(buf);
    };
    for (std::size_t mi = 0; mi < 5; ++mi) {
        os << "| " << kMetricLabels[mi] << " |";
        for (const MethodOutcome& mo : methods) {
            const AggregateStat* s = stat_by_name(mo.aggregate, kMetricNames[mi]);
            os << ' ' << fmt3(s->mean);
            if (s->stddev) os << " +- " << fmt3(s->stddev);
            os << " |";
            if (has_baseline && mo.method != Method::ce_baseline) {
                const std::optional<double> growth = growth_vs_baseline(mo.method, kMetricNames[mi]);
                if (growth) {
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), "%.2f", *growth);
                    os << ' ' << buf << " |";
                } else {
                    os << " - |";
                }
            }
        }
        os << '\n';
    }

    if (!estimates.empty()) {
        os << "\nTransition-matrix estimation";
        if (mean_estimate_mse) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), " (mean MSE vs truth: %.6g)", *mean_estimate_mse);
            os << buf;
        }
        os << ":\n\n";
        for (std::size_t r = 0; r < estimates.size(); ++r) {
            char buf[96];
            if (estimates[r].mse_vs_truth) {
                std::snprintf(buf, sizeof(buf), "- run %zu: mse %.6g, condition number %.4g\n", r,
                              *estimates[r].mse_vs_truth, estimates[r].condition_number);
            } else {
                std::snprintf(buf, sizeof(buf), "- run %zu: condition number %.4g\n", r,
                              estimates[r].condition_number);
            }
            os << buf;
        }
        os << "\nEstimate from run 0:\n\n```\n";
        const Tensor& m = estimates[0].matrix;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < m.cols(); ++j) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%10.6f", m.at(i, j));
                os << buf << (j + 1 < m.cols() ? " " : "");
            }
            os << '\n';
        }
        os << "```\n";
    }
    return os.str();
}

namespace {

void scale_pixels(LabeledDataset& ds, double factor) {
    for (double& v : ds.images.values()) v *= factor;
}

double max_pixel(const LabeledDataset& ds) {
    double m = 0.0;
    for (double v : ds.images.values()) m = std::max(m, v);
    return m;
}

struct RunArtifacts {
    std::vector<MetricsReport> per_method;
    std::optional<RunEstimate> estimate;
};

RunArtifacts run_once(const ExperimentConfig& config, std::uint64_t run_seed) {
    LabeledDataset train_pool, test;
    if (config.dataset.synthetic) {
        const SyntheticSpec& spec = *config.dataset.synthetic;
        train_pool = generate_synthetic(spec, derive_seed(run_seed, kTagTrainPool));
        SyntheticSpec test_spec = spec;
        test_spec.samples_per_class = config.dataset.test_per_class;
        test = generate_synthetic(test_spec, derive_seed(run_seed, kTagTest));
        if (!config.normalization) {
            // Raw-byte scale: what training looks like when the 1/255
            // preprocessing step is skipped.
            scale_pixels(train_pool, 255.0);
            scale_pixels(test, 255.0);
        }
    } else {
        train_pool = LabeledDataset::load(config.dataset.train_file);
        test = LabeledDataset::load(config.dataset.test_file);
        if (config.normalization && (max_pixel(train_pool) > 1.0 || max_pixel(test) > 1.0)) {
            train_pool.images = normalize(train_pool.images);
            test.images = normalize(test.images);
        }
    }
    if (train_pool.n_classes != test.n_classes) {
        throw std::invalid_argument("experiment: train/test class counts differ");
    }
    const std::vector<std::uint8_t> clean_test_labels = test.labels;

    std::optional<TransitionMatrix> truth;
    if (config.noise.source != NoiseSource::estimate) {
        truth = resolve_truth(config.noise, train_pool.n_classes);
        auto [noisy, record] = inject_noise(train_pool.labels, *truth, derive_seed(run_seed, kTagNoise));
        train_pool.labels = std::move(noisy);
        train_pool.quality = LabelQuality::noisy;
    }

    const SplitPair parts =
        split(train_pool, 1.0 - config.train.val_fraction, derive_seed(run_seed, kTagSplit));

    RunArtifacts artifacts;
    std::optional<TransitionMatrix> estimated;
    const bool estimation_active = config.estimate_t || config.noise.source == NoiseSource::estimate;
    if (estimation_active) {
        const Shape3 shape = train_pool.sample_shape();
        Model aux = Model::build("small_cnn", shape, train_pool.n_classes, derive_seed(run_seed, kTagAux));
        TrainConfig aux_cfg = config.train;
        aux_cfg.max_epochs = std::min<std::size_t>(20, config.train.max_epochs);
        aux_cfg.seed = derive_seed(run_seed, kTagAux, 1);
        train(aux, parts.train, parts.val, Loss(LossSpec{}), aux_cfg);
        const EstimationReport report =
            estimate_transition(aux, train_pool.images, train_pool.labels);
        RunEstimate re{report.estimated.entries(), report.condition_number, std::nullopt};
        if (truth) re.mse_vs_truth = mse(truth->entries(), report.estimated.entries());
        artifacts.estimate = std::move(re);
        estimated = report.estimated;
    }

    const std::optional<TransitionMatrix>& correction_T =
        config.noise.source == NoiseSource::estimate ? estimated : truth;

    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
        const Method m = config.methods[mi];
        Model model = Model::build(config.architecture, train_pool.sample_shape(),
                                   train_pool.n_classes, derive_seed(run_seed, kTagModel, mi));
        TrainConfig tc = config.train;
        tc.seed = derive_seed(run_seed, kTagTrain, mi);
        train_method(model, parts.train, parts.val, m, correction_T, tc);
        artifacts.per_method.push_back(evaluate_model(model, test));
    }

    if (test.labels != clean_test_labels) {
        throw std::logic_error("experiment: test labels were mutated");
    }
    return artifacts;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
    config.validate();

    ExperimentResult result;
    result.config = config;
    for (Method m : config.methods) result.methods.push_back(MethodOutcome{m, {}, {}});

    const std::string partial_path =
        out_dir.empty() ? "" : (std::filesystem::path(out_dir) / "result.partial.json").string();

    for (std::size_t run = 0; run < config.n_runs; ++run) {
        const std::uint64_t run_seed = config.base_seed + run;
        const auto started = std::chrono::steady_clock::now();
        RunArtifacts artifacts;
        try {
            artifacts = run_once(config, run_seed);
        } catch (const std::exception& e) {
            if (!partial_path.empty()) {
                finalize_aggregates(result);
                result.save_json(partial_path);
            }
            throw std::runtime_error("experiment: run " + std::to_string(run) + " (seed " +
                                     std::to_string(run_seed) + ") failed: " + e.what());
        }
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
        result.run_seconds.push_back(elapsed.count());
        for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
            result.methods[mi].runs.push_back(std::move(artifacts.per_method[mi]));
        }
        if (artifacts.estimate) result.estimates.push_back(std::move(*artifacts.estimate));

        finalize_aggregates(result);
        if (!partial_path.empty()) result.save_json(partial_path);
    }
    return result;
}

}  // namespace noisylab
