// noisylab command-line interface: synthetic data generation, label-noise
// injection, transition-matrix estimation, training with corrected losses,
// evaluation, and the full multi-seed experiment pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "noisylab/dataset.hpp"
#include "noisylab/estimation.hpp"
#include "noisylab/harness.hpp"
#include "noisylab/losses.hpp"
#include "noisylab/metrics.hpp"
#include "noisylab/model.hpp"
#include "noisylab/train.hpp"
#include "noisylab/transition.hpp"

namespace {

using namespace noisylab;

TransitionMatrix parse_t_source(const std::string& source, std::size_t n_classes) {
    if (source == "fashion05" || source == "fashion06") {
        return TransitionMatrix::known_matrix(source);
    }
    if (source.rfind("symmetric:", 0) == 0) {
        return TransitionMatrix::symmetric(n_classes, std::stod(source.substr(10)));
    }
    TransitionMatrix t = TransitionMatrix::load_csv(source);
    if (t.n_classes() != n_classes) {
        throw std::invalid_argument("transition matrix in " + source + " is " +
                                    std::to_string(t.n_classes()) + "-class, dataset has " +
                                    std::to_string(n_classes));
    }
    return t;
}

void print_matrix(const Tensor& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            std::printf("%s%.8f", j ? "  " : "", m.at(i, j));
        }
        std::printf("\n");
    }
}

struct GenerateArgs {
    SyntheticSpec spec;
    std::uint64_t seed = 0;
    std::string out;
};

struct InjectArgs {
    std::string data, t_source, out;
    std::uint64_t seed = 0;
};

struct EstimateArgs {
    std::string data, truth, out;
    std::uint64_t seed = 0;
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
};

struct TrainArgs {
    std::string data, method = "ce", t_source, arch = "small_cnn", out, history;
    std::uint64_t seed = 0;
    TrainConfig config;
};

struct EvaluateArgs {
    std::string model, data, out;
};

struct ExperimentArgs {
    std::string config, out_dir = ".";
};

struct ReportArgs {
    std::string result, format = "md", out;
};

int cmd_generate(const GenerateArgs& a) {
    LabeledDataset ds = generate_synthetic(a.spec, a.seed);
    ds.save(a.out);
    std::printf("wrote %zu samples (%zux%zux%zu, %zu classes) to %s\n", ds.size(), a.spec.height,
                a.spec.width, a.spec.channels, a.spec.n_classes, a.out.c_str());
    return 0;
}

int cmd_inject(const InjectArgs& a) {
    LabeledDataset ds = LabeledDataset::load(a.data);
    const TransitionMatrix t = parse_t_source(a.t_source, ds.n_classes);
    auto [noisy, record] = inject_noise(ds.labels, t, a.seed);
    ds.labels = std::move(noisy);
    ds.quality = LabelQuality::noisy;
    ds.save(a.out);
    std::printf("flipped %zu of %zu labels (%.4f); empirical flip matrix:\n", record.n_flipped,
                ds.size(), static_cast<double>(record.n_flipped) / static_cast<double>(ds.size()));
    print_matrix(record.empirical_matrix);
    return 0;
}

int cmd_estimate(const EstimateArgs& a) {
    const LabeledDataset ds = LabeledDataset::load(a.data);
    const SplitPair parts = split(ds, 0.8, a.seed);

    Model aux = Model::build("small_cnn", ds.sample_shape(), ds.n_classes, derive_seed(a.seed, 0xa0));
    TrainConfig cfg;
    cfg.max_epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.seed = derive_seed(a.seed, 0xa1);
    train(aux, parts.train, parts.val, Loss(LossSpec{}), cfg);

    EstimationReport report = estimate_transition(aux, ds.images, ds.labels);
    if (!a.truth.empty()) {
        const TransitionMatrix truth = parse_t_source(a.truth, ds.n_classes);
        report.mse_vs_truth = mse(truth.entries(), report.estimated.entries());
    }
    print_matrix(report.estimated.entries());
    std::printf("%s\n", report.summary_line().c_str());
    if (!a.out.empty()) report.save_csv(a.out);
    return 0;
}

int cmd_train(const TrainArgs& a) {
    const LabeledDataset ds = LabeledDataset::load(a.data);
    const SplitPair parts = split(ds, 1.0 - a.config.val_fraction, derive_seed(a.seed, 0x51));

    const Method method = method_from_name(a.method == "ce" ? "ce_baseline" : a.method);
    std::optional<TransitionMatrix> t;
    if (method != Method::ce_baseline) {
        if (a.t_source.empty()) {
            throw std::invalid_argument("--t is required for the " + a.method + " loss");
        }
        t = parse_t_source(a.t_source, ds.n_classes);
    }

    Model model = Model::build(a.arch, ds.sample_shape(), ds.n_classes, derive_seed(a.seed, 0x52));
    TrainConfig cfg = a.config;
    cfg.seed = derive_seed(a.seed, 0x53);
    const History history = train_method(model, parts.train, parts.val, method, t, cfg);

    model.save(a.out);
    if (!a.history.empty()) history.save_csv(a.history);
    std::printf("trained %zu epochs, best epoch %zu (val loss %.6f); checkpoint %s\n",
                history.epochs.size(), history.best_epoch, history.best_val_loss, a.out.c_str());
    return 0;
}

int cmd_evaluate(const EvaluateArgs& a) {
    const Model model = Model::load(a.model);
    const LabeledDataset ds = LabeledDataset::load(a.data);
    const MetricsReport report = evaluate_model(model, ds);
    const std::string csv = metrics_to_csv(report);
    std::fputs(csv.c_str(), stdout);
    if (!report.undefined_classes.empty()) {
        std::printf("undefined_classes,");
        for (std::size_t i = 0; i < report.undefined_classes.size(); ++i) {
            std::printf("%s%zu", i ? ";" : "", report.undefined_classes[i]);
        }
        std::printf("\n");
    }
    if (!a.out.empty()) {
        std::ofstream f(a.out);
        if (!f) throw std::runtime_error("cannot write " + a.out);
        f << csv;
    }
    return 0;
}

int cmd_experiment(const ExperimentArgs& a) {
    const ExperimentConfig config = ExperimentConfig::from_json_file(a.config);
    std::filesystem::create_directories(a.out_dir);
    const ExperimentResult result = run_experiment(config, a.out_dir);

    const auto out_path = [&](const char* name) {
        return (std::filesystem::path(a.out_dir) / name).string();
    };
    result.save_json(out_path("result.json"));
    std::ofstream csv(out_path("result.csv"));
    csv << result.to_csv();
    std::ofstream md(out_path("result.md"));
    md << result.to_markdown();

    std::fputs(result.to_markdown().c_str(), stdout);
    std::printf("\nwrote %s, %s, %s\n", out_path("result.json").c_str(), out_path("result.csv").c_str(),
                out_path("result.md").c_str());
    return 0;
}

int cmd_report(const ReportArgs& a) {
    const ExperimentResult result = ExperimentResult::load_json(a.result);
    std::string rendered;
    if (a.format == "md" || a.format == "markdown") {
        rendered = result.to_markdown();
    } else if (a.format == "csv") {
        rendered = result.to_csv();
    } else {
        throw std::invalid_argument("unknown report format '" + a.format + "' (md or csv)");
    }
    if (a.out.empty()) {
        std::fputs(rendered.c_str(), stdout);
    } else {
        std::ofstream f(a.out);
        if (!f) throw std::runtime_error("cannot write " + a.out);
        f << rendered;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noisylab: image classification under class-conditional label noise"};
    app.require_subcommand(1);

    GenerateArgs gen;
    CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset file");
    generate->add_option("--classes", gen.spec.n_classes, "number of classes");
    generate->add_option("--per-class", gen.spec.samples_per_class, "samples per class");
    generate->add_option("--height", gen.spec.height, "image height");
    generate->add_option("--width", gen.spec.width, "image width");
    generate->add_option("--channels", gen.spec.channels, "image channels");
    generate->add_option("--contrast", gen.spec.template_contrast, "template contrast in (0, 1]");
    generate->add_option("--sigma", gen.spec.pixel_noise_sigma, "pixel noise sigma");
    generate->add_option("--seed", gen.seed, "generator seed");
    generate->add_option("--out", gen.out, "output .nlds path")->required();

    InjectArgs inj;
    CLI::App* inject = app.add_subcommand("inject", "apply label noise to a dataset file");
    inject->add_option("--data", inj.data, "input .nlds path")->required();
    inject->add_option("--t", inj.t_source, "fashion05 | fashion06 | symmetric:<rho> | matrix.csv")
        ->required();
    inject->add_option("--seed", inj.seed, "sampling seed");
    inject->add_option("--out", inj.out, "output .nlds path")->required();

    EstimateArgs est;
    CLI::App* estimate = app.add_subcommand("estimate-t", "estimate the transition matrix");
    estimate->add_option("--data", est.data, "noisy training data (.nlds)")->required();
    estimate->add_option("--truth", est.truth, "optional ground truth for an MSE report");
    estimate->add_option("--seed", est.seed, "seed");
    estimate->add_option("--epochs", est.epochs, "auxiliary model epoch cap");
    estimate->add_option("--batch-size", est.batch_size, "auxiliary training batch size");
    estimate->add_option("--out", est.out, "write the estimate as CSV");

    TrainArgs tr;
    CLI::App* train_cmd = app.add_subcommand("train", "train one method on one seed");
    train_cmd->add_option("--data", tr.data, "training data (.nlds)")->required();
    train_cmd->add_option("--method", tr.method, "ce | reweighted | backward");
    train_cmd->add_option("--t", tr.t_source, "transition matrix for corrected losses");
    train_cmd->add_option("--arch", tr.arch, "small_cnn | enhanced_cnn");
    train_cmd->add_option("--seed", tr.seed, "seed");
    train_cmd->add_option("--epochs", tr.config.max_epochs, "max epochs");
    train_cmd->add_option("--batch-size", tr.config.batch_size, "batch size");
    train_cmd->add_option("--patience", tr.config.patience, "early-stopping patience");
    train_cmd->add_option("--val-fraction", tr.config.val_fraction, "validation fraction");
    train_cmd->add_option("--lr", tr.config.adam.alpha, "Adam learning rate");
    train_cmd->add_option("--out", tr.out, "checkpoint output (.nlmd)")->required();
    train_cmd->add_option("--history", tr.history, "write per-epoch losses as CSV");

    EvaluateArgs ev;
    CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset");
    evaluate->add_option("--model", ev.model, "checkpoint (.nlmd)")->required();
    evaluate->add_option("--data", ev.data, "evaluation data (.nlds)")->required();
    evaluate->add_option("--out", ev.out, "also write the metrics CSV here");

    ExperimentArgs ex;
    CLI::App* experiment = app.add_subcommand("experiment", "run a full multi-seed experiment");
    experiment->add_option("--config", ex.config, "experiment config (JSON)")->required();
    experiment->add_option("--out-dir", ex.out_dir, "output directory");

    ReportArgs rep;
    CLI::App* report = app.add_subcommand("report", "render a result file");
    report->add_option("--result", rep.result, "result.json path")->required();
    report->add_option("--format", rep.format, "md | csv");
    report->add_option("--out", rep.out, "output path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help() << std::flush;
        return 1;
    }

    try {
        if (generate->parsed()) return cmd_generate(gen);
        if (inject->parsed()) return cmd_inject(inj);
        if (estimate->parsed()) return cmd_estimate(est);
        if (train_cmd->parsed()) return cmd_train(tr);
        if (evaluate->parsed()) return cmd_evaluate(ev);
        if (experiment->parsed()) return cmd_experiment(ex);
        if (report->parsed()) return cmd_report(rep);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
