// Python bindings for the main operations: transition matrices and noise
// injection, synthetic data, model building/training/inference, corrected
// losses, transition estimation, metrics, and the experiment runner.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>

#include "noisylab/dataset.hpp"
#include "noisylab/estimation.hpp"
#include "noisylab/harness.hpp"
#include "noisylab/losses.hpp"
#include "noisylab/metrics.hpp"
#include "noisylab/model.hpp"
#include "noisylab/train.hpp"
#include "noisylab/transition.hpp"

namespace py = pybind11;
using namespace noisylab;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::memcpy(out.mutable_data(), t.data(), t.size() * sizeof(double));
    return out;
}

Tensor from_numpy(const py::array& arr_in) {
    auto arr = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(arr_in);
    if (!arr) throw std::invalid_argument("expected a numeric array");
    std::vector<std::size_t> shape(arr.ndim());
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[i] = static_cast<std::size_t>(arr.shape(i));
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return Tensor(std::move(shape), std::move(data));
}

std::vector<std::uint8_t> labels_from_numpy(const py::array& arr_in) {
    auto arr = py::array_t<long, py::array::c_style | py::array::forcecast>::ensure(arr_in);
    if (!arr) throw std::invalid_argument("expected an integer label array");
    std::vector<std::uint8_t> labels(arr.size());
    const long* p = arr.data();
    for (py::ssize_t i = 0; i < arr.size(); ++i) {
        if (p[i] < 0 || p[i] > 255) throw std::invalid_argument("label out of byte range");
        labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(p[i]);
    }
    return labels;
}

py::array_t<std::uint8_t> labels_to_numpy(const std::vector<std::uint8_t>& labels) {
    return py::array_t<std::uint8_t>(static_cast<py::ssize_t>(labels.size()), labels.data());
}

py::object opt_to_py(const std::optional<double>& v) {
    if (v) return py::float_(*v);
    return py::none();
}

LossSpec make_loss_spec(const std::string& kind, const std::optional<TransitionMatrix>& T,
                        double epsilon, double mix_lambda, double cond_threshold) {
    LossSpec spec;
    spec.kind = loss_kind_from_name(kind == "ce" ? "cross_entropy" : kind);
    spec.T = T;
    spec.epsilon = epsilon;
    spec.mix_lambda = mix_lambda;
    spec.cond_threshold = cond_threshold;
    spec.validate();
    return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Learning image classifiers under class-conditional label noise";

    py::class_<TransitionMatrix>(m, "TransitionMatrix")
        .def_static("from_rows", [](const py::array& rows) {
            return TransitionMatrix::from_rows(from_numpy(rows));
        })
        .def_static("known_matrix", &TransitionMatrix::known_matrix, py::arg("name"))
        .def_static("symmetric", &TransitionMatrix::symmetric, py::arg("n_classes"), py::arg("rho"))
        .def_static("identity", &TransitionMatrix::identity, py::arg("n_classes"))
        .def_static("load_csv", &TransitionMatrix::load_csv, py::arg("path"))
        .def_property_readonly("n_classes", &TransitionMatrix::n_classes)
        .def("entries", [](const TransitionMatrix& t) { return to_numpy(t.entries()); })
        .def("flip_rates", &TransitionMatrix::flip_rates)
        .def("to_csv", &TransitionMatrix::to_csv)
        .def("save_csv", &TransitionMatrix::save_csv, py::arg("path"))
        .def("__eq__", [](const TransitionMatrix& a, const TransitionMatrix& b) { return a == b; })
        .def("__repr__", [](const TransitionMatrix& t) {
            return "TransitionMatrix(" + std::to_string(t.n_classes()) + " classes)";
        });

    m.def(
        "inject_noise",
        [](const py::array& labels, const TransitionMatrix& T, std::uint64_t seed) {
            const auto [noisy, record] = inject_noise(labels_from_numpy(labels), T, seed);
            py::dict rec;
            rec["seed"] = record.seed;
            rec["n_flipped"] = record.n_flipped;
            rec["empirical_matrix"] = to_numpy(record.empirical_matrix);
            return py::make_tuple(labels_to_numpy(noisy), rec);
        },
        py::arg("labels"), py::arg("T"), py::arg("seed"));

    py::class_<LabeledDataset>(m, "LabeledDataset")
        .def(py::init([](const py::array& images, const py::array& labels, std::size_t n_classes,
                         const std::string& quality, const std::string& name) {
                 LabeledDataset ds;
                 ds.images = from_numpy(images);
                 ds.labels = labels_from_numpy(labels);
                 ds.n_classes = n_classes;
                 ds.quality = quality == "noisy" ? LabelQuality::noisy : LabelQuality::clean;
                 ds.name = name;
                 ds.validate();
                 return ds;
             }),
             py::arg("images"), py::arg("labels"), py::arg("n_classes"), py::arg("quality") = "clean",
             py::arg("name") = "")
        .def_property_readonly("images", [](const LabeledDataset& ds) { return to_numpy(ds.images); })
        .def_property_readonly("labels",
                               [](const LabeledDataset& ds) { return labels_to_numpy(ds.labels); })
        .def_readonly("n_classes", &LabeledDataset::n_classes)
        .def_readonly("name", &LabeledDataset::name)
        .def_property_readonly("quality", [](const LabeledDataset& ds) {
            return ds.quality == LabelQuality::noisy ? "noisy" : "clean";
        })
        .def("__len__", &LabeledDataset::size)
        .def("save", &LabeledDataset::save, py::arg("path"))
        .def_static("load", &LabeledDataset::load, py::arg("path"))
        .def("with_labels",
             [](const LabeledDataset& ds, const py::array& labels) {
                 LabeledDataset out = ds;
                 out.labels = labels_from_numpy(labels);
                 out.quality = LabelQuality::noisy;
                 out.validate();
                 return out;
             },
             py::arg("labels"));

    m.def(
        "generate_synthetic",
        [](std::size_t n_classes, std::size_t samples_per_class, std::size_t height,
           std::size_t width, std::size_t channels, double template_contrast,
           double pixel_noise_sigma, std::uint64_t seed) {
            SyntheticSpec spec{n_classes, samples_per_class, height,
                               width,     channels,          template_contrast,
                               pixel_noise_sigma};
            return generate_synthetic(spec, seed);
        },
        py::arg("n_classes") = 3, py::arg("samples_per_class") = 500, py::arg("height") = 16,
        py::arg("width") = 16, py::arg("channels") = 1, py::arg("template_contrast") = 1.0,
        py::arg("pixel_noise_sigma") = 0.25, py::arg("seed") = 0);

    m.def("normalize", [](const py::array& raw) { return to_numpy(normalize(from_numpy(raw))); },
          py::arg("raw"));

    m.def(
        "split",
        [](const LabeledDataset& ds, double fraction, std::uint64_t seed) {
            SplitPair p = split(ds, fraction, seed);
            return py::make_tuple(std::move(p.train), std::move(p.val));
        },
        py::arg("dataset"), py::arg("fraction"), py::arg("seed"));

    py::class_<History>(m, "History")
        .def_property_readonly("epochs",
                               [](const History& h) {
                                   py::list out;
                                   for (const EpochStats& e : h.epochs) {
                                       out.append(py::make_tuple(e.epoch, e.train_loss, e.val_loss));
                                   }
                                   return out;
                               })
        .def_readonly("best_epoch", &History::best_epoch)
        .def_readonly("best_val_loss", &History::best_val_loss)
        .def("to_csv", &History::to_csv);

    py::class_<Model>(m, "Model")
        .def_static(
            "build",
            [](const std::string& architecture,
               std::tuple<std::size_t, std::size_t, std::size_t> input_shape, std::size_t n_classes,
               std::uint64_t seed) {
                return Model::build(architecture,
                                    Shape3{std::get<0>(input_shape), std::get<1>(input_shape),
                                           std::get<2>(input_shape)},
                                    n_classes, seed);
            },
            py::arg("architecture"), py::arg("input_shape"), py::arg("n_classes"), py::arg("seed") = 0)
        .def_property_readonly("n_classes", &Model::n_classes)
        .def_property_readonly("architecture_name", &Model::architecture_name)
        .def_property_readonly("parameter_count", &Model::parameter_count)
        .def("predict_proba",
             [](const Model& model, const py::array& images) {
                 return to_numpy(model.predict_proba(from_numpy(images)));
             },
             py::arg("images"))
        .def("save", &Model::save, py::arg("path"))
        .def_static("load", &Model::load, py::arg("path"));

    m.def(
        "train",
        [](Model& model, const LabeledDataset& train_set, const LabeledDataset& val_set,
           const std::string& loss, const std::optional<TransitionMatrix>& T, std::size_t batch_size,
           std::size_t max_epochs, std::size_t patience, std::uint64_t seed, double learning_rate) {
            TrainConfig cfg;
            cfg.batch_size = batch_size;
            cfg.max_epochs = max_epochs;
            cfg.patience = patience;
            cfg.seed = seed;
            cfg.adam.alpha = learning_rate;
            return train(model, train_set, val_set, Loss(make_loss_spec(loss, T, 1e-7, 0.2, 1e4)),
                         cfg);
        },
        py::arg("model"), py::arg("train_set"), py::arg("val_set"), py::arg("loss") = "cross_entropy",
        py::arg("T") = py::none(), py::arg("batch_size") = 32, py::arg("max_epochs") = 30,
        py::arg("patience") = 5, py::arg("seed") = 0, py::arg("learning_rate") = 0.001);

    m.def(
        "fgsm_example",
        [](const Model& model, const py::array& x, std::uint8_t y_true, double eps,
           const std::string& loss, const std::optional<TransitionMatrix>& T) {
            return to_numpy(fgsm_example(model, from_numpy(x), y_true,
                                         Loss(make_loss_spec(loss, T, 1e-7, 0.2, 1e4)), eps));
        },
        py::arg("model"), py::arg("x"), py::arg("y_true"), py::arg("eps"),
        py::arg("loss") = "cross_entropy", py::arg("T") = py::none());

    const auto loss_result_to_py = [](const LossResult& r) {
        py::dict out;
        out["value"] = r.value;
        out["grad_logits"] = to_numpy(r.grad_logits);
        out["weights"] = r.weights ? py::cast(*r.weights) : py::object(py::none());
        return out;
    };

    m.def(
        "cross_entropy",
        [loss_result_to_py](const py::array& probs, const py::array& labels) {
            return loss_result_to_py(cross_entropy(from_numpy(probs), labels_from_numpy(labels)));
        },
        py::arg("probs"), py::arg("labels"));
    m.def(
        "nll",
        [loss_result_to_py](const py::array& log_probs, const py::array& labels) {
            return loss_result_to_py(nll(from_numpy(log_probs), labels_from_numpy(labels)));
        },
        py::arg("log_probs"), py::arg("labels"));
    m.def(
        "beta_weight",
        [](const py::array& probs, const py::array& labels, const TransitionMatrix& T,
           double epsilon) {
            return beta_weight(from_numpy(probs), labels_from_numpy(labels), T, epsilon);
        },
        py::arg("probs"), py::arg("noisy_labels"), py::arg("T"), py::arg("epsilon") = 1e-7);
    m.def(
        "reweighted_ce",
        [loss_result_to_py](const py::array& probs, const py::array& labels,
                            const TransitionMatrix& T, double epsilon) {
            return loss_result_to_py(
                reweighted_ce(from_numpy(probs), labels_from_numpy(labels), T, epsilon));
        },
        py::arg("probs"), py::arg("noisy_labels"), py::arg("T"), py::arg("epsilon") = 1e-7);
    m.def(
        "backward_corrected",
        [loss_result_to_py](const py::array& probs, const py::array& labels,
                            const TransitionMatrix& T, double mix_lambda, double cond_threshold) {
            return loss_result_to_py(backward_corrected(from_numpy(probs), labels_from_numpy(labels),
                                                        T, mix_lambda, cond_threshold));
        },
        py::arg("probs"), py::arg("noisy_labels"), py::arg("T"), py::arg("mix_lambda") = 0.2,
        py::arg("cond_threshold") = 1e4);
    m.def(
        "stabilized_inverse",
        [](const TransitionMatrix& T, double mix_lambda, double cond_threshold) {
            const StabilizedInverse inv = stabilized_inverse(T, mix_lambda, cond_threshold);
            py::dict out;
            out["inverse"] = to_numpy(inv.inverse);
            out["used"] = to_numpy(inv.used);
            out["mixed"] = inv.mixed;
            out["condition_number"] = inv.condition_number;
            return out;
        },
        py::arg("T"), py::arg("mix_lambda") = 0.2, py::arg("cond_threshold") = 1e4);

    m.def(
        "estimate_transition",
        [](const Model& model, const py::array& images, const py::array& labels) {
            const EstimationReport report =
                estimate_transition(model, from_numpy(images), labels_from_numpy(labels));
            py::dict out;
            out["estimated"] = report.estimated;
            out["per_class_counts"] = report.per_class_counts;
            out["condition_number"] = report.condition_number;
            out["mse_vs_truth"] = opt_to_py(report.mse_vs_truth);
            return out;
        },
        py::arg("model"), py::arg("images"), py::arg("noisy_labels"));
    m.def(
        "mse", [](const py::array& a, const py::array& b) { return mse(from_numpy(a), from_numpy(b)); },
        py::arg("a"), py::arg("b"));

    m.def(
        "confusion",
        [](const py::array& y_true, const py::array& y_pred, std::size_t n_classes) {
            const ConfusionMatrix cm =
                confusion(labels_from_numpy(y_true), labels_from_numpy(y_pred), n_classes);
            py::array_t<std::size_t> out({n_classes, n_classes});
            std::memcpy(out.mutable_data(), cm.counts.data(), cm.counts.size() * sizeof(std::size_t));
            return out;
        },
        py::arg("y_true"), py::arg("y_pred"), py::arg("n_classes"));
    m.def(
        "compute_metrics",
        [](const py::array& counts) {
            auto arr = py::array_t<long, py::array::c_style | py::array::forcecast>::ensure(counts);
            if (!arr || arr.ndim() != 2 || arr.shape(0) != arr.shape(1)) {
                throw std::invalid_argument("expected a square confusion matrix");
            }
            ConfusionMatrix cm;
            cm.n_classes = static_cast<std::size_t>(arr.shape(0));
            cm.counts.resize(cm.n_classes * cm.n_classes);
            for (py::ssize_t i = 0; i < arr.size(); ++i) {
                if (arr.data()[i] < 0) throw std::invalid_argument("negative count");
                cm.counts[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arr.data()[i]);
            }
            const MetricsReport r = compute_metrics(cm);
            py::dict out;
            out["accuracy"] = r.accuracy;
            out["top1_accuracy"] = r.top1_accuracy;
            out["precision"] = opt_to_py(r.precision_macro);
            out["recall"] = opt_to_py(r.recall_macro);
            out["f1"] = opt_to_py(r.f1_macro);
            py::list per_class;
            for (std::size_t k = 0; k < cm.n_classes; ++k) {
                py::dict row;
                row["precision"] = opt_to_py(r.per_class_precision[k]);
                row["recall"] = opt_to_py(r.per_class_recall[k]);
                row["f1"] = opt_to_py(r.per_class_f1[k]);
                per_class.append(std::move(row));
            }
            out["per_class"] = std::move(per_class);
            out["undefined_classes"] = r.undefined_classes;
            return out;
        },
        py::arg("confusion"));
    m.def("growth_rate", &growth_rate, py::arg("baseline"), py::arg("improved"));

    m.def(
        "evaluate",
        [](const Model& model, const LabeledDataset& test) {
            const MetricsReport r = evaluate_model(model, test);
            py::dict out;
            out["accuracy"] = r.accuracy;
            out["top1_accuracy"] = r.top1_accuracy;
            out["precision"] = opt_to_py(r.precision_macro);
            out["recall"] = opt_to_py(r.recall_macro);
            out["f1"] = opt_to_py(r.f1_macro);
            return out;
        },
        py::arg("model"), py::arg("test"));

    m.def(
        "run_experiment",
        [](const std::string& config_json, const std::string& out_dir) {
            const ExperimentConfig cfg = ExperimentConfig::from_json_text(config_json);
            const ExperimentResult result = run_experiment(cfg, out_dir);
            py::dict out;
            out["json"] = result.to_json_text();
            out["csv"] = result.to_csv();
            out["markdown"] = result.to_markdown();
            return out;
        },
        py::arg("config_json"), py::arg("out_dir") = "");

    m.def("_debug_labels", []() {
        std::vector<std::uint8_t> v = {7, 1, 2, 9};
        std::printf("C++ side: %d %d %d %d\n", v[0], v[1], v[2], v[3]);
        return labels_to_numpy(v);
    });
    m.def("_debug_ds_labels", [](const LabeledDataset& ds) {
        std::printf("C++ ds.labels:");
        for (std::size_t i = 0; i < std::min<std::size_t>(ds.labels.size(), 9); ++i)
            std::printf(" %d", ds.labels[i]);
        std::printf("\n");
        return labels_to_numpy(ds.labels);
    });

    m.attr("__version__") = "0.1.0";
}
