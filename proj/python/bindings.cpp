#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "morphbench/cluster_eval.hpp"
#include "morphbench/config.hpp"
#include "morphbench/dataset_io.hpp"
#include "morphbench/pipeline.hpp"
#include "morphbench/probe_eval.hpp"
#include "morphbench/report.hpp"
#include "morphbench/similarity_eval.hpp"
#include "morphbench/synthetic.hpp"
#include "morphbench/training.hpp"

namespace py = pybind11;
using namespace morphbench;

namespace {

py::array_t<float> dataset_images(const Dataset& d) {
    py::array_t<float> out({static_cast<py::ssize_t>(d.size()), py::ssize_t{64}, py::ssize_t{64}});
    auto buf = out.mutable_unchecked<3>();
    for (std::size_t i = 0; i < d.size(); ++i)
        for (int r = 0; r < 64; ++r)
            for (int c = 0; c < 64; ++c)
                buf(static_cast<py::ssize_t>(i), r, c) = d.images[i].at(r, c);
    return out;
}

ImageCrop crop_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2 || arr.shape(0) != 64 || arr.shape(1) != 64)
        throw DataError("expected a 64x64 float array");
    ImageCrop crop;
    auto buf = arr.unchecked<2>();
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c) crop.at(r, c) = buf(r, c);
    return crop;
}

py::array_t<float> crop_to_array(const ImageCrop& crop) {
    py::array_t<float> out({py::ssize_t{64}, py::ssize_t{64}});
    auto buf = out.mutable_unchecked<2>();
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c) buf(r, c) = crop.at(r, c);
    return out;
}

py::dict meta_to_dict(const SampleMeta& m) {
    py::dict d;
    d["sample_id"] = m.sample_id;
    d["cell_line"] = m.cell_line;
    d["drug"] = m.drug;
    d["concentration_level"] = m.concentration_level;
    d["time_point"] = m.time_point;
    d["label"] = to_string(m.label);
    d["replicate"] = m.replicate;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "morphbench core: representation-learning benchmark on cell-image crops";

    py::register_exception<DataError>(m, "DataError");
    py::register_exception<NumericError>(m, "NumericError");

    // ---- data ----
    py::class_<SyntheticConfig>(m, "SyntheticConfig")
        .def(py::init<>())
        .def_readwrite("n_cell_lines", &SyntheticConfig::n_cell_lines)
        .def_readwrite("n_drugs", &SyntheticConfig::n_drugs)
        .def_readwrite("images_per_condition", &SyntheticConfig::images_per_condition)
        .def_readwrite("fragmentation_per_drug", &SyntheticConfig::fragmentation_per_drug)
        .def_readwrite("noise_sigma", &SyntheticConfig::noise_sigma)
        .def_readwrite("seed", &SyntheticConfig::seed);

    py::class_<Dataset>(m, "Dataset")
        .def("__len__", &Dataset::size)
        .def("images", &dataset_images)
        .def("meta", [](const Dataset& d) {
            py::list out;
            for (const auto& m_ : d.meta) out.append(meta_to_dict(m_));
            return out;
        });

    m.def("generate_synthetic", &generate_synthetic, py::arg("config"));
    m.def("balance_subset", &balance_subset, py::arg("dataset"), py::arg("seed"));
    m.def("save_dataset",
          [](const Dataset& d, const std::filesystem::path& dir) { save_dataset(d, dir); },
          py::arg("dataset"), py::arg("dir"));
    m.def("load_dataset", &load_dataset, py::arg("dir"));

    // ---- augment ----
    py::class_<augment::AugmentationPolicy>(m, "AugmentationPolicy")
        .def(py::init<>())
        .def_readwrite("hflip_probability", &augment::AugmentationPolicy::hflip_probability)
        .def_readwrite("blur_probability", &augment::AugmentationPolicy::blur_probability)
        .def_readwrite("blur_kernel_px", &augment::AugmentationPolicy::blur_kernel_px)
        .def_property(
            "resized_crop_scale",
            [](const augment::AugmentationPolicy& p) {
                return py::make_tuple(p.resized_crop_scale.first, p.resized_crop_scale.second);
            },
            [](augment::AugmentationPolicy& p, std::pair<double, double> v) {
                p.resized_crop_scale = v;
            });

    m.def(
        "apply_augmentations",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& img,
           const augment::AugmentationPolicy& policy, std::uint64_t seed) {
            Rng rng(seed);
            return crop_to_array(augment::apply_augmentations(crop_from_array(img), policy, rng));
        },
        py::arg("image"), py::arg("policy"), py::arg("seed"));

    m.def(
        "make_views",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& img,
           const std::string& strategy, std::optional<augment::AugmentationPolicy> policy,
           std::uint64_t seed) {
            Rng rng(seed);
            auto views = augment::make_views(crop_from_array(img),
                                             augment::crop_strategy_from_string(strategy), policy,
                                             rng);
            py::list out;
            for (const auto& v : views.views) out.append(crop_to_array(v));
            return out;
        },
        py::arg("image"), py::arg("strategy"), py::arg("policy"), py::arg("seed"));

    // ---- training ----
    py::class_<training::EmbeddingSet>(m, "EmbeddingSet")
        .def_readonly("latent_dim", &training::EmbeddingSet::latent_dim)
        .def_readonly("model_id", &training::EmbeddingSet::model_id)
        .def_readonly("setup_id", &training::EmbeddingSet::setup_id)
        .def("matrix",
             [](const training::EmbeddingSet& s) {
                 py::array_t<float> out({static_cast<py::ssize_t>(s.rows()),
                                         static_cast<py::ssize_t>(s.latent_dim)});
                 std::copy(s.matrix.begin(), s.matrix.end(), out.mutable_data());
                 return out;
             })
        .def("meta", [](const training::EmbeddingSet& s) {
            py::list out;
            for (const auto& m_ : s.meta) out.append(meta_to_dict(m_));
            return out;
        });

    m.def("load_embeddings", &training::load_embeddings, py::arg("dir"));
    m.def(
        "train_setup",
        [](const std::string& setup_text, const Dataset& dataset, double val_fraction,
           std::uint64_t seed, int epochs, int batch_size, double learning_rate,
           const std::filesystem::path& out_dir) {
            training::TrainingSetup setup;
            const auto comma1 = setup_text.find(',');
            const auto comma2 = setup_text.rfind(',');
            if (comma1 == std::string::npos || comma2 == comma1)
                throw DataError("setup must be MODEL,AUG,CROP");
            setup.model = training::model_kind_from_string(setup_text.substr(0, comma1));
            const std::string aug = setup_text.substr(comma1 + 1, comma2 - comma1 - 1);
            setup.augment = aug == "aug";
            setup.crop = augment::crop_strategy_from_string(setup_text.substr(comma2 + 1));
            setup.seed = seed;

            training::TrainOptions options;
            options.optimizer.epochs = epochs;
            options.optimizer.batch_size = batch_size;
            options.optimizer.learning_rate = learning_rate;
            options.out_dir = out_dir;
            auto split_ = split(dataset, val_fraction, seed);
            auto result = training::train(setup, dataset, split_, options);
            py::dict record;
            record["train_loss"] = result.record.train_loss;
            record["val_loss"] = result.record.val_loss;
            record["epochs_completed"] = result.record.epochs_completed;
            record["failed"] = result.record.failed;
            record["checkpoint_path"] = result.record.checkpoint_path;
            return record;
        },
        py::arg("setup"), py::arg("dataset"), py::arg("val_fraction") = 0.1, py::arg("seed") = 7,
        py::arg("epochs") = 2, py::arg("batch_size") = 64, py::arg("learning_rate") = 1e-4,
        py::arg("out_dir") = std::filesystem::path{});

    m.def(
        "embed",
        [](const std::filesystem::path& checkpoint, const Dataset& dataset) {
            return training::embed_from_checkpoint(checkpoint, dataset);
        },
        py::arg("checkpoint"), py::arg("dataset"));

    m.def("early_stop_check",
          [](const std::vector<double>& history, double margin, int patience) {
              training::EarlyStopConfig cfg{margin, patience};
              return training::early_stop_check(history, cfg);
          },
          py::arg("val_loss_history"), py::arg("relative_margin") = 0.05, py::arg("patience") = 3);

    // ---- similarity ----
    m.def(
        "pairwise_median_distance",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& b,
           const std::string& kind) {
            if (a.ndim() != 2 || b.ndim() != 2 || a.shape(1) != b.shape(1))
                throw DataError("expected two [n, d] arrays with equal d");
            std::vector<float> data;
            const auto na = static_cast<std::size_t>(a.shape(0));
            const auto nb = static_cast<std::size_t>(b.shape(0));
            const int dim = static_cast<int>(a.shape(1));
            data.insert(data.end(), a.data(), a.data() + na * static_cast<std::size_t>(dim));
            data.insert(data.end(), b.data(), b.data() + nb * static_cast<std::size_t>(dim));
            evalsim::RowSet ra{data.data(), dim, {}};
            evalsim::RowSet rb{data.data(), dim, {}};
            for (std::size_t i = 0; i < na; ++i) ra.rows.push_back(i);
            for (std::size_t i = 0; i < nb; ++i) rb.rows.push_back(na + i);
            return evalsim::pairwise_median_distance(ra, rb,
                                                     evalsim::distance_kind_from_string(kind));
        },
        py::arg("a"), py::arg("b"), py::arg("kind") = "euclidean");

    m.def("normalized_difference", &evalsim::normalized_difference, py::arg("d12"),
          py::arg("d1c"), py::arg("d2c"));

    // ---- probe ----
    m.def("roc_auc", &evalprobe::roc_auc_rank, py::arg("drug_scores"), py::arg("labels"));

    // ---- clustering ----
    m.def(
        "umap_reduce",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& x,
           int n_neighbors, int n_components, double min_dist, std::uint64_t seed) {
            if (x.ndim() != 2) throw DataError("expected [n, d] array");
            const auto n = static_cast<std::size_t>(x.shape(0));
            const int dim = static_cast<int>(x.shape(1));
            std::vector<float> data(x.data(), x.data() + n * static_cast<std::size_t>(dim));
            evalcluster::ReductionConfig cfg;
            cfg.n_neighbors = n_neighbors;
            cfg.n_components = n_components;
            cfg.min_dist = min_dist;
            cfg.seed = seed;
            auto reduced = evalcluster::reduce(data, n, dim, cfg);
            py::array_t<double> out({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(n_components)});
            std::copy(reduced.begin(), reduced.end(), out.mutable_data());
            return out;
        },
        py::arg("x"), py::arg("n_neighbors") = 15, py::arg("n_components") = 2,
        py::arg("min_dist") = 0.1, py::arg("seed") = 0);

    m.def(
        "hdbscan_cluster",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           int min_cluster_size) {
            if (x.ndim() != 2) throw DataError("expected [n, d] array");
            const auto n = static_cast<std::size_t>(x.shape(0));
            const int dim = static_cast<int>(x.shape(1));
            std::vector<double> data(x.data(), x.data() + n * static_cast<std::size_t>(dim));
            evalcluster::ClusterConfig cfg{min_cluster_size};
            return evalcluster::cluster(data, n, dim, cfg);
        },
        py::arg("x"), py::arg("min_cluster_size") = 5);

    m.def(
        "partition_metrics",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const std::vector<int>& labels) {
            const auto n = static_cast<std::size_t>(x.shape(0));
            const int dim = static_cast<int>(x.shape(1));
            std::vector<double> data(x.data(), x.data() + n * static_cast<std::size_t>(dim));
            auto metrics = evalcluster::partition_metrics(data, n, dim, labels);
            py::dict out;
            out["n_clusters"] = metrics.n_clusters;
            out["noise_pct"] = metrics.noise_pct;
            out["silhouette"] = metrics.silhouette ? py::cast(*metrics.silhouette) : py::none();
            out["davies_bouldin"] =
                metrics.davies_bouldin ? py::cast(*metrics.davies_bouldin) : py::none();
            return out;
        },
        py::arg("x"), py::arg("labels"));

    // ---- pipeline ----
    m.def(
        "run_pipeline",
        [](const std::string& profile, const std::filesystem::path& out_root,
           std::optional<std::uint64_t> seed) {
            ExperimentConfig cfg = ExperimentConfig::from_profile(profile);
            if (seed) {
                cfg.seed = *seed;
                cfg.data.seed = *seed;
            }
            auto result = pipeline::run_full_pipeline(cfg, out_root);
            py::dict out;
            out["n_runs"] = result.records.size();
            std::size_t failed = 0;
            for (const auto& r : result.records) failed += r.failed ? 1 : 0;
            out["n_failed"] = failed;
            out["report_dir"] = result.report_dir.string();
            return out;
        },
        py::arg("profile"), py::arg("out_root"), py::arg("seed") = std::nullopt);
}
