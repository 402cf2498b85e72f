#include "morphbench/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "morphbench/csv.hpp"
#include "morphbench/dataset_io.hpp"
#include "morphbench/errors.hpp"
#include "morphbench/hash.hpp"

namespace morphbench::training {

using augment::CropStrategy;
using models::Tensor;

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::WSL: return "WSL";
        case ModelKind::SSL: return "SSL";
        case ModelKind::SSR: return "SSR";
        case ModelKind::ICL: return "ICL";
    }
    return "WSL";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "WSL") return ModelKind::WSL;
    if (s == "SSL") return ModelKind::SSL;
    if (s == "SSR") return ModelKind::SSR;
    if (s == "ICL") return ModelKind::ICL;
    throw DataError("unknown model kind: '" + s + "'");
}

std::string TrainingSetup::id() const {
    std::string out = to_string(model);
    out += augment ? "_aug" : "_no_aug";
    out += "_" + augment::to_string(crop);
    if (model == ModelKind::ICL && icl_double_augment) out += "+dbl";
    return out;
}

// ---------------------------------------------------------------------------
// RunRecord JSON
// ---------------------------------------------------------------------------

std::string RunRecord::to_json() const {
    nlohmann::json j;
    j["setup"] = {{"model", to_string(setup.model)},
                  {"augment", setup.augment},
                  {"crop", augment::to_string(setup.crop)},
                  {"icl_double_augment", setup.icl_double_augment},
                  {"seed", setup.seed}};
    j["run_id"] = run_id;
    j["train_loss"] = train_loss;
    j["val_loss"] = val_loss;
    j["val_accuracy"] = val_accuracy;
    j["val_reconstruction"] = val_reconstruction;
    j["epoch_seconds"] = epoch_seconds;
    j["total_seconds"] = total_seconds;
    j["epochs_completed"] = epochs_completed;
    j["stopped_early"] = stopped_early;
    j["failed"] = failed;
    j["failure_reason"] = failure_reason;
    j["checkpoint_path"] = checkpoint_path;
    return j.dump(2);
}

RunRecord RunRecord::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    RunRecord r;
    r.setup.model = model_kind_from_string(j.at("setup").at("model"));
    r.setup.augment = j.at("setup").at("augment");
    r.setup.crop = augment::crop_strategy_from_string(j.at("setup").at("crop"));
    r.setup.icl_double_augment = j.at("setup").at("icl_double_augment");
    r.setup.seed = j.at("setup").at("seed");
    r.run_id = j.at("run_id");
    r.train_loss = j.at("train_loss").get<std::vector<double>>();
    r.val_loss = j.at("val_loss").get<std::vector<double>>();
    r.val_accuracy = j.at("val_accuracy").get<std::vector<double>>();
    r.val_reconstruction = j.at("val_reconstruction").get<std::vector<double>>();
    r.epoch_seconds = j.at("epoch_seconds").get<std::vector<double>>();
    r.total_seconds = j.at("total_seconds");
    r.epochs_completed = j.at("epochs_completed");
    r.stopped_early = j.at("stopped_early");
    r.failed = j.at("failed");
    r.failure_reason = j.at("failure_reason");
    r.checkpoint_path = j.at("checkpoint_path");
    return r;
}

// ---------------------------------------------------------------------------
// Embeddings on disk
// ---------------------------------------------------------------------------

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_f32(dir / "embeddings.f32", set.matrix);

    csv::Table t;
    t.header = {"sample_id", "cell_line", "drug", "concentration_level",
                "time_point", "label", "replicate"};
    char buf[32];
    for (const auto& m : set.meta) {
        std::snprintf(buf, sizeof(buf), "%.17g", m.time_point);
        t.rows.push_back({m.sample_id, m.cell_line, m.drug, std::to_string(m.concentration_level),
                          buf, morphbench::to_string(m.label), m.replicate});
    }
    csv::write_file(dir / "meta.csv", t);

    nlohmann::json manifest;
    manifest["n"] = set.rows();
    manifest["latent_dim"] = set.latent_dim;
    manifest["model_id"] = set.model_id;
    manifest["setup_id"] = set.setup_id;
    manifest["checkpoint_checksum"] = set.checkpoint_checksum;
    manifest["split"] = {{"val_fraction", set.split_val_fraction}, {"seed", set.split_seed}};
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
}

EmbeddingSet load_embeddings(const std::filesystem::path& dir) {
    EmbeddingSet set;
    std::ifstream in(dir / "manifest.json");
    if (!in) throw DataError("missing embeddings manifest in " + dir.string());
    nlohmann::json manifest = nlohmann::json::parse(in);
    set.latent_dim = manifest.at("latent_dim");
    set.model_id = manifest.at("model_id");
    set.setup_id = manifest.at("setup_id");
    set.checkpoint_checksum = manifest.value("checkpoint_checksum", "");
    set.split_val_fraction = manifest.at("split").at("val_fraction");
    set.split_seed = manifest.at("split").at("seed");

    set.matrix = read_f32(dir / "embeddings.f32");
    auto t = csv::read_file(dir / "meta.csv");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        SampleMeta m;
        m.sample_id = t.at(i, "sample_id");
        m.cell_line = t.at(i, "cell_line");
        m.drug = t.at(i, "drug");
        m.concentration_level = std::stoi(t.at(i, "concentration_level"));
        m.time_point = std::stod(t.at(i, "time_point"));
        m.label = label_from_string(t.at(i, "label"));
        m.replicate = t.at(i, "replicate");
        set.meta.push_back(std::move(m));
    }
    if (set.matrix.size() != set.rows() * static_cast<std::size_t>(set.latent_dim))
        throw DataError("embeddings matrix does not match meta rows: " + dir.string());
    return set;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(std::vector<nn::ParamRef<float>> params, double learning_rate)
    : params_(std::move(params)), lr_(learning_rate) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i].value->numel(), 0.0f);
        v_[i].assign(params_[i].value->numel(), 0.0f);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.grad->zero();
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& value = params_[i].value->data;
        const auto& grad = params_[i].grad->data;
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double g = grad[k];
            m[k] = static_cast<float>(beta1_ * m[k] + (1.0 - beta1_) * g);
            v[k] = static_cast<float>(beta2_ * v[k] + (1.0 - beta2_) * g * g);
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            value[k] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

// ---------------------------------------------------------------------------
// ModelBundle
// ---------------------------------------------------------------------------

void ModelBundle::init(ModelKind k, const models::BackboneConfig& cfg,
                       const models::ByolConfig& byol, std::uint64_t seed) {
    kind = k;
    backbone_cfg = cfg;
    byol_cfg = byol;
    Rng rng(seed ^ 0x5eedf00dull);
    switch (kind) {
        case ModelKind::WSL: wsl.init(cfg, rng); break;
        case ModelKind::SSL: ssl.init(cfg, rng); break;
        case ModelKind::SSR: ssr.init(cfg, rng); break;
        case ModelKind::ICL: icl.init(cfg, byol, rng); break;
    }
}

models::Backbone<float>& ModelBundle::encoder() {
    switch (kind) {
        case ModelKind::WSL: return wsl.backbone;
        case ModelKind::SSL: return ssl.backbone;
        case ModelKind::SSR: return ssr.backbone;
        case ModelKind::ICL: return icl.online_backbone;
    }
    return wsl.backbone;
}

std::vector<nn::ParamRef<float>> ModelBundle::params() {
    switch (kind) {
        case ModelKind::WSL: return wsl.params();
        case ModelKind::SSL: return ssl.params();
        case ModelKind::SSR: return ssr.params();
        case ModelKind::ICL: return icl.params();
    }
    return {};
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

bool early_stop_check(const std::vector<double>& val_loss_history, const EarlyStopConfig& config) {
    if (val_loss_history.empty()) return false;
    const double margin = 1.0 + config.relative_margin;
    double running_min = val_loss_history.front();
    int consecutive = 0;
    for (double v : val_loss_history) {
        running_min = std::min(running_min, v);
        if (v > margin * running_min) ++consecutive;
        else consecutive = 0;
    }
    return consecutive >= config.patience;
}

namespace {

struct ViewBatch {
    std::vector<ImageCrop> views;    // supervised/autoencoder inputs
    std::vector<int> labels;         // aligned with views
    std::vector<ImageCrop> partner;  // ICL: second view per row
};

// Expands one batch of samples into model inputs according to the setup.
ViewBatch build_views(const Dataset& dataset, const std::vector<std::size_t>& rows,
                      const TrainingSetup& setup, const augment::AugmentationPolicy& policy,
                      Rng& rng) {
    ViewBatch out;
    const std::optional<augment::AugmentationPolicy> maybe_policy =
        setup.augment ? std::optional<augment::AugmentationPolicy>(policy) : std::nullopt;

    for (std::size_t row : rows) {
        const ImageCrop& img = dataset.images[row];
        const int label = models::class_index(dataset.meta[row].label);

        if (setup.model != ModelKind::ICL) {
            auto views = augment::make_views(img, setup.crop, maybe_policy, rng,
                                             dataset.meta[row].sample_id);
            for (auto& v : views.views) {
                out.views.push_back(std::move(v));
                out.labels.push_back(label);
            }
            continue;
        }

        // ICL: one pair per view; the partner is an independently augmented
        // take of the (optionally pre-augmented) source image.
        ImageCrop source = img;
        if (setup.augment && setup.icl_double_augment)
            source = augment::apply_augmentations(source, policy, rng);

        if (setup.crop == CropStrategy::one_crop) {
            if (setup.augment) {
                auto [a, b] = augment::byol_view_pair(source, policy, false, rng);
                out.views.push_back(std::move(a));
                out.partner.push_back(std::move(b));
            } else {
                out.views.push_back(source);
                out.partner.push_back(source);
            }
            out.labels.push_back(label);
        } else {
            auto views = augment::make_views(source, setup.crop, maybe_policy, rng, "");
            for (auto& v : views.views) {
                out.views.push_back(std::move(v));
                out.partner.push_back(setup.augment
                                          ? augment::apply_augmentations(source, policy, rng)
                                          : source);
                out.labels.push_back(label);
            }
        }
    }
    return out;
}

std::vector<const ImageCrop*> crop_ptrs(const std::vector<ImageCrop>& crops) {
    std::vector<const ImageCrop*> out;
    out.reserve(crops.size());
    for (const auto& c : crops) out.push_back(&c);
    return out;
}

struct EpochStats {
    double loss = 0.0;
    std::size_t denom = 0;
};

}  // namespace

TrainOutput train(const TrainingSetup& setup, const Dataset& dataset, const DatasetSplit& split,
                  const TrainOptions& options) {
    using clock = std::chrono::steady_clock;

    TrainOutput out;
    out.model = std::make_shared<ModelBundle>();
    out.model->init(setup.model, options.backbone, options.byol, setup.seed);
    out.record.setup = setup;

    std::vector<std::size_t> train_rows, val_rows;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (split.is_val(dataset.meta[i].sample_id)) val_rows.push_back(i);
        else if (split.train_ids.count(dataset.meta[i].sample_id)) train_rows.push_back(i);
    }
    if (options.optimizer.epochs > 0 && train_rows.empty())
        throw DataError("train: empty training split");

    ModelBundle& model = *out.model;
    const int batch_size = std::max(1, options.optimizer.batch_size);
    const double lr = options.optimizer.learning_rate;

    // SSR keeps two optimizer states; the shared encoder appears in both.
    std::optional<Adam> adam, adam_cls, adam_dec;
    switch (setup.model) {
        case ModelKind::WSL: adam.emplace(model.wsl.params(), lr); break;
        case ModelKind::SSL: adam.emplace(model.ssl.params(), lr); break;
        case ModelKind::SSR:
            adam_cls.emplace(model.ssr.encoder_classifier_params(), lr);
            adam_dec.emplace(model.ssr.encoder_decoder_params(), lr);
            break;
        case ModelKind::ICL: adam.emplace(model.icl.online_params(), lr); break;
    }

    auto run_batches = [&](const std::vector<std::size_t>& rows, Rng& rng, bool update) {
        EpochStats stats;
        for (std::size_t start = 0; start < rows.size(); start += static_cast<std::size_t>(batch_size)) {
            const std::size_t stop = std::min(rows.size(), start + static_cast<std::size_t>(batch_size));
            std::vector<std::size_t> batch_rows(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                                rows.begin() + static_cast<std::ptrdiff_t>(stop));
            ViewBatch vb = build_views(dataset, batch_rows, setup, options.policy, rng);
            auto x = models::batch_from_crops<float>(crop_ptrs(vb.views));

            double batch_loss = 0.0;
            switch (setup.model) {
                case ModelKind::WSL: {
                    if (update) {
                        adam->zero_grad();
                        batch_loss = model.wsl.loss_backward(x, vb.labels);
                        adam->step();
                    } else {
                        batch_loss = models::ce_loss(model.wsl.forward_logits(x), vb.labels);
                    }
                    break;
                }
                case ModelKind::SSL: {
                    if (update) {
                        adam->zero_grad();
                        batch_loss = model.ssl.loss_backward(x);
                        adam->step();
                    } else {
                        batch_loss = models::bce_reconstruction_loss(model.ssl.reconstruct(x), x);
                    }
                    break;
                }
                case ModelKind::SSR: {
                    // Trained in turns: classifier step, then autoencoder step,
                    // both touching the shared encoder on the same batch.
                    if (update) {
                        adam_cls->zero_grad();
                        const double ce = model.ssr.classifier_loss_backward(x, vb.labels);
                        adam_cls->step();
                        adam_dec->zero_grad();
                        const double bce = model.ssr.autoencoder_loss_backward(x);
                        adam_dec->step();
                        batch_loss = ce + bce;
                    } else {
                        auto fr = model.ssr.forward(x, vb.labels);
                        batch_loss = static_cast<double>(fr.ce) + static_cast<double>(fr.bce);
                    }
                    break;
                }
                case ModelKind::ICL: {
                    auto xb = models::batch_from_crops<float>(crop_ptrs(vb.partner));
                    if (update) {
                        adam->zero_grad();
                        batch_loss = model.icl.loss_backward(x, xb);
                        adam->step();
                        model.icl.ema_step();
                    } else {
                        auto prediction = model.icl.online_prediction(x);
                        auto target = model.icl.target_projection(xb);
                        batch_loss = models::byol_loss(prediction, target);
                    }
                    break;
                }
            }
            if (!std::isfinite(batch_loss)) throw NumericError("non-finite loss");
            stats.loss += batch_loss * static_cast<double>(vb.views.size());
            stats.denom += vb.views.size();
        }
        if (stats.denom > 0) stats.loss /= static_cast<double>(stats.denom);
        return stats;
    };

    // Plain (unaugmented, one-crop) validation passes for accuracy and
    // reconstruction quality monitoring.
    auto plain_val_metrics = [&]() {
        if (val_rows.empty()) return;
        std::vector<const ImageCrop*> crops;
        std::vector<int> labels;
        for (std::size_t row : val_rows) {
            crops.push_back(&dataset.images[row]);
            labels.push_back(models::class_index(dataset.meta[row].label));
        }
        // Batched to bound memory.
        double correct = 0.0;
        double bce_sum = 0.0;
        std::size_t bce_batches = 0;
        for (std::size_t start = 0; start < crops.size(); start += static_cast<std::size_t>(batch_size)) {
            const std::size_t stop = std::min(crops.size(), start + static_cast<std::size_t>(batch_size));
            std::vector<const ImageCrop*> part(crops.begin() + static_cast<std::ptrdiff_t>(start),
                                               crops.begin() + static_cast<std::ptrdiff_t>(stop));
            std::vector<int> part_labels(labels.begin() + static_cast<std::ptrdiff_t>(start),
                                         labels.begin() + static_cast<std::ptrdiff_t>(stop));
            auto x = models::batch_from_crops<float>(part);
            if (setup.model == ModelKind::WSL || setup.model == ModelKind::SSR) {
                auto logits = setup.model == ModelKind::WSL
                                  ? model.wsl.forward_logits(x)
                                  : model.ssr.head.forward(model.ssr.backbone.forward(x));
                for (std::size_t i = 0; i < part.size(); ++i) {
                    const float* row = &logits.data[i * 2];
                    const int pred = row[1] > row[0] ? 1 : 0;
                    if (pred == part_labels[i]) correct += 1.0;
                }
            }
            if (setup.model == ModelKind::SSL || setup.model == ModelKind::SSR) {
                auto recon = setup.model == ModelKind::SSL
                                 ? model.ssl.reconstruct(x)
                                 : model.ssr.decoder.forward(model.ssr.backbone.forward(x));
                bce_sum += models::bce_reconstruction_loss(recon, x);
                ++bce_batches;
            }
        }
        if (setup.model == ModelKind::WSL || setup.model == ModelKind::SSR)
            out.record.val_accuracy.push_back(correct / static_cast<double>(crops.size()));
        if ((setup.model == ModelKind::SSL || setup.model == ModelKind::SSR) && bce_batches > 0)
            out.record.val_reconstruction.push_back(bce_sum / static_cast<double>(bce_batches));
    };

    const auto total_start = clock::now();
    try {
        for (int epoch = 0; epoch < options.optimizer.epochs; ++epoch) {
            const auto epoch_start = clock::now();

            std::vector<std::size_t> order = train_rows;
            Rng order_rng(setup.seed ^ fnv1a64("order/" + std::to_string(epoch)));
            order_rng.shuffle(order);
            Rng train_rng(setup.seed ^ fnv1a64("train/" + std::to_string(epoch)));
            EpochStats train_stats = run_batches(order, train_rng, /*update=*/true);

            Rng val_rng(setup.seed ^ fnv1a64("val/" + std::to_string(epoch)));
            EpochStats val_stats = run_batches(val_rows, val_rng, /*update=*/false);

            out.record.train_loss.push_back(train_stats.loss);
            out.record.val_loss.push_back(val_stats.denom > 0 ? val_stats.loss : train_stats.loss);
            plain_val_metrics();

            out.record.epoch_seconds.push_back(
                std::chrono::duration<double>(clock::now() - epoch_start).count());
            out.record.epochs_completed = epoch + 1;

            if (early_stop_check(out.record.val_loss, options.early_stop)) {
                out.record.stopped_early = true;
                break;
            }
        }
    } catch (const NumericError& e) {
        out.record.failed = true;
        out.record.failure_reason = e.what();
    }
    out.record.stopped_early =
        out.record.stopped_early || (!out.record.failed &&
                                     out.record.epochs_completed < options.optimizer.epochs);
    out.record.total_seconds = std::chrono::duration<double>(clock::now() - total_start).count();

    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        CheckpointInfo info;
        info.backbone = options.backbone;
        info.byol = options.byol;
        info.model = to_string(setup.model);
        info.setup_id = setup.id();
        info.epoch = out.record.epochs_completed;
        info.seed = setup.seed;
        const auto ckpt = options.out_dir / "checkpoint.ckpt";
        save_checkpoint(ckpt, info, model.params());
        out.record.checkpoint_path = ckpt.string();
        std::ofstream rec(options.out_dir / "record.json");
        rec << out.record.to_json() << "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

std::vector<TrainingSetup> enumerate_setups(const MatrixOptions& options) {
    std::vector<TrainingSetup> out;
    for (ModelKind model : options.models) {
        for (bool aug : {true, false}) {
            for (CropStrategy crop : {CropStrategy::multi_crop, CropStrategy::one_crop}) {
                TrainingSetup s;
                s.model = model;
                s.augment = aug;
                s.crop = crop;
                s.seed = options.seed;
                out.push_back(s);
                if (model == ModelKind::ICL && aug && options.include_icl_double_augment) {
                    s.icl_double_augment = true;
                    out.push_back(s);
                }
            }
        }
    }
    return out;
}

std::string run_id(const TrainingSetup& setup, const OptimizerConfig& optimizer,
                   const models::BackboneConfig& backbone, const std::string& dataset_checksum) {
    std::string blob = setup.id();
    blob += "|seed=" + std::to_string(setup.seed);
    blob += "|lr=" + std::to_string(optimizer.learning_rate);
    blob += "|epochs=" + std::to_string(optimizer.epochs);
    blob += "|batch=" + std::to_string(optimizer.batch_size);
    blob += "|backbone=" + backbone_config_to_json(backbone);
    blob += "|data=" + dataset_checksum;
    return setup.id() + "-" + to_hex(fnv1a64(blob)).substr(0, 12);
}

std::vector<RunRecord> train_matrix(const Dataset& dataset, const DatasetSplit& split,
                                    const MatrixOptions& options,
                                    const std::filesystem::path& runs_dir) {
    std::vector<RunRecord> records;
    for (const TrainingSetup& setup : enumerate_setups(options)) {
        const std::string id = run_id(setup, options.train.optimizer, options.train.backbone,
                                      options.dataset_checksum);
        const auto dir = runs_dir / id;
        const auto record_path = dir / "record.json";

        if (std::filesystem::exists(record_path)) {
            std::ifstream in(record_path);
            std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
            RunRecord prev = RunRecord::from_json(text);
            if (!prev.failed) {  // resume: completed runs are not retrained
                records.push_back(std::move(prev));
                continue;
            }
        }

        TrainOptions run_options = options.train;
        run_options.out_dir = dir;
        try {
            TrainOutput result = train(setup, dataset, split, run_options);
            result.record.run_id = id;
            std::ofstream rec(record_path);
            rec << result.record.to_json() << "\n";
            records.push_back(std::move(result.record));
        } catch (const std::exception& e) {
            RunRecord failed;
            failed.setup = setup;
            failed.run_id = id;
            failed.failed = true;
            failed.failure_reason = e.what();
            std::filesystem::create_directories(dir);
            std::ofstream rec(record_path);
            rec << failed.to_json() << "\n";
            records.push_back(std::move(failed));
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// Embedding export
// ---------------------------------------------------------------------------

EmbeddingSet embed_dataset(ModelBundle& model, const Dataset& dataset,
                           const std::string& setup_id) {
    EmbeddingSet set;
    set.latent_dim = model.backbone_cfg.latent_dim;
    set.model_id = to_string(model.kind);
    set.setup_id = setup_id;
    set.meta = dataset.meta;
    set.matrix.resize(dataset.size() * static_cast<std::size_t>(set.latent_dim));

    constexpr std::size_t kChunk = 256;
    auto& encoder = model.encoder();
    {
        std::vector<nn::ParamRef<float>> params;
        encoder.collect("backbone", params);
        models::check_finite(params);
    }
    for (std::size_t start = 0; start < dataset.size(); start += kChunk) {
        const std::size_t stop = std::min(dataset.size(), start + kChunk);
        std::vector<const ImageCrop*> crops;
        for (std::size_t i = start; i < stop; ++i) crops.push_back(&dataset.images[i]);
        auto latent = encoder.forward(models::batch_from_crops<float>(crops));
        if (!latent.all_finite()) throw NumericError("non-finite embedding row");
        std::copy(latent.data.begin(), latent.data.end(),
                  set.matrix.begin() + static_cast<std::ptrdiff_t>(start * static_cast<std::size_t>(set.latent_dim)));
    }
    return set;
}

EmbeddingSet embed_from_checkpoint(const std::filesystem::path& checkpoint,
                                   const Dataset& dataset) {
    CheckpointInfo info = peek_checkpoint(checkpoint);
    ModelBundle model;
    model.init(model_kind_from_string(info.model), info.backbone, info.byol, info.seed);
    load_checkpoint(checkpoint, model.params());
    EmbeddingSet set = embed_dataset(model, dataset, info.setup_id);
    set.checkpoint_checksum = checkpoint_checksum(checkpoint);
    return set;
}

// ---------------------------------------------------------------------------
// BYOL hyperparameter search
// ---------------------------------------------------------------------------

ByolSearchResult byol_hyperparameter_search(const Dataset& dataset, const DatasetSplit& split,
                                            int n_trials, const ByolSearchRanges& ranges,
                                            const TrainOptions& base_options,
                                            std::uint64_t seed,
                                            const std::optional<std::filesystem::path>& log_path) {
    if (n_trials < 1) throw DataError("byol search: n_trials must be >= 1");
    if (ranges.projection_size.first > ranges.projection_size.second ||
        ranges.projection_hidden_size.first > ranges.projection_hidden_size.second ||
        ranges.moving_average_decay.first > ranges.moving_average_decay.second)
        throw DataError("byol search: empty range");

    auto log_uniform_int = [](Rng& rng, std::pair<int, int> range) {
        const double lo = std::log(static_cast<double>(range.first));
        const double hi = std::log(static_cast<double>(range.second));
        return static_cast<int>(std::lround(std::exp(rng.uniform(lo, hi))));
    };

    ByolSearchResult result;
    std::size_t best_index = 0;
    for (int trial = 0; trial < n_trials; ++trial) {
        Rng rng(seed ^ fnv1a64("byol_trial/" + std::to_string(trial)));
        models::ByolConfig cfg;
        cfg.projection_size = log_uniform_int(rng, ranges.projection_size);
        cfg.projection_hidden_size = ranges.constrain_equal
                                         ? cfg.projection_size
                                         : log_uniform_int(rng, ranges.projection_hidden_size);
        cfg.moving_average_decay = rng.uniform(ranges.moving_average_decay.first,
                                               ranges.moving_average_decay.second);

        TrainingSetup setup;
        setup.model = ModelKind::ICL;
        setup.augment = true;
        setup.crop = CropStrategy::one_crop;
        setup.seed = seed;

        TrainOptions options = base_options;
        options.byol = cfg;
        options.out_dir.clear();  // search trials are not persisted as runs

        TrainOutput trained = train(setup, dataset, split, options);
        ByolTrial record;
        record.config = cfg;
        record.final_val_loss = trained.record.failed || trained.record.val_loss.empty()
                                    ? std::numeric_limits<double>::infinity()
                                    : trained.record.val_loss.back();
        result.trials.push_back(record);
        if (record.final_val_loss < result.trials[best_index].final_val_loss)
            best_index = result.trials.size() - 1;
    }
    result.best = result.trials[best_index].config;

    if (log_path) {
        csv::Table t;
        t.header = {"trial", "projection_size", "projection_hidden_size", "moving_average_decay",
                    "final_val_loss", "best"};
        char buf[32];
        for (std::size_t i = 0; i < result.trials.size(); ++i) {
            const auto& trial = result.trials[i];
            std::snprintf(buf, sizeof(buf), "%.17g", trial.final_val_loss);
            t.rows.push_back({std::to_string(i), std::to_string(trial.config.projection_size),
                              std::to_string(trial.config.projection_hidden_size),
                              std::to_string(trial.config.moving_average_decay), buf,
                              i == best_index ? "1" : "0"});
        }
        csv::write_file(*log_path, t);
    }
    return result;
}

}  // namespace morphbench::training
