#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "morphbench/augment.hpp"
#include "morphbench/checkpoint.hpp"
#include "morphbench/data.hpp"
#include "morphbench/models.hpp"

namespace morphbench::training {

enum class ModelKind { WSL, SSL, SSR, ICL };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct TrainingSetup {
    ModelKind model = ModelKind::WSL;
    bool augment = false;
    augment::CropStrategy crop = augment::CropStrategy::one_crop;
    bool icl_double_augment = false;  // ICL only
    std::uint64_t seed = 0;

    // e.g. "ICL_aug_multi_crop" ("+dbl" suffix for the double-augment variants)
    std::string id() const;
};

struct OptimizerConfig {
    double learning_rate = 0.0001;
    int epochs = 50;
    int batch_size = 256;

    bool operator==(const OptimizerConfig&) const = default;
};

struct EarlyStopConfig {
    double relative_margin = 0.05;  // delta
    int patience = 3;               // k consecutive epochs
};

struct RunRecord {
    TrainingSetup setup;
    std::string run_id;
    std::vector<double> train_loss;          // per epoch
    std::vector<double> val_loss;            // per epoch (early-stop signal)
    std::vector<double> val_accuracy;        // WSL/SSR only, else empty
    std::vector<double> val_reconstruction;  // SSL/SSR only, else empty
    std::vector<double> epoch_seconds;
    double total_seconds = 0.0;
    int epochs_completed = 0;
    bool stopped_early = false;
    bool failed = false;
    std::string failure_reason;
    std::string checkpoint_path;

    std::string to_json() const;
    static RunRecord from_json(const std::string& text);
};

struct EmbeddingSet {
    int latent_dim = 0;
    std::vector<float> matrix;  // N x latent_dim, row-major
    std::vector<SampleMeta> meta;
    std::string model_id;
    std::string setup_id;
    std::string checkpoint_checksum;
    double split_val_fraction = 0.1;
    std::uint64_t split_seed = 0;

    std::size_t rows() const { return meta.size(); }
    const float* row(std::size_t i) const { return &matrix[i * static_cast<std::size_t>(latent_dim)]; }
};

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& dir);
EmbeddingSet load_embeddings(const std::filesystem::path& dir);

// Plain Adam with per-tensor first/second moment state.
class Adam {
  public:
    Adam(std::vector<nn::ParamRef<float>> params, double learning_rate);

    void zero_grad();
    void step();

  private:
    std::vector<nn::ParamRef<float>> params_;
    std::vector<std::vector<float>> m_, v_;
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
};

// The four architectures behind one interface; only the configured kind is
// initialized. The encoder() accessor returns the representation backbone
// (the online network for ICL).
struct ModelBundle {
    ModelKind kind = ModelKind::WSL;
    models::BackboneConfig backbone_cfg;
    models::ByolConfig byol_cfg;
    models::WslModel<float> wsl;
    models::SslModel<float> ssl;
    models::SsrModel<float> ssr;
    models::IclModel<float> icl;

    void init(ModelKind k, const models::BackboneConfig& cfg, const models::ByolConfig& byol,
              std::uint64_t seed);
    models::Backbone<float>& encoder();
    std::vector<nn::ParamRef<float>> params();
};

struct TrainOptions {
    OptimizerConfig optimizer;
    EarlyStopConfig early_stop;
    models::BackboneConfig backbone = models::default_backbone();
    models::ByolConfig byol;
    augment::AugmentationPolicy policy;
    std::filesystem::path out_dir;  // run artifacts land here
};

struct TrainOutput {
    std::shared_ptr<ModelBundle> model;
    RunRecord record;
};

// True iff validation loss has exceeded (1+delta) * running minimum for the
// last `patience` consecutive epochs.
bool early_stop_check(const std::vector<double>& val_loss_history, const EarlyStopConfig& config);

TrainOutput train(const TrainingSetup& setup, const Dataset& dataset, const DatasetSplit& split,
                  const TrainOptions& options);

struct MatrixOptions {
    TrainOptions train;
    std::vector<ModelKind> models{ModelKind::WSL, ModelKind::SSL, ModelKind::SSR, ModelKind::ICL};
    bool include_icl_double_augment = false;
    std::uint64_t seed = 0;
    std::string dataset_checksum;  // part of every run id
};

std::vector<TrainingSetup> enumerate_setups(const MatrixOptions& options);
std::string run_id(const TrainingSetup& setup, const OptimizerConfig& optimizer,
                   const models::BackboneConfig& backbone, const std::string& dataset_checksum);

// Runs every setup, persisting runs/<run_id>/{record.json,checkpoint.ckpt}.
// Completed runs are skipped on rerun; failing runs are recorded and the
// matrix continues.
std::vector<RunRecord> train_matrix(const Dataset& dataset, const DatasetSplit& split,
                                    const MatrixOptions& options,
                                    const std::filesystem::path& runs_dir);

// Deterministic encoder pass over the dataset in order, no augmentation.
EmbeddingSet embed_dataset(ModelBundle& model, const Dataset& dataset,
                           const std::string& setup_id);
EmbeddingSet embed_from_checkpoint(const std::filesystem::path& checkpoint,
                                   const Dataset& dataset);

struct ByolSearchRanges {
    std::pair<int, int> projection_size{32, 512};          // log-uniform integers
    std::pair<int, int> projection_hidden_size{32, 4096};  // log-uniform integers
    std::pair<double, double> moving_average_decay{0.9, 0.999};
    bool constrain_equal = false;  // projection_hidden_size = projection_size
};

struct ByolTrial {
    models::ByolConfig config;
    double final_val_loss = 0.0;
};

struct ByolSearchResult {
    models::ByolConfig best;
    std::vector<ByolTrial> trials;
};

// Samples n_trials configs, trains each for a short budget, returns the
// argmin of final validation loss (first trial wins ties).
ByolSearchResult byol_hyperparameter_search(const Dataset& dataset, const DatasetSplit& split,
                                            int n_trials, const ByolSearchRanges& ranges,
                                            const TrainOptions& base_options,
                                            std::uint64_t seed,
                                            const std::optional<std::filesystem::path>& log_path);

}  // namespace morphbench::training
