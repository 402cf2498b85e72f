#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "morphbench/nets.hpp"
#include "morphbench/training.hpp"

namespace morphbench::evalprobe {

struct ProbeConfig {
    int hidden_units = 256;
    int epochs = 25;
    int batch_size = 1024;
    std::vector<double> learning_rates{0.1, 0.01, 0.001};
    std::vector<double> momentums{0.0, 0.9};
    std::vector<double> weight_decays{0.0, 1e-4, 1e-3};

    void check() const;
};

struct ProbeHyperparams {
    double learning_rate = 0.01;
    double momentum = 0.0;
    double weight_decay = 0.0;
};

// Two-layer head on frozen embeddings: latent_dim -> hidden -> 2.
struct Probe {
    models::Mlp<float> mlp;
    int in_dim = 0;

    void init(int latent_dim, int hidden, std::uint64_t seed);
    // Softmax scores [N, 2].
    nn::Tensor<float> scores(const std::vector<float>& embeddings, int latent_dim) const;
};

// SGD with momentum and weight decay, deterministic given seed.
Probe train_probe(const std::vector<float>& embeddings, int latent_dim,
                  const std::vector<int>& labels, const ProbeConfig& config,
                  const ProbeHyperparams& hyperparams, std::uint64_t seed);

struct GridPoint {
    ProbeHyperparams hyperparams;
    double val_accuracy = 0.0;
};

struct GridSearchResult {
    ProbeHyperparams best;
    Probe probe;
    std::vector<GridPoint> log;
};

// One probe per grid point on the training rows, scored by validation
// accuracy; ties break toward lower lr, then lower weight decay, then lower
// momentum.
GridSearchResult grid_search_probe(const training::EmbeddingSet& embeddings,
                                   const DatasetSplit& split, const ProbeConfig& config,
                                   std::uint64_t seed);

struct ClassificationMetrics {
    std::string cell_line;  // "__pooled__" for the all-lines row
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::optional<double> roc_auc;  // missing for single-class cell lines
    std::size_t n_drug = 0;
    std::size_t n_control = 0;
    std::vector<std::string> flags;
};

inline constexpr const char* kPooledCellLine = "__pooled__";

// Hard predictions at threshold 0.5 (ties predict control); ROC-AUC via the
// Mann-Whitney rank statistic on the drug-class score, ties counting half.
std::vector<ClassificationMetrics> compute_classification_metrics(
    const nn::Tensor<float>& scores, const std::vector<int>& labels,
    const std::vector<SampleMeta>& meta);

double roc_auc_rank(const std::vector<double>& drug_scores, const std::vector<int>& labels);

void write_probe_metrics_csv(const std::filesystem::path& path, const std::string& model,
                             const std::string& setup,
                             const std::vector<ClassificationMetrics>& metrics);
std::vector<ClassificationMetrics> read_probe_metrics_csv(const std::filesystem::path& path);
void write_probe_grid_csv(const std::filesystem::path& path, const std::vector<GridPoint>& log);

}  // namespace morphbench::evalprobe
