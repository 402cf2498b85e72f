#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "morphbench/hdbscan.hpp"
#include "morphbench/training.hpp"
#include "morphbench/umap.hpp"

namespace morphbench::evalcluster {

struct ReductionConfig {
    int n_neighbors = 15;
    int n_components = 2;
    double min_dist = 0.1;
    std::uint64_t seed = 0;
};

struct ClusterConfig {
    int min_cluster_size = 5;
};

struct PartitionMetrics {
    int n_clusters = 0;
    double noise_pct = 0.0;  // 0..100
    std::optional<double> silhouette;      // missing when < 2 non-noise clusters
    std::optional<double> davies_bouldin;  // likewise
};

struct GridResult {
    std::string cell_line;
    ReductionConfig reduction;
    ClusterConfig clustering;
    PartitionMetrics metrics;
    bool skipped = false;  // cell line too small for this n_neighbors
};

// UMAP to n_components dimensions; deterministic given seed.
std::vector<double> reduce(const std::vector<float>& rows, std::size_t n, int dim,
                           const ReductionConfig& config);

// HDBSCAN labels; -1 = noise.
std::vector<int> cluster(const std::vector<double>& points, std::size_t n, int dim,
                         const ClusterConfig& config);

// Metrics on the reduced points; silhouette and Davies-Bouldin over non-noise
// points only.
PartitionMetrics partition_metrics(const std::vector<double>& points, std::size_t n, int dim,
                                   const std::vector<int>& labels);

// Full Cartesian grid per cell line; one reduction per n_neighbors value is
// reused across min_cluster_size values.
std::vector<GridResult> grid_search_partitions(const training::EmbeddingSet& embeddings,
                                               const std::vector<int>& n_neighbors_grid,
                                               const std::vector<int>& min_cluster_size_grid,
                                               std::uint64_t seed);

// The 4-step selection: silhouette above median, Davies-Bouldin below median
// (medians over the full eligible set; strict filters relax to inclusive when
// they would empty the pool), minimum noise, maximum cluster count. Residual
// ties break to smaller n_neighbors then smaller min_cluster_size.
GridResult select_best_partition(const std::vector<GridResult>& grid_results);

struct SelectedPartition {
    GridResult choice;
    std::vector<double> points;  // n x 2 reduced coordinates of the winning reduction
    std::vector<int> labels;
    std::vector<std::string> sample_ids;
};

void write_cluster_grid_csv(const std::filesystem::path& path,
                            const std::vector<GridResult>& results);
std::vector<GridResult> read_cluster_grid_csv(const std::filesystem::path& path);
void write_cluster_selected_csv(const std::filesystem::path& path,
                                const std::vector<GridResult>& selections);
std::vector<GridResult> read_cluster_selected_csv(const std::filesystem::path& path);
void write_partition_csv(const std::filesystem::path& path, const SelectedPartition& partition);

}  // namespace morphbench::evalcluster
