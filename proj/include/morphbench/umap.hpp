#pragma once

#include <cstdint>
#include <vector>

namespace morphbench::umap {

struct UmapConfig {
    int n_neighbors = 15;
    int n_components = 2;
    double min_dist = 0.1;
    double spread = 1.0;
    int n_epochs = 200;
    double learning_rate = 1.0;
    int negative_sample_rate = 5;
    std::uint64_t seed = 0;
};

// Least-squares fit of the low-dimensional membership curve
// 1 / (1 + a d^(2b)) to the fuzzy set shape given (spread, min_dist).
std::pair<double, double> fit_ab(double spread, double min_dist);

// Uniform manifold approximation: exact kNN graph, fuzzy simplicial set with
// smooth-kNN calibration, PCA initialization, single-threaded SGD with
// negative sampling. Deterministic given config.seed.
// data: n x dim row-major; returns n x n_components row-major.
std::vector<double> reduce(const std::vector<float>& data, std::size_t n, int dim,
                           const UmapConfig& config);

}  // namespace morphbench::umap
