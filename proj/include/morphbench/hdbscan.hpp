#pragma once

#include <cstddef>
#include <vector>

namespace morphbench::hdbscan {

struct HdbscanConfig {
    int min_cluster_size = 5;
    int min_samples = 0;  // 0 -> use min_cluster_size
};

// Density-based clustering: core distances at min_samples, mutual
// reachability MST, condensed tree at min_cluster_size, excess-of-mass
// cluster selection. Labels are 0..k-1, noise is -1. The root partition is
// never selected, so fully uniform data may come back all noise.
std::vector<int> cluster(const std::vector<double>& points, std::size_t n, int dim,
                         const HdbscanConfig& config);

}  // namespace morphbench::hdbscan
