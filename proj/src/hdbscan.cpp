#include "morphbench/hdbscan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "morphbench/errors.hpp"

namespace morphbench::hdbscan {

namespace {

double dist(const double* a, const double* b, int dim) {
    double acc = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

struct MstEdge {
    std::size_t a = 0, b = 0;
    double weight = 0.0;
};

// Single-linkage hierarchy node over mutual reachability distances.
struct HierarchyNode {
    std::size_t left = 0, right = 0;  // children (points are 0..n-1, merges n..2n-2)
    double lambda = 0.0;              // 1 / merge distance
    std::size_t size = 0;
};

// Condensed-tree cluster (size >= min_cluster_size at birth).
struct CondensedCluster {
    std::size_t parent = SIZE_MAX;
    double lambda_birth = 0.0;
    double stability = 0.0;
    std::vector<std::size_t> children;                       // child clusters
    std::vector<std::pair<std::size_t, double>> points;      // (point, lambda it fell out)
    bool selected = false;
};

}  // namespace

std::vector<int> cluster(const std::vector<double>& points, std::size_t n, int dim,
                         const HdbscanConfig& config) {
    if (config.min_cluster_size < 2) throw DataError("hdbscan: min_cluster_size must be >= 2");
    if (points.size() != n * static_cast<std::size_t>(dim))
        throw DataError("hdbscan: points size mismatch");
    std::vector<int> labels(n, -1);
    if (n < static_cast<std::size_t>(config.min_cluster_size)) return labels;

    const int min_samples = config.min_samples > 0 ? config.min_samples : config.min_cluster_size;
    const int k = std::min<int>(min_samples, static_cast<int>(n) - 1);

    // Core distance = distance to the k-th nearest neighbor.
    std::vector<double> core(n, 0.0);
    {
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j)
                d[j] = j == i ? std::numeric_limits<double>::infinity()
                              : dist(&points[i * static_cast<std::size_t>(dim)],
                                     &points[j * static_cast<std::size_t>(dim)], dim);
            std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
            core[i] = d[static_cast<std::size_t>(k - 1)];
        }
    }

    // Prim's MST over mutual reachability distances.
    std::vector<MstEdge> mst;
    {
        std::vector<double> best(n, std::numeric_limits<double>::infinity());
        std::vector<std::size_t> from(n, 0);
        std::vector<bool> used(n, false);
        used[0] = true;
        for (std::size_t j = 1; j < n; ++j) {
            const double d = dist(&points[0], &points[j * static_cast<std::size_t>(dim)], dim);
            best[j] = std::max({d, core[0], core[j]});
            from[j] = 0;
        }
        for (std::size_t added = 1; added < n; ++added) {
            std::size_t pick = SIZE_MAX;
            for (std::size_t j = 0; j < n; ++j)
                if (!used[j] && (pick == SIZE_MAX || best[j] < best[pick])) pick = j;
            used[pick] = true;
            mst.push_back({from[pick], pick, best[pick]});
            for (std::size_t j = 0; j < n; ++j) {
                if (used[j]) continue;
                const double d = dist(&points[pick * static_cast<std::size_t>(dim)],
                                      &points[j * static_cast<std::size_t>(dim)], dim);
                const double mr = std::max({d, core[pick], core[j]});
                if (mr < best[j]) {
                    best[j] = mr;
                    from[j] = pick;
                }
            }
        }
        std::sort(mst.begin(), mst.end(),
                  [](const MstEdge& a, const MstEdge& b) { return a.weight < b.weight; });
    }

    // Single-linkage dendrogram via union-find over sorted MST edges.
    std::vector<HierarchyNode> merges(n - 1);
    std::vector<std::size_t> uf_parent(2 * n - 1);
    std::iota(uf_parent.begin(), uf_parent.end(), std::size_t{0});
    std::vector<std::size_t> uf_size(2 * n - 1, 1);
    auto find = [&](std::size_t x) {
        while (uf_parent[x] != x) {
            uf_parent[x] = uf_parent[uf_parent[x]];
            x = uf_parent[x];
        }
        return x;
    };
    for (std::size_t e = 0; e < mst.size(); ++e) {
        const std::size_t ra = find(mst[e].a);
        const std::size_t rb = find(mst[e].b);
        const std::size_t node = n + e;
        merges[e].left = ra;
        merges[e].right = rb;
        merges[e].lambda = 1.0 / std::max(mst[e].weight, 1e-12);  // cap so duplicates stay finite
        merges[e].size = uf_size[ra] + uf_size[rb];
        uf_parent[ra] = node;
        uf_parent[rb] = node;
        uf_size[node] = merges[e].size;
    }

    // Condense: walk from the root down. A child smaller than
    // min_cluster_size "falls out" of its parent cluster at the split lambda.
    const auto msize = static_cast<std::size_t>(config.min_cluster_size);
    std::vector<CondensedCluster> clusters;
    clusters.push_back({});  // root cluster
    clusters[0].lambda_birth = 0.0;

    struct WorkItem {
        std::size_t node;     // hierarchy node id (>= n means merge node)
        std::size_t cluster;  // condensed cluster receiving this subtree
    };
    std::vector<WorkItem> stack{{2 * n - 2, 0}};

    auto subtree_size = [&](std::size_t node) {
        return node < n ? std::size_t{1} : merges[node - n].size;
    };
    // Collect all leaf points of a hierarchy subtree falling out at `lambda`.
    auto spill_points = [&](std::size_t node, std::size_t into, double lambda) {
        std::vector<std::size_t> local{node};
        while (!local.empty()) {
            const std::size_t cur = local.back();
            local.pop_back();
            if (cur < n) {
                clusters[into].points.push_back({cur, lambda});
            } else {
                local.push_back(merges[cur - n].left);
                local.push_back(merges[cur - n].right);
            }
        }
    };

    while (!stack.empty()) {
        const WorkItem item = stack.back();
        stack.pop_back();
        if (item.node < n) {  // unreachable for min_cluster_size >= 2; kept for safety
            clusters[item.cluster].points.push_back({item.node, clusters[item.cluster].lambda_birth});
            continue;
        }
        const HierarchyNode& merge = merges[item.node - n];
        const std::size_t left = merge.left, right = merge.right;
        const std::size_t ls = subtree_size(left), rs = subtree_size(right);

        if (ls >= msize && rs >= msize) {
            // True split: two new condensed clusters born at this lambda.
            for (std::size_t child : {left, right}) {
                CondensedCluster c;
                c.parent = item.cluster;
                c.lambda_birth = merge.lambda;
                clusters.push_back(std::move(c));
                clusters[item.cluster].children.push_back(clusters.size() - 1);
                stack.push_back({child, clusters.size() - 1});
            }
        } else {
            // Points of undersized children leave the current cluster here.
            if (ls < msize) spill_points(left, item.cluster, merge.lambda);
            else stack.push_back({left, item.cluster});
            if (rs < msize) spill_points(right, item.cluster, merge.lambda);
            else stack.push_back({right, item.cluster});
        }
    }

    // Stability: own points contribute (lambda_p - lambda_birth); points that
    // continued into a child contribute up to the child's birth lambda.
    // Children were appended after their parents, so reverse order is
    // bottom-up.
    std::vector<double> subtree_mass(clusters.size(), 0.0);
    for (std::size_t i = clusters.size(); i-- > 0;) {
        auto& c = clusters[i];
        subtree_mass[i] = static_cast<double>(c.points.size());
        for (std::size_t child : c.children) subtree_mass[i] += subtree_mass[child];
        for (const auto& [point, lambda] : c.points)
            c.stability += std::max(0.0, lambda - c.lambda_birth);
        if (c.parent != SIZE_MAX)
            clusters[c.parent].stability +=
                subtree_mass[i] * std::max(0.0, c.lambda_birth - clusters[c.parent].lambda_birth);
    }

    // Excess of mass: a cluster is kept when it is at least as stable as the
    // sum of its children; the root is never selectable.
    std::vector<double> subtree_stability(clusters.size(), 0.0);
    for (std::size_t i = clusters.size(); i-- > 0;) {
        auto& c = clusters[i];
        double child_sum = 0.0;
        for (std::size_t child : c.children) child_sum += subtree_stability[child];
        if (i == 0 || (!c.children.empty() && c.stability < child_sum)) {
            subtree_stability[i] = child_sum;
            c.selected = false;
        } else {
            subtree_stability[i] = c.stability;
            c.selected = true;
        }
    }
    // Deselect everything underneath a selected cluster (top-down walk), so
    // the selection forms an antichain.
    {
        std::vector<bool> shadowed(clusters.size(), false);
        std::vector<std::size_t> walk{0};
        while (!walk.empty()) {
            const std::size_t cur = walk.back();
            walk.pop_back();
            if (shadowed[cur]) clusters[cur].selected = false;
            for (std::size_t child : clusters[cur].children) {
                if (shadowed[cur] || clusters[cur].selected) shadowed[child] = true;
                walk.push_back(child);
            }
        }
    }

    // Label: each point belongs to the nearest selected ancestor (including
    // the cluster it fell out of); anything above all selections is noise.
    std::vector<int> cluster_label(clusters.size(), -1);
    int next_label = 0;
    for (std::size_t i = 1; i < clusters.size(); ++i)
        if (clusters[i].selected) cluster_label[i] = next_label++;

    for (std::size_t i = 0; i < clusters.size(); ++i) {
        std::size_t cur = i;
        int label = -1;
        while (cur != SIZE_MAX) {
            if (clusters[cur].selected) {
                label = cluster_label[cur];
                break;
            }
            cur = clusters[cur].parent;
        }
        if (label < 0) continue;
        for (const auto& [point, lambda] : clusters[i].points) labels[point] = label;
    }
    return labels;
}

}  // namespace morphbench::hdbscan
