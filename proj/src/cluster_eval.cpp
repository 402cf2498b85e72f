#include "morphbench/cluster_eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "morphbench/csv.hpp"
#include "morphbench/errors.hpp"

namespace morphbench::evalcluster {

std::vector<double> reduce(const std::vector<float>& rows, std::size_t n, int dim,
                           const ReductionConfig& config) {
    umap::UmapConfig u;
    u.n_neighbors = config.n_neighbors;
    u.n_components = config.n_components;
    u.min_dist = config.min_dist;
    u.seed = config.seed;
    return umap::reduce(rows, n, dim, u);
}

std::vector<int> cluster(const std::vector<double>& points, std::size_t n, int dim,
                         const ClusterConfig& config) {
    hdbscan::HdbscanConfig h;
    h.min_cluster_size = config.min_cluster_size;
    return hdbscan::cluster(points, n, dim, h);
}

namespace {

double euclid(const double* a, const double* b, int dim) {
    double acc = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace

PartitionMetrics partition_metrics(const std::vector<double>& points, std::size_t n, int dim,
                                   const std::vector<int>& labels) {
    if (labels.size() != n) throw DataError("partition_metrics: labels misaligned");
    PartitionMetrics out;

    std::map<int, std::vector<std::size_t>> groups;
    std::size_t noise = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0) ++noise;
        else groups[labels[i]].push_back(i);
    }
    out.n_clusters = static_cast<int>(groups.size());
    out.noise_pct = n > 0 ? 100.0 * static_cast<double>(noise) / static_cast<double>(n) : 0.0;
    if (out.n_clusters < 2) return out;

    // Silhouette over non-noise points.
    {
        double total = 0.0;
        std::size_t count = 0;
        for (const auto& [label, members] : groups) {
            for (std::size_t i : members) {
                double a = 0.0;
                if (members.size() > 1) {
                    for (std::size_t j : members)
                        if (j != i) a += euclid(&points[i * static_cast<std::size_t>(dim)],
                                                &points[j * static_cast<std::size_t>(dim)], dim);
                    a /= static_cast<double>(members.size() - 1);
                }
                double b = std::numeric_limits<double>::infinity();
                for (const auto& [other_label, other_members] : groups) {
                    if (other_label == label) continue;
                    double mean = 0.0;
                    for (std::size_t j : other_members)
                        mean += euclid(&points[i * static_cast<std::size_t>(dim)],
                                       &points[j * static_cast<std::size_t>(dim)], dim);
                    mean /= static_cast<double>(other_members.size());
                    b = std::min(b, mean);
                }
                const double s = members.size() > 1
                                     ? (b - a) / std::max(a, b)
                                     : 0.0;  // singleton convention
                total += s;
                ++count;
            }
        }
        out.silhouette = total / static_cast<double>(count);
    }

    // Davies-Bouldin over non-noise points.
    {
        std::vector<std::vector<double>> centroids;
        std::vector<double> scatter;
        for (const auto& [label, members] : groups) {
            std::vector<double> c(static_cast<std::size_t>(dim), 0.0);
            for (std::size_t i : members)
                for (int f = 0; f < dim; ++f)
                    c[static_cast<std::size_t>(f)] += points[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(f)];
            for (auto& v : c) v /= static_cast<double>(members.size());
            double s = 0.0;
            for (std::size_t i : members)
                s += euclid(&points[i * static_cast<std::size_t>(dim)], c.data(), dim);
            s /= static_cast<double>(members.size());
            centroids.push_back(std::move(c));
            scatter.push_back(s);
        }
        const std::size_t kc = centroids.size();
        double db = 0.0;
        for (std::size_t i = 0; i < kc; ++i) {
            double worst = 0.0;
            for (std::size_t j = 0; j < kc; ++j) {
                if (i == j) continue;
                const double m = euclid(centroids[i].data(), centroids[j].data(), dim);
                if (m > 0.0) worst = std::max(worst, (scatter[i] + scatter[j]) / m);
            }
            db += worst;
        }
        out.davies_bouldin = db / static_cast<double>(kc);
    }
    return out;
}

std::vector<GridResult> grid_search_partitions(const training::EmbeddingSet& embeddings,
                                               const std::vector<int>& n_neighbors_grid,
                                               const std::vector<int>& min_cluster_size_grid,
                                               std::uint64_t seed) {
    if (n_neighbors_grid.empty() || min_cluster_size_grid.empty())
        throw DataError("grid_search_partitions: empty grid");

    std::map<std::string, std::vector<std::size_t>> by_cell_line;
    for (std::size_t i = 0; i < embeddings.meta.size(); ++i)
        by_cell_line[embeddings.meta[i].cell_line].push_back(i);

    std::vector<GridResult> out;
    for (const auto& [cell_line, rows] : by_cell_line) {
        std::vector<float> data;
        data.reserve(rows.size() * static_cast<std::size_t>(embeddings.latent_dim));
        for (std::size_t i : rows) {
            const float* r = embeddings.row(i);
            data.insert(data.end(), r, r + embeddings.latent_dim);
        }
        for (int n_neighbors : n_neighbors_grid) {
            ReductionConfig rc;
            rc.n_neighbors = n_neighbors;
            rc.seed = seed;
            const bool feasible = rows.size() > static_cast<std::size_t>(n_neighbors);
            std::vector<double> reduced;
            if (feasible)
                reduced = reduce(data, rows.size(), embeddings.latent_dim, rc);
            for (int mcs : min_cluster_size_grid) {
                GridResult r;
                r.cell_line = cell_line;
                r.reduction = rc;
                r.clustering.min_cluster_size = mcs;
                if (!feasible || rows.size() < static_cast<std::size_t>(mcs)) {
                    r.skipped = true;
                } else {
                    auto labels = cluster(reduced, rows.size(), rc.n_components, r.clustering);
                    r.metrics = partition_metrics(reduced, rows.size(), rc.n_components, labels);
                }
                out.push_back(std::move(r));
            }
        }
    }
    return out;
}

GridResult select_best_partition(const std::vector<GridResult>& grid_results) {
    std::vector<const GridResult*> eligible;
    for (const auto& r : grid_results)
        if (!r.skipped && r.metrics.silhouette && r.metrics.davies_bouldin)
            eligible.push_back(&r);
    if (eligible.empty()) throw DataError("no valid partition");

    auto median_of = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    std::vector<double> sils, dbs;
    for (const auto* r : eligible) {
        sils.push_back(*r->metrics.silhouette);
        dbs.push_back(*r->metrics.davies_bouldin);
    }
    const double sil_median = median_of(sils);
    const double db_median = median_of(dbs);

    // Step 1: silhouette above median (relaxed to >= when strict empties).
    std::vector<const GridResult*> survivors;
    for (const auto* r : eligible)
        if (*r->metrics.silhouette > sil_median) survivors.push_back(r);
    if (survivors.empty())
        for (const auto* r : eligible)
            if (*r->metrics.silhouette >= sil_median) survivors.push_back(r);

    // Step 2: Davies-Bouldin below median (same relaxation rule).
    std::vector<const GridResult*> step2;
    for (const auto* r : survivors)
        if (*r->metrics.davies_bouldin < db_median) step2.push_back(r);
    if (step2.empty())
        for (const auto* r : survivors)
            if (*r->metrics.davies_bouldin <= db_median) step2.push_back(r);
    if (step2.empty()) step2 = survivors;  // inclusive filter can still empty a disjoint pool

    // Step 3: lowest percent of noise.
    double min_noise = std::numeric_limits<double>::infinity();
    for (const auto* r : step2) min_noise = std::min(min_noise, r->metrics.noise_pct);
    std::vector<const GridResult*> step3;
    for (const auto* r : step2)
        if (r->metrics.noise_pct == min_noise) step3.push_back(r);

    // Step 4: maximum cluster count; ties break to smaller n_neighbors, then
    // smaller min_cluster_size.
    const GridResult* best = nullptr;
    for (const auto* r : step3) {
        if (!best) {
            best = r;
            continue;
        }
        const auto key = [](const GridResult* g) {
            return std::make_tuple(-g->metrics.n_clusters, g->reduction.n_neighbors,
                                   g->clustering.min_cluster_size);
        };
        if (key(r) < key(best)) best = r;
    }
    return *best;
}

// ---------------------------------------------------------------------------
// CSV shapes
// ---------------------------------------------------------------------------

static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

static csv::Table grid_table(const std::vector<GridResult>& results) {
    csv::Table t;
    t.header = {"cell_line", "n_neighbors", "min_cluster_size", "n_clusters", "noise_pct",
                "silhouette", "davies_bouldin", "flags"};
    for (const auto& r : results) {
        t.rows.push_back({r.cell_line, std::to_string(r.reduction.n_neighbors),
                          std::to_string(r.clustering.min_cluster_size),
                          std::to_string(r.metrics.n_clusters), fmt(r.metrics.noise_pct),
                          r.metrics.silhouette ? fmt(*r.metrics.silhouette) : "NA",
                          r.metrics.davies_bouldin ? fmt(*r.metrics.davies_bouldin) : "NA",
                          r.skipped ? "skipped" : ""});
    }
    return t;
}

static std::vector<GridResult> grid_from_table(const csv::Table& t) {
    std::vector<GridResult> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        GridResult r;
        r.cell_line = t.at(i, "cell_line");
        r.reduction.n_neighbors = std::stoi(t.at(i, "n_neighbors"));
        r.clustering.min_cluster_size = std::stoi(t.at(i, "min_cluster_size"));
        r.metrics.n_clusters = std::stoi(t.at(i, "n_clusters"));
        r.metrics.noise_pct = std::stod(t.at(i, "noise_pct"));
        if (t.at(i, "silhouette") != "NA") r.metrics.silhouette = std::stod(t.at(i, "silhouette"));
        if (t.at(i, "davies_bouldin") != "NA")
            r.metrics.davies_bouldin = std::stod(t.at(i, "davies_bouldin"));
        r.skipped = t.at(i, "flags") == "skipped";
        out.push_back(std::move(r));
    }
    return out;
}

void write_cluster_grid_csv(const std::filesystem::path& path,
                            const std::vector<GridResult>& results) {
    csv::write_file(path, grid_table(results));
}

std::vector<GridResult> read_cluster_grid_csv(const std::filesystem::path& path) {
    return grid_from_table(csv::read_file(path));
}

void write_cluster_selected_csv(const std::filesystem::path& path,
                                const std::vector<GridResult>& selections) {
    csv::write_file(path, grid_table(selections));
}

std::vector<GridResult> read_cluster_selected_csv(const std::filesystem::path& path) {
    return grid_from_table(csv::read_file(path));
}

void write_partition_csv(const std::filesystem::path& path, const SelectedPartition& partition) {
    csv::Table t;
    t.header = {"sample_id", "x", "y", "label"};
    for (std::size_t i = 0; i < partition.labels.size(); ++i) {
        t.rows.push_back({partition.sample_ids[i], fmt(partition.points[i * 2]),
                          fmt(partition.points[i * 2 + 1]), std::to_string(partition.labels[i])});
    }
    csv::write_file(path, t);
}

}  // namespace morphbench::evalcluster
