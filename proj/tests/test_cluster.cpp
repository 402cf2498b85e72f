#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "morphbench/cluster_eval.hpp"
#include "test_util.hpp"

using namespace morphbench;
using namespace morphbench::evalcluster;

namespace {

double point_dist(const std::vector<double>& points, int dim, std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (int f = 0; f < dim; ++f) {
        const double d = points[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(f)] -
                         points[j * static_cast<std::size_t>(dim) + static_cast<std::size_t>(f)];
        acc += d * d;
    }
    return std::sqrt(acc);
}

// O(N^2) from-definition silhouette over non-noise points.
double naive_silhouette(const std::vector<double>& points, int dim, const std::vector<int>& labels) {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= 0) groups[labels[i]].push_back(i);
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& [label, members] : groups) {
        for (std::size_t i : members) {
            double s = 0.0;
            if (members.size() > 1) {
                double a = 0.0;
                for (std::size_t j : members)
                    if (j != i) a += point_dist(points, dim, i, j);
                a /= static_cast<double>(members.size() - 1);
                double b = std::numeric_limits<double>::infinity();
                for (const auto& [other, other_members] : groups) {
                    if (other == label) continue;
                    double m = 0.0;
                    for (std::size_t j : other_members) m += point_dist(points, dim, i, j);
                    b = std::min(b, m / static_cast<double>(other_members.size()));
                }
                s = (b - a) / std::max(a, b);
            }
            total += s;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

// From-definition Davies-Bouldin: centroid distances and mean scatters.
double naive_davies_bouldin(const std::vector<double>& points, int dim,
                            const std::vector<int>& labels) {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= 0) groups[labels[i]].push_back(i);

    std::vector<std::vector<double>> centroids;
    std::vector<double> scatters;
    for (const auto& [label, members] : groups) {
        std::vector<double> c(static_cast<std::size_t>(dim), 0.0);
        for (std::size_t i : members)
            for (int f = 0; f < dim; ++f)
                c[static_cast<std::size_t>(f)] += points[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(f)];
        for (auto& v : c) v /= static_cast<double>(members.size());
        double s = 0.0;
        for (std::size_t i : members) {
            double acc = 0.0;
            for (int f = 0; f < dim; ++f) {
                const double d = points[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(f)] - c[static_cast<std::size_t>(f)];
                acc += d * d;
            }
            s += std::sqrt(acc);
        }
        centroids.push_back(std::move(c));
        scatters.push_back(s / static_cast<double>(members.size()));
    }
    double db = 0.0;
    for (std::size_t i = 0; i < centroids.size(); ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < centroids.size(); ++j) {
            if (i == j) continue;
            double m = 0.0;
            for (int f = 0; f < dim; ++f) {
                const double d = centroids[i][static_cast<std::size_t>(f)] - centroids[j][static_cast<std::size_t>(f)];
                m += d * d;
            }
            m = std::sqrt(m);
            worst = std::max(worst, (scatters[i] + scatters[j]) / m);
        }
        db += worst;
    }
    return db / static_cast<double>(centroids.size());
}

std::vector<double> random_points(std::size_t n, int dim, Rng& rng) {
    std::vector<double> out;
    for (std::size_t i = 0; i < n * static_cast<std::size_t>(dim); ++i) out.push_back(rng.normal());
    return out;
}

std::vector<float> two_blobs(std::size_t per_blob, int dim, double separation, Rng& rng) {
    std::vector<float> out;
    for (std::size_t i = 0; i < 2 * per_blob; ++i) {
        const double offset = i < per_blob ? 0.0 : separation;
        for (int f = 0; f < dim; ++f)
            out.push_back(static_cast<float>((f == 0 ? offset : 0.0) + rng.normal()));
    }
    return out;
}

training::EmbeddingSet blob_embeddings(std::size_t per_blob, int dim, double separation,
                                       const std::string& cell_line, Rng& rng) {
    training::EmbeddingSet set;
    set.latent_dim = dim;
    auto data = two_blobs(per_blob, dim, separation, rng);
    set.matrix = data;
    for (std::size_t i = 0; i < 2 * per_blob; ++i) {
        SampleMeta m;
        m.sample_id = cell_line + "_s" + std::to_string(i);
        m.cell_line = cell_line;
        m.drug = i % 2 ? "drugA" : "DMSO";
        m.label = i % 2 ? Label::drug : Label::control;
        set.meta.push_back(std::move(m));
    }
    return set;
}

}  // namespace

TEST_CASE("umap: shape law and determinism") {
    Rng rng(81);
    auto data = two_blobs(50, 16, 10.0, rng);
    ReductionConfig cfg;
    cfg.n_neighbors = 10;
    cfg.seed = 5;
    auto a = reduce(data, 100, 16, cfg);
    CHECK(a.size() == 200);
    auto b = reduce(data, 100, 16, cfg);
    CHECK(a == b);
    for (double v : a) CHECK(std::isfinite(v));
}

TEST_CASE("umap rejects too-small inputs") {
    Rng rng(82);
    auto data = two_blobs(3, 4, 5.0, rng);
    ReductionConfig cfg;
    cfg.n_neighbors = 10;
    CHECK_THROWS_AS(reduce(data, 6, 4, cfg), DataError);
}

TEST_CASE("umap separates far blobs: between-centroid distance > 3x within spread") {
    Rng rng(83);
    const std::size_t per_blob = 50;
    auto data = two_blobs(per_blob, 32, 40.0, rng);
    ReductionConfig cfg;
    cfg.n_neighbors = 12;
    cfg.seed = 7;
    auto reduced = reduce(data, 2 * per_blob, 32, cfg);

    double cx[2] = {0, 0}, cy[2] = {0, 0};
    for (std::size_t i = 0; i < 2 * per_blob; ++i) {
        cx[i / per_blob] += reduced[i * 2];
        cy[i / per_blob] += reduced[i * 2 + 1];
    }
    for (int b = 0; b < 2; ++b) {
        cx[b] /= static_cast<double>(per_blob);
        cy[b] /= static_cast<double>(per_blob);
    }
    double within = 0.0;
    for (std::size_t i = 0; i < 2 * per_blob; ++i) {
        const std::size_t b = i / per_blob;
        within += std::hypot(reduced[i * 2] - cx[b], reduced[i * 2 + 1] - cy[b]);
    }
    within /= static_cast<double>(2 * per_blob);
    const double between = std::hypot(cx[0] - cx[1], cy[0] - cy[1]);
    CHECK(between > 3.0 * within);
}

TEST_CASE("fit_ab reproduces the reference coefficients for defaults") {
    auto [a, b] = umap::fit_ab(1.0, 0.1);
    CHECK(a == doctest::Approx(1.577).epsilon(0.02));
    CHECK(b == doctest::Approx(0.895).epsilon(0.02));
}

TEST_CASE("hdbscan: two tight blobs give two clusters, no noise") {
    Rng rng(84);
    std::vector<double> points;
    for (std::size_t i = 0; i < 100; ++i) {
        const double offset = i < 50 ? 0.0 : 100.0;
        points.push_back(offset + rng.normal());
        points.push_back(rng.normal());
    }
    ClusterConfig cfg{10};
    auto labels = cluster(points, 100, 2, cfg);
    std::map<int, int> counts;
    for (int l : labels) counts[l]++;
    CHECK(counts.count(-1) == 0);
    CHECK(counts.size() == 2);
    for (const auto& [label, count] : counts) CHECK(count == 50);
    // first and second half each uniform
    for (std::size_t i = 1; i < 50; ++i) CHECK(labels[i] == labels[0]);
    for (std::size_t i = 51; i < 100; ++i) CHECK(labels[i] == labels[50]);
    CHECK(labels[0] != labels[50]);
}

TEST_CASE("hdbscan: min_cluster_size at N yields at most one cluster") {
    Rng rng(85);
    auto points = random_points(40, 2, rng);
    ClusterConfig cfg{40};
    auto labels = cluster(points, 40, 2, cfg);
    std::set<int> distinct;
    for (int l : labels)
        if (l >= 0) distinct.insert(l);
    CHECK(distinct.size() <= 1);
}

TEST_CASE("hdbscan respects the minimum cluster size") {
    Rng rng(86);
    // 3 blobs: 30, 30, 4 points; min_cluster_size 10 ignores the runt
    std::vector<double> points;
    auto add_blob = [&](double cx, double cy, int n) {
        for (int i = 0; i < n; ++i) {
            points.push_back(cx + 0.5 * rng.normal());
            points.push_back(cy + 0.5 * rng.normal());
        }
    };
    add_blob(0, 0, 30);
    add_blob(60, 0, 30);
    add_blob(30, 40, 4);
    auto labels = cluster(points, 64, 2, ClusterConfig{10});
    std::map<int, int> counts;
    for (int l : labels) counts[l]++;
    for (const auto& [label, count] : counts)
        if (label >= 0) CHECK(count >= 10);
}

TEST_CASE("partition_metrics: all-noise and single-cluster degenerate cases") {
    Rng rng(87);
    auto points = random_points(20, 2, rng);
    {
        std::vector<int> labels(20, -1);
        auto m = partition_metrics(points, 20, 2, labels);
        CHECK(m.n_clusters == 0);
        CHECK(m.noise_pct == doctest::Approx(100.0));
        CHECK_FALSE(m.silhouette.has_value());
        CHECK_FALSE(m.davies_bouldin.has_value());
    }
    {
        std::vector<int> labels(20, 0);
        auto m = partition_metrics(points, 20, 2, labels);
        CHECK(m.n_clusters == 1);
        CHECK(m.noise_pct == doctest::Approx(0.0));
        CHECK_FALSE(m.silhouette.has_value());
    }
}

TEST_CASE("partition_metrics on two ideal point clusters") {
    // {(0,0) x10, (100,100) x10}: silhouette ~= 1, Davies-Bouldin ~= 0
    std::vector<double> points;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
        points.push_back(0.001 * i);  // break exact coincidence
        points.push_back(0.0);
        labels.push_back(0);
    }
    for (int i = 0; i < 10; ++i) {
        points.push_back(100.0 + 0.001 * i);
        points.push_back(100.0);
        labels.push_back(1);
    }
    auto m = partition_metrics(points, 20, 2, labels);
    REQUIRE(m.silhouette.has_value());
    REQUIRE(m.davies_bouldin.has_value());
    CHECK(*m.silhouette > 0.99);
    CHECK(*m.davies_bouldin < 0.01);
    CHECK(*m.silhouette == doctest::Approx(naive_silhouette(points, 2, labels)).epsilon(1e-12));
    CHECK(*m.davies_bouldin ==
          doctest::Approx(naive_davies_bouldin(points, 2, labels)).epsilon(1e-12));
}

TEST_CASE("silhouette and davies-bouldin match the naive oracles on random fixtures") {
    Rng rng(88);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 20 + rng.uniform_index(181);  // up to 200
        const int dim = 2 + static_cast<int>(rng.uniform_index(3));
        auto points = random_points(n, dim, rng);
        const int k = 2 + static_cast<int>(rng.uniform_index(4));
        std::vector<int> labels;
        bool seen[6] = {};
        for (std::size_t i = 0; i < n; ++i) {
            int l = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k + 1))) - 1;
            labels.push_back(l);  // -1 = noise
            if (l >= 0) seen[l] = true;
        }
        // ensure at least two non-noise clusters with >= 1 member
        labels[0] = 0;
        labels[1] = 1;
        auto m = partition_metrics(points, n, dim, labels);
        REQUIRE(m.silhouette.has_value());
        REQUIRE(m.davies_bouldin.has_value());
        CHECK(*m.silhouette == doctest::Approx(naive_silhouette(points, dim, labels)).epsilon(1e-9));
        CHECK(*m.davies_bouldin ==
              doctest::Approx(naive_davies_bouldin(points, dim, labels)).epsilon(1e-9));
        CHECK(m.noise_pct + 100.0 * (static_cast<double>(n - std::count(labels.begin(), labels.end(), -1)) /
                                     static_cast<double>(n)) ==
              doctest::Approx(100.0).epsilon(1e-12));
    }
}

TEST_CASE("grid_search_partitions: cartesian counts, reuse and flags") {
    Rng rng(89);
    auto set = blob_embeddings(40, 8, 30.0, "CL00", rng);
    auto tiny = blob_embeddings(4, 8, 30.0, "CL01", rng);
    set.matrix.insert(set.matrix.end(), tiny.matrix.begin(), tiny.matrix.end());
    set.meta.insert(set.meta.end(), tiny.meta.begin(), tiny.meta.end());

    auto results = grid_search_partitions(set, {5, 10}, {5, 15}, 3);
    CHECK(results.size() == 8);  // 2 cell lines x 2 x 2
    std::size_t skipped = 0;
    for (const auto& r : results) {
        if (r.cell_line == "CL01") {
            // 8 points: n_neighbors 10 is infeasible, 5 is fine
            if (r.reduction.n_neighbors >= 8 || r.clustering.min_cluster_size > 8) {
                CHECK(r.skipped);
                ++skipped;
            }
        }
    }
    CHECK(skipped >= 2);

    auto again = grid_search_partitions(set, {5, 10}, {5, 15}, 3);
    for (std::size_t i = 0; i < results.size(); ++i) {
        CHECK(results[i].metrics.n_clusters == again[i].metrics.n_clusters);
        if (results[i].metrics.silhouette)
            CHECK(*results[i].metrics.silhouette == *again[i].metrics.silhouette);
    }

    CHECK_THROWS_AS(grid_search_partitions(set, {}, {5}, 3), DataError);
}

namespace {

GridResult make_row(double sil, double db, double noise, int clusters, int nn, int mcs) {
    GridResult r;
    r.cell_line = "CL00";
    r.reduction.n_neighbors = nn;
    r.clustering.min_cluster_size = mcs;
    r.metrics.silhouette = sil;
    r.metrics.davies_bouldin = db;
    r.metrics.noise_pct = noise;
    r.metrics.n_clusters = clusters;
    return r;
}

}  // namespace

TEST_CASE("select_best_partition follows the hand-traced 4-step rule") {
    // silhouettes {.1,.2,.3,.4}, DBs {2,1.5,1,.5}, noise {5,5,1,1}, clusters {2,3,4,5}
    std::vector<GridResult> rows{
        make_row(0.1, 2.0, 5, 2, 15, 30),
        make_row(0.2, 1.5, 5, 3, 15, 75),
        make_row(0.3, 1.0, 1, 4, 30, 30),
        make_row(0.4, 0.5, 1, 5, 30, 75),
    };
    auto best = select_best_partition(rows);
    CHECK(best.metrics.n_clusters == 5);
    CHECK(best.reduction.n_neighbors == 30);
    CHECK(best.clustering.min_cluster_size == 75);
}

TEST_CASE("selection is permutation-invariant") {
    std::vector<GridResult> rows{
        make_row(0.1, 2.0, 5, 2, 15, 30),  make_row(0.2, 1.5, 5, 3, 15, 75),
        make_row(0.3, 1.0, 1, 4, 30, 30),  make_row(0.4, 0.5, 1, 5, 30, 75),
        make_row(0.35, 0.8, 2, 4, 60, 30), make_row(0.25, 1.2, 0, 6, 60, 75),
    };
    auto reference = select_best_partition(rows);
    Rng rng(90);
    for (int trial = 0; trial < 1000; ++trial) {
        rng.shuffle(rows);
        auto best = select_best_partition(rows);
        CHECK(best.reduction.n_neighbors == reference.reduction.n_neighbors);
        CHECK(best.clustering.min_cluster_size == reference.clustering.min_cluster_size);
    }
}

TEST_CASE("single eligible row survives the strict filters via relaxation") {
    std::vector<GridResult> rows{make_row(0.3, 1.0, 10, 3, 15, 30)};
    auto best = select_best_partition(rows);
    CHECK(best.metrics.n_clusters == 3);
}

TEST_CASE("all-identical rows resolve by the tie-break order") {
    std::vector<GridResult> rows{
        make_row(0.3, 1.0, 10, 3, 30, 75),
        make_row(0.3, 1.0, 10, 3, 15, 75),
        make_row(0.3, 1.0, 10, 3, 15, 30),
    };
    auto best = select_best_partition(rows);
    CHECK(best.reduction.n_neighbors == 15);
    CHECK(best.clustering.min_cluster_size == 30);
}

TEST_CASE("rows with missing metrics are excluded; none eligible is an error") {
    GridResult missing;
    missing.cell_line = "CL00";
    missing.metrics.n_clusters = 1;  // metrics missing
    CHECK_THROWS_WITH_AS(select_best_partition({missing}), doctest::Contains("no valid partition"),
                         DataError);

    std::vector<GridResult> rows{missing, make_row(0.2, 1.1, 3, 4, 15, 30)};
    auto best = select_best_partition(rows);
    CHECK(best.metrics.n_clusters == 4);
}

TEST_CASE("every selected partition has at least one cluster") {
    Rng rng(91);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<GridResult> rows;
        const int n_rows = 1 + static_cast<int>(rng.uniform_index(8));
        for (int i = 0; i < n_rows; ++i)
            rows.push_back(make_row(rng.uniform(-0.2, 0.8), rng.uniform(0.3, 3.0),
                                    rng.uniform(0.0, 60.0),
                                    2 + static_cast<int>(rng.uniform_index(7)),
                                    5 * (1 + static_cast<int>(rng.uniform_index(4))),
                                    5 * (1 + static_cast<int>(rng.uniform_index(4)))));
        auto best = select_best_partition(rows);
        CHECK(best.metrics.n_clusters >= 1);
    }
}

TEST_CASE("cluster grid csv round-trips including NA metrics") {
    test::TempDir dir;
    GridResult ok = make_row(0.25, 1.5, 12.5, 4, 30, 75);
    GridResult skipped;
    skipped.cell_line = "CL01";
    skipped.skipped = true;
    write_cluster_grid_csv(dir.path / "grid.csv", {ok, skipped});
    auto back = read_cluster_grid_csv(dir.path / "grid.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[0].metrics.silhouette.has_value());
    CHECK(*back[0].metrics.silhouette == 0.25);
    CHECK(back[0].metrics.noise_pct == 12.5);
    CHECK_FALSE(back[1].metrics.silhouette.has_value());
    CHECK(back[1].skipped);
}
