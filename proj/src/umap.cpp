#include "morphbench/umap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "morphbench/errors.hpp"
#include "morphbench/rng.hpp"

namespace morphbench::umap {

namespace {

constexpr double kSmoothTolerance = 1e-5;
constexpr double kMinKDistScale = 1e-3;

struct Edge {
    std::size_t head = 0, tail = 0;
    double weight = 0.0;
};

double sq_dist(const float* a, const float* b, int dim) {
    double acc = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace

std::pair<double, double> fit_ab(double spread, double min_dist) {
    // Target curve: 1 for d < min_dist, exp(-(d - min_dist)/spread) beyond.
    // Fit psi(d) = 1/(1 + a d^(2b)) by Gauss-Newton on sampled points.
    constexpr int kPoints = 300;
    std::vector<double> xs(kPoints), ys(kPoints);
    for (int i = 0; i < kPoints; ++i) {
        const double x = 3.0 * spread * (i + 1) / kPoints;
        xs[static_cast<std::size_t>(i)] = x;
        ys[static_cast<std::size_t>(i)] =
            x < min_dist ? 1.0 : std::exp(-(x - min_dist) / spread);
    }
    double a = 1.0, b = 1.0;
    for (int iter = 0; iter < 200; ++iter) {
        double jtj[2][2] = {{0, 0}, {0, 0}};
        double jtr[2] = {0, 0};
        for (int i = 0; i < kPoints; ++i) {
            const double x = xs[static_cast<std::size_t>(i)];
            const double x2b = std::pow(x, 2.0 * b);
            const double denom = 1.0 + a * x2b;
            const double f = 1.0 / denom;
            const double r = ys[static_cast<std::size_t>(i)] - f;
            const double df_da = -x2b / (denom * denom);
            const double df_db = -2.0 * a * x2b * std::log(x) / (denom * denom);
            jtj[0][0] += df_da * df_da;
            jtj[0][1] += df_da * df_db;
            jtj[1][0] += df_db * df_da;
            jtj[1][1] += df_db * df_db;
            jtr[0] += df_da * r;
            jtr[1] += df_db * r;
        }
        const double lambda = 1e-6;  // ridge for stability
        jtj[0][0] += lambda;
        jtj[1][1] += lambda;
        const double det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if (std::abs(det) < 1e-18) break;
        const double da = (jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det;
        const double db = (-jtj[1][0] * jtr[0] + jtj[0][0] * jtr[1]) / det;
        a += da;
        b += db;
        a = std::clamp(a, 1e-3, 1e3);
        b = std::clamp(b, 1e-3, 1e3);
        if (std::abs(da) < 1e-12 && std::abs(db) < 1e-12) break;
    }
    return {a, b};
}

std::vector<double> reduce(const std::vector<float>& data, std::size_t n, int dim,
                           const UmapConfig& config) {
    if (config.n_neighbors < 2) throw DataError("umap: n_neighbors must be >= 2");
    if (n <= static_cast<std::size_t>(config.n_neighbors))
        throw DataError("umap: need more points than n_neighbors");
    if (data.size() != n * static_cast<std::size_t>(dim)) throw DataError("umap: data size mismatch");

    const int k = config.n_neighbors;
    const int out_dim = config.n_components;

    // Exact kNN (excluding self) by brute force.
    std::vector<std::size_t> knn(n * static_cast<std::size_t>(k));
    std::vector<double> knn_dist(n * static_cast<std::size_t>(k));
    {
        std::vector<std::pair<double, std::size_t>> cand(n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t c = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                cand[c++] = {sq_dist(&data[i * static_cast<std::size_t>(dim)],
                                     &data[j * static_cast<std::size_t>(dim)], dim), j};
            }
            std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
            for (int t = 0; t < k; ++t) {
                knn[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(t)] = cand[static_cast<std::size_t>(t)].second;
                knn_dist[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(t)] =
                    std::sqrt(cand[static_cast<std::size_t>(t)].first);
            }
        }
    }

    // Smooth kNN calibration: rho_i = nearest nonzero distance, sigma_i solves
    // sum exp(-(d - rho)/sigma) = log2(k).
    std::vector<double> rho(n, 0.0), sigma(n, 1.0);
    const double target = std::log2(static_cast<double>(k));
    for (std::size_t i = 0; i < n; ++i) {
        double mean_dist = 0.0;
        for (int t = 0; t < k; ++t) mean_dist += knn_dist[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(t)];
        mean_dist /= k;
        for (int t = 0; t < k; ++t) {
            const double d = knn_dist[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(t)];
            if (d > 0.0) {
                rho[i] = d;
                break;
            }
        }
        double lo = 0.0, hi = 1e12, mid = 1.0;
        for (int iter = 0; iter < 64; ++iter) {
            double sum = 0.0;
            for (int t = 0; t < k; ++t) {
                const double d = knn_dist[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(t)] - rho[i];
                sum += d <= 0.0 ? 1.0 : std::exp(-d / mid);
            }
            if (std::abs(sum - target) < kSmoothTolerance) break;
            if (sum > target) {
                hi = mid;
                mid = 0.5 * (lo + hi);
            } else {
                lo = mid;
                mid = hi >= 1e12 ? mid * 2.0 : 0.5 * (lo + hi);
            }
        }
        sigma[i] = std::max(mid, kMinKDistScale * mean_dist);
    }

    // Fuzzy graph, symmetrized with probabilistic union a + b - ab.
    std::vector<Edge> edges;
    {
        std::vector<std::vector<std::pair<std::size_t, double>>> directed(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (int t = 0; t < k; ++t) {
                const std::size_t j = knn[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(t)];
                const double d = knn_dist[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(t)];
                const double w = d <= rho[i] ? 1.0 : std::exp(-(d - rho[i]) / sigma[i]);
                directed[i].push_back({j, w});
            }
        }
        auto find_weight = [&](std::size_t from, std::size_t to) {
            for (const auto& [j, w] : directed[from])
                if (j == to) return w;
            return 0.0;
        };
        for (std::size_t i = 0; i < n; ++i) {
            for (const auto& [j, wij] : directed[i]) {
                if (j < i && find_weight(j, i) > 0.0) continue;  // already emitted from j
                const double wji = find_weight(j, i);
                const double w = wij + wji - wij * wji;
                if (w > 0.0) edges.push_back({i, j, w});
            }
        }
    }

    // PCA initialization (top components via seeded power iteration), scaled
    // to a 10-unit extent, plus a small jitter.
    std::vector<double> embedding(n * static_cast<std::size_t>(out_dim), 0.0);
    {
        std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (int f = 0; f < dim; ++f) mean[static_cast<std::size_t>(f)] += data[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(f)];
        for (auto& v : mean) v /= static_cast<double>(n);

        Rng rng(config.seed ^ 0x0a17b3ull);
        std::vector<std::vector<double>> components;
        for (int c = 0; c < out_dim; ++c) {
            std::vector<double> v(static_cast<std::size_t>(dim));
            for (auto& x : v) x = rng.normal();
            for (int iter = 0; iter < 60; ++iter) {
                // w = X^T (X v) accumulated row by row; deflate prior components.
                std::vector<double> w(static_cast<std::size_t>(dim), 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    double proj = 0.0;
                    for (int f = 0; f < dim; ++f)
                        proj += (data[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(f)] - mean[static_cast<std::size_t>(f)]) * v[static_cast<std::size_t>(f)];
                    for (int f = 0; f < dim; ++f)
                        w[static_cast<std::size_t>(f)] += proj * (data[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(f)] - mean[static_cast<std::size_t>(f)]);
                }
                for (const auto& prev : components) {
                    double dot = 0.0;
                    for (int f = 0; f < dim; ++f) dot += w[static_cast<std::size_t>(f)] * prev[static_cast<std::size_t>(f)];
                    for (int f = 0; f < dim; ++f) w[static_cast<std::size_t>(f)] -= dot * prev[static_cast<std::size_t>(f)];
                }
                double norm = 0.0;
                for (double x : w) norm += x * x;
                norm = std::sqrt(norm);
                if (norm < 1e-12) {
                    for (auto& x : w) x = rng.normal();
                    norm = 1.0;
                }
                for (int f = 0; f < dim; ++f) v[static_cast<std::size_t>(f)] = w[static_cast<std::size_t>(f)] / norm;
            }
            components.push_back(v);
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (int c = 0; c < out_dim; ++c) {
                double proj = 0.0;
                for (int f = 0; f < dim; ++f)
                    proj += (data[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(f)] - mean[static_cast<std::size_t>(f)]) *
                            components[static_cast<std::size_t>(c)][static_cast<std::size_t>(f)];
                embedding[i * static_cast<std::size_t>(out_dim) + static_cast<std::size_t>(c)] = proj;
            }
        }
        double extent = 0.0;
        for (double v : embedding) extent = std::max(extent, std::abs(v));
        const double scale = extent > 0.0 ? 10.0 / extent : 1.0;
        for (std::size_t i = 0; i < embedding.size(); ++i)
            embedding[i] = embedding[i] * scale + rng.normal(0.0, 1e-4);
    }

    // SGD over edges with negative sampling (head points move).
    const auto [a, b] = fit_ab(config.spread, config.min_dist);
    double max_weight = 0.0;
    for (const auto& e : edges) max_weight = std::max(max_weight, e.weight);
    std::vector<double> epochs_per_sample(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e)
        epochs_per_sample[e] = max_weight / edges[e].weight;
    std::vector<double> next_sample = epochs_per_sample;

    Rng rng(config.seed ^ 0x5d9f00dull);
    static constexpr double kClip = 4.0;
    auto clip = [](double v) { return std::clamp(v, -kClip, kClip); };

    for (int epoch = 1; epoch <= config.n_epochs; ++epoch) {
        const double alpha =
            config.learning_rate * (1.0 - static_cast<double>(epoch) / config.n_epochs);
        for (std::size_t e = 0; e < edges.size(); ++e) {
            if (next_sample[e] > static_cast<double>(epoch)) continue;
            next_sample[e] += epochs_per_sample[e];
            double* head = &embedding[edges[e].head * static_cast<std::size_t>(out_dim)];
            double* tail = &embedding[edges[e].tail * static_cast<std::size_t>(out_dim)];

            double d2 = 0.0;
            for (int c = 0; c < out_dim; ++c) {
                const double diff = head[c] - tail[c];
                d2 += diff * diff;
            }
            if (d2 > 0.0) {
                const double pd = std::pow(d2, b - 1.0);
                const double grad_coeff = -2.0 * a * b * pd / (1.0 + a * pd * d2);
                for (int c = 0; c < out_dim; ++c) {
                    const double g = clip(grad_coeff * (head[c] - tail[c]));
                    head[c] += alpha * g;
                    tail[c] -= alpha * g;
                }
            }
            for (int s = 0; s < config.negative_sample_rate; ++s) {
                const std::size_t other = rng.uniform_index(n);
                if (other == edges[e].head) continue;
                double* neg = &embedding[other * static_cast<std::size_t>(out_dim)];
                double nd2 = 0.0;
                for (int c = 0; c < out_dim; ++c) {
                    const double diff = head[c] - neg[c];
                    nd2 += diff * diff;
                }
                if (nd2 <= 0.0) {
                    for (int c = 0; c < out_dim; ++c) head[c] += alpha * kClip;
                    continue;
                }
                const double grad_coeff =
                    2.0 * b / ((0.001 + nd2) * (1.0 + a * std::pow(nd2, b)));
                for (int c = 0; c < out_dim; ++c) {
                    const double g = clip(grad_coeff * (head[c] - neg[c]));
                    head[c] += alpha * g;
                }
            }
        }
    }

    for (double v : embedding)
        if (!std::isfinite(v)) throw NumericError("umap produced non-finite embedding");
    return embedding;
}

}  // namespace morphbench::umap
