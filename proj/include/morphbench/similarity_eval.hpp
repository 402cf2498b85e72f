#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "morphbench/training.hpp"

namespace morphbench::evalsim {

enum class DistanceKind { euclidean, cosine, correlation, braycurtis };

DistanceKind distance_kind_from_string(const std::string& s);
std::string to_string(DistanceKind kind);
constexpr DistanceKind kAllKinds[] = {DistanceKind::euclidean, DistanceKind::cosine,
                                      DistanceKind::correlation, DistanceKind::braycurtis};

// Row view into an embedding matrix.
struct RowSet {
    const float* data = nullptr;
    int dim = 0;
    std::vector<std::size_t> rows;

    const float* row(std::size_t i) const { return data + rows[i] * static_cast<std::size_t>(dim); }
    std::size_t size() const { return rows.size(); }
};

double distance(const float* u, const float* v, int dim, DistanceKind kind);

// Median over all |A| x |B| cross-pair distances; even pair counts take the
// mean of the two central order statistics.
double pairwise_median_distance(const RowSet& a, const RowSet& b, DistanceKind kind);

// d = (D_hat - D12) / D_hat with D_hat = (D1C + D2C) / 2.
double normalized_difference(double d12, double d1c, double d2c);

struct SimilarityRecord {
    std::string cell_line;
    double d12 = 0.0, d1c = 0.0, d2c = 0.0;
    double d = 0.0;
    double d_hat = 0.0;
    std::size_t n_pairs_12 = 0, n_pairs_1c = 0, n_pairs_2c = 0;
    std::vector<std::string> flags;  // e.g. "few_controls", "degenerate", "skipped"

    bool flagged(const std::string& f) const;
};

// Per-cell-line similarity analysis on validation rows: sample |S1|+|S2|
// controls with `seed`, compute the three medians and d. Cell lines missing
// one of the sets are emitted with a "skipped" flag.
std::vector<SimilarityRecord> drug_similarity_analysis(const training::EmbeddingSet& embeddings,
                                                       const std::string& drug1,
                                                       const std::string& drug2,
                                                       const std::string& control_marker,
                                                       DistanceKind kind, std::uint64_t seed);

struct KindComparison {
    std::string cell_line;
    DistanceKind kind = DistanceKind::euclidean;
    bool applicable = true;  // Bray-Curtis needs nonnegative components
    std::vector<double> d12_all, d1c_all, d2c_all;  // full distance multisets
    double d12_median = 0.0, d1c_median = 0.0, d2c_median = 0.0;
};

std::vector<KindComparison> distance_kind_comparison(const training::EmbeddingSet& embeddings,
                                                     const std::string& drug1,
                                                     const std::string& drug2,
                                                     const std::string& control_marker,
                                                     std::uint64_t seed);

struct HistogramRow {
    std::string kind;
    std::string comparison;  // "D12" | "D1C" | "D2C"
    double bin_lo = 0.0, bin_hi = 0.0;
    std::size_t count = 0;
};

std::vector<HistogramRow> histogram_table(const std::vector<KindComparison>& comparisons,
                                          int n_bins = 30);

void write_similarity_csv(const std::filesystem::path& path,
                          const std::vector<SimilarityRecord>& records, DistanceKind kind);
std::vector<SimilarityRecord> read_similarity_csv(const std::filesystem::path& path);
void write_histogram_csv(const std::filesystem::path& path, const std::vector<HistogramRow>& rows);

}  // namespace morphbench::evalsim
