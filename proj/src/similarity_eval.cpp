#include "morphbench/similarity_eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "morphbench/csv.hpp"
#include "morphbench/errors.hpp"
#include "morphbench/hash.hpp"

namespace morphbench::evalsim {

DistanceKind distance_kind_from_string(const std::string& s) {
    if (s == "euclidean") return DistanceKind::euclidean;
    if (s == "cosine") return DistanceKind::cosine;
    if (s == "correlation") return DistanceKind::correlation;
    if (s == "braycurtis") return DistanceKind::braycurtis;
    throw DataError("unknown distance kind: '" + s + "'");
}

std::string to_string(DistanceKind kind) {
    switch (kind) {
        case DistanceKind::euclidean: return "euclidean";
        case DistanceKind::cosine: return "cosine";
        case DistanceKind::correlation: return "correlation";
        case DistanceKind::braycurtis: return "braycurtis";
    }
    return "euclidean";
}

double distance(const float* u, const float* v, int dim, DistanceKind kind) {
    switch (kind) {
        case DistanceKind::euclidean: {
            double acc = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double d = static_cast<double>(u[i]) - v[i];
                acc += d * d;
            }
            return std::sqrt(acc);
        }
        case DistanceKind::cosine: {
            double dot = 0.0, nu = 0.0, nv = 0.0;
            for (int i = 0; i < dim; ++i) {
                dot += static_cast<double>(u[i]) * v[i];
                nu += static_cast<double>(u[i]) * u[i];
                nv += static_cast<double>(v[i]) * v[i];
            }
            if (nu == 0.0 || nv == 0.0) throw NumericError("cosine distance: zero-norm row");
            return 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
        }
        case DistanceKind::correlation: {
            double mu = 0.0, mv = 0.0;
            for (int i = 0; i < dim; ++i) {
                mu += u[i];
                mv += v[i];
            }
            mu /= dim;
            mv /= dim;
            double dot = 0.0, nu = 0.0, nv = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double a = u[i] - mu, b = v[i] - mv;
                dot += a * b;
                nu += a * a;
                nv += b * b;
            }
            if (nu == 0.0 || nv == 0.0)
                throw NumericError("correlation distance: constant row");
            return 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
        }
        case DistanceKind::braycurtis: {
            double num = 0.0, den = 0.0;
            for (int i = 0; i < dim; ++i) {
                if (u[i] < 0.0f || v[i] < 0.0f)
                    throw NumericError("braycurtis distance requires nonnegative components");
                num += std::abs(static_cast<double>(u[i]) - v[i]);
                den += static_cast<double>(u[i]) + v[i];
            }
            if (den == 0.0) return 0.0;
            return num / den;
        }
    }
    return 0.0;
}

static double median_inplace(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double pairwise_median_distance(const RowSet& a, const RowSet& b, DistanceKind kind) {
    if (a.size() == 0 || b.size() == 0)
        throw DataError("pairwise_median_distance: empty row set");
    std::vector<double> all;
    all.reserve(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            all.push_back(distance(a.row(i), b.row(j), a.dim, kind));
    return median_inplace(all);
}

double normalized_difference(double d12, double d1c, double d2c) {
    const double d_hat = 0.5 * (d1c + d2c);
    if (d_hat == 0.0) throw NumericError("normalized_difference: degenerate control geometry");
    return (d_hat - d12) / d_hat;
}

bool SimilarityRecord::flagged(const std::string& f) const {
    return std::find(flags.begin(), flags.end(), f) != flags.end();
}

namespace {

struct CellLineRows {
    std::vector<std::size_t> drug1, drug2, control;
};

// Validation rows of each cell line, grouped into the three sets.
std::map<std::string, CellLineRows> collect_rows(const training::EmbeddingSet& embeddings,
                                                 const std::string& drug1,
                                                 const std::string& drug2,
                                                 const std::string& control_marker) {
    std::vector<std::string> ids;
    std::vector<Label> labels;
    for (const auto& m : embeddings.meta) {
        ids.push_back(m.sample_id);
        labels.push_back(m.label);
    }
    const DatasetSplit split =
        split_ids(ids, labels, embeddings.split_val_fraction, embeddings.split_seed);

    std::map<std::string, CellLineRows> out;
    for (std::size_t i = 0; i < embeddings.meta.size(); ++i) {
        const auto& m = embeddings.meta[i];
        if (!split.is_val(m.sample_id)) continue;
        auto& rows = out[m.cell_line];
        if (m.drug == drug1) rows.drug1.push_back(i);
        else if (m.drug == drug2) rows.drug2.push_back(i);
        else if (m.drug == control_marker) rows.control.push_back(i);
    }
    return out;
}

std::vector<std::size_t> sample_controls(const std::vector<std::size_t>& pool, std::size_t want,
                                         std::uint64_t seed, const std::string& cell_line,
                                         bool& short_pool) {
    short_pool = pool.size() < want;
    std::vector<std::size_t> rows = pool;
    Rng rng(seed ^ fnv1a64("controls/" + cell_line));
    rng.shuffle(rows);
    if (rows.size() > want) rows.resize(want);
    std::sort(rows.begin(), rows.end());
    return rows;
}

}  // namespace

std::vector<SimilarityRecord> drug_similarity_analysis(const training::EmbeddingSet& embeddings,
                                                       const std::string& drug1,
                                                       const std::string& drug2,
                                                       const std::string& control_marker,
                                                       DistanceKind kind, std::uint64_t seed) {
    std::vector<SimilarityRecord> out;
    for (const auto& [cell_line, rows] : collect_rows(embeddings, drug1, drug2, control_marker)) {
        SimilarityRecord rec;
        rec.cell_line = cell_line;
        if (rows.drug1.empty() || rows.drug2.empty() || rows.control.empty()) {
            rec.flags.push_back("skipped");
            out.push_back(std::move(rec));
            continue;
        }
        bool short_pool = false;
        auto controls = sample_controls(rows.control, rows.drug1.size() + rows.drug2.size(), seed,
                                        cell_line, short_pool);
        if (short_pool) rec.flags.push_back("few_controls");

        RowSet s1{embeddings.matrix.data(), embeddings.latent_dim, rows.drug1};
        RowSet s2{embeddings.matrix.data(), embeddings.latent_dim, rows.drug2};
        RowSet c{embeddings.matrix.data(), embeddings.latent_dim, controls};

        rec.d12 = pairwise_median_distance(s1, s2, kind);
        rec.d1c = pairwise_median_distance(s1, c, kind);
        rec.d2c = pairwise_median_distance(s2, c, kind);
        rec.n_pairs_12 = s1.size() * s2.size();
        rec.n_pairs_1c = s1.size() * c.size();
        rec.n_pairs_2c = s2.size() * c.size();
        rec.d_hat = 0.5 * (rec.d1c + rec.d2c);
        if (rec.d_hat == 0.0) {
            rec.flags.push_back("degenerate");
            rec.d = 0.0;
        } else {
            rec.d = normalized_difference(rec.d12, rec.d1c, rec.d2c);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<KindComparison> distance_kind_comparison(const training::EmbeddingSet& embeddings,
                                                     const std::string& drug1,
                                                     const std::string& drug2,
                                                     const std::string& control_marker,
                                                     std::uint64_t seed) {
    std::vector<KindComparison> out;
    for (const auto& [cell_line, rows] : collect_rows(embeddings, drug1, drug2, control_marker)) {
        if (rows.drug1.empty() || rows.drug2.empty() || rows.control.empty()) continue;
        bool short_pool = false;
        auto controls = sample_controls(rows.control, rows.drug1.size() + rows.drug2.size(), seed,
                                        cell_line, short_pool);
        RowSet s1{embeddings.matrix.data(), embeddings.latent_dim, rows.drug1};
        RowSet s2{embeddings.matrix.data(), embeddings.latent_dim, rows.drug2};
        RowSet c{embeddings.matrix.data(), embeddings.latent_dim, controls};

        for (DistanceKind kind : kAllKinds) {
            KindComparison cmp;
            cmp.cell_line = cell_line;
            cmp.kind = kind;
            try {
                auto all_pairs = [&](const RowSet& a, const RowSet& b, std::vector<double>& dst) {
                    dst.reserve(a.size() * b.size());
                    for (std::size_t i = 0; i < a.size(); ++i)
                        for (std::size_t j = 0; j < b.size(); ++j)
                            dst.push_back(distance(a.row(i), b.row(j), a.dim, kind));
                };
                all_pairs(s1, s2, cmp.d12_all);
                all_pairs(s1, c, cmp.d1c_all);
                all_pairs(s2, c, cmp.d2c_all);
                auto med = [](std::vector<double> v) { return median_inplace(v); };
                cmp.d12_median = med(cmp.d12_all);
                cmp.d1c_median = med(cmp.d1c_all);
                cmp.d2c_median = med(cmp.d2c_all);
            } catch (const NumericError&) {
                cmp.applicable = false;  // e.g. Bray-Curtis over signed embeddings
                cmp.d12_all.clear();
                cmp.d1c_all.clear();
                cmp.d2c_all.clear();
            }
            out.push_back(std::move(cmp));
        }
    }
    return out;
}

std::vector<HistogramRow> histogram_table(const std::vector<KindComparison>& comparisons,
                                          int n_bins) {
    // Pool distances across cell lines, one histogram per (kind, comparison).
    std::map<DistanceKind, std::map<std::string, std::vector<double>>> pooled;
    for (const auto& cmp : comparisons) {
        if (!cmp.applicable) continue;
        auto& sets = pooled[cmp.kind];
        sets["D12"].insert(sets["D12"].end(), cmp.d12_all.begin(), cmp.d12_all.end());
        sets["D1C"].insert(sets["D1C"].end(), cmp.d1c_all.begin(), cmp.d1c_all.end());
        sets["D2C"].insert(sets["D2C"].end(), cmp.d2c_all.begin(), cmp.d2c_all.end());
    }

    std::vector<HistogramRow> out;
    for (const auto& [kind, sets] : pooled) {
        double hi = 0.0;
        for (const auto& [name, values] : sets)
            for (double v : values) hi = std::max(hi, v);
        if (hi <= 0.0) hi = 1.0;
        const double width = hi / n_bins;
        for (const auto& [name, values] : sets) {
            std::vector<std::size_t> counts(static_cast<std::size_t>(n_bins), 0);
            for (double v : values) {
                auto bin = static_cast<std::size_t>(std::min<double>(n_bins - 1, v / width));
                ++counts[bin];
            }
            for (int b = 0; b < n_bins; ++b) {
                HistogramRow row;
                row.kind = to_string(kind);
                row.comparison = name;
                row.bin_lo = b * width;
                row.bin_hi = (b + 1) * width;
                row.count = counts[static_cast<std::size_t>(b)];
                out.push_back(row);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV shapes
// ---------------------------------------------------------------------------

static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_similarity_csv(const std::filesystem::path& path,
                          const std::vector<SimilarityRecord>& records, DistanceKind kind) {
    csv::Table t;
    t.header = {"cell_line", "kind", "D12", "D1C", "D2C", "d", "n_pairs", "flags"};
    for (const auto& r : records) {
        std::string flags;
        for (std::size_t i = 0; i < r.flags.size(); ++i) {
            if (i) flags += ';';
            flags += r.flags[i];
        }
        t.rows.push_back({r.cell_line, to_string(kind), fmt(r.d12), fmt(r.d1c), fmt(r.d2c),
                          fmt(r.d), std::to_string(r.n_pairs_12), flags});
    }
    csv::write_file(path, t);
}

std::vector<SimilarityRecord> read_similarity_csv(const std::filesystem::path& path) {
    auto t = csv::read_file(path);
    std::vector<SimilarityRecord> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        SimilarityRecord r;
        r.cell_line = t.at(i, "cell_line");
        r.d12 = std::stod(t.at(i, "D12"));
        r.d1c = std::stod(t.at(i, "D1C"));
        r.d2c = std::stod(t.at(i, "D2C"));
        r.d = std::stod(t.at(i, "d"));
        r.d_hat = 0.5 * (r.d1c + r.d2c);
        r.n_pairs_12 = static_cast<std::size_t>(std::stoull(t.at(i, "n_pairs")));
        const std::string& flags = t.at(i, "flags");
        std::size_t pos = 0;
        while (pos < flags.size()) {
            auto next = flags.find(';', pos);
            if (next == std::string::npos) next = flags.size();
            if (next > pos) r.flags.push_back(flags.substr(pos, next - pos));
            pos = next + 1;
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_histogram_csv(const std::filesystem::path& path, const std::vector<HistogramRow>& rows) {
    csv::Table t;
    t.header = {"kind", "comparison", "bin_lo", "bin_hi", "count"};
    for (const auto& r : rows)
        t.rows.push_back({r.kind, r.comparison, fmt(r.bin_lo), fmt(r.bin_hi), std::to_string(r.count)});
    csv::write_file(path, t);
}

}  // namespace morphbench::evalsim
