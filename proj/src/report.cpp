#include "morphbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "morphbench/csv.hpp"
#include "morphbench/errors.hpp"
#include "morphbench/svg_plot.hpp"

namespace morphbench::report {

SetupCol setup_col(bool augment, augment::CropStrategy crop) {
    const bool multi = crop == augment::CropStrategy::multi_crop;
    if (augment) return multi ? SetupCol::aug_multi : SetupCol::aug_one;
    return multi ? SetupCol::no_aug_multi : SetupCol::no_aug_one;
}

std::string to_string(SetupCol setup) {
    switch (setup) {
        case SetupCol::aug_multi: return "aug_multi_crop";
        case SetupCol::aug_one: return "aug_one_crop";
        case SetupCol::no_aug_multi: return "no_aug_multi_crop";
        case SetupCol::no_aug_one: return "no_aug_one_crop";
    }
    return "aug_multi_crop";
}

SetupCol setup_col_from_string(const std::string& s) {
    for (SetupCol col : kAllSetups)
        if (to_string(col) == s) return col;
    throw DataError("unknown setup column: '" + s + "'");
}

AggregationRule rule_for(Metric metric) {
    AggregationRule rule;
    switch (metric) {
        case Metric::drug_similarity_d:
            break;  // median +- MAD, identity
        case Metric::drug_distance_inv:
            rule.transform = AggregationRule::Transform::reciprocal;
            break;
        case Metric::accuracy:
        case Metric::precision:
        case Metric::recall:
        case Metric::roauc:
            break;
        case Metric::n_clusters:
        case Metric::not_noise_pct:
        case Metric::silhouette:
            rule.center = AggregationRule::Center::mean;
            rule.spread = AggregationRule::Spread::sd;
            break;
        case Metric::davies_bouldin_inv:
            rule.center = AggregationRule::Center::mean;
            rule.spread = AggregationRule::Spread::sd;
            rule.transform = AggregationRule::Transform::reciprocal;
            break;
    }
    return rule;
}

std::string metric_row_name(Metric metric, const std::string& drug1, const std::string& drug2) {
    switch (metric) {
        case Metric::drug_similarity_d: return "d(" + drug1 + ", " + drug2 + ")";
        case Metric::drug_distance_inv: return "D^-1(" + drug1 + ", " + drug2 + ")";
        case Metric::accuracy: return "Accuracy";
        case Metric::precision: return "Precision";
        case Metric::recall: return "Recall";
        case Metric::roauc: return "ROAUC";
        case Metric::n_clusters: return "# clusters";
        case Metric::not_noise_pct: return "Not noise, %";
        case Metric::silhouette: return "Silhouette";
        case Metric::davies_bouldin_inv: return "(Davies-Bouldin)^-1";
    }
    return "";
}

static double median_inplace(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double center_of(std::vector<double> values, const AggregationRule& rule) {
    if (values.empty()) throw DataError("aggregate: empty value set");
    if (rule.center == AggregationRule::Center::median) return median_inplace(values);
    double mean = 0.0;
    for (double v : values) mean += v;
    return mean / static_cast<double>(values.size());
}

double spread_of(std::vector<double> values, const AggregationRule& rule) {
    if (values.empty()) throw DataError("aggregate: empty value set");
    if (rule.spread == AggregationRule::Spread::mad) {
        std::vector<double> centered = values;
        const double med = median_inplace(centered);
        std::vector<double> dev;
        dev.reserve(values.size());
        for (double v : values) dev.push_back(std::abs(v - med));
        return median_inplace(dev);
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    return std::sqrt(acc / static_cast<double>(values.size()));
}

bool SummaryTable::operator==(const SummaryTable& other) const {
    if (drug1 != other.drug1 || drug2 != other.drug2) return false;
    for (int m = 0; m < 4; ++m)
        for (int r = 0; r < kMetricCount; ++r)
            for (int s = 0; s < kSetupCount; ++s) {
                const CellStats& a = cells[m][r][s];
                const CellStats& b = other.cells[m][r][s];
                if (a.missing != b.missing || a.bold != b.bold) return false;
                if (!a.missing && (a.center != b.center || a.spread != b.spread)) return false;
            }
    return true;
}

namespace {

// Per-cell-line values of one metric from a cell's inputs; reciprocal is
// applied here, per cell line, before any aggregation.
std::vector<double> metric_values(Metric metric, const CellInputs& in) {
    std::vector<double> out;
    switch (metric) {
        case Metric::drug_similarity_d:
            for (const auto& r : in.similarity)
                if (r.flags.empty()) out.push_back(r.d);
            break;
        case Metric::drug_distance_inv:
            for (const auto& r : in.similarity)
                if (r.flags.empty() && r.d12 > 0.0) out.push_back(1.0 / r.d12);
            break;
        case Metric::accuracy:
        case Metric::precision:
        case Metric::recall:
        case Metric::roauc:
            for (const auto& m : in.probe) {
                if (m.cell_line == evalprobe::kPooledCellLine) continue;
                if (metric == Metric::accuracy) out.push_back(m.accuracy);
                else if (metric == Metric::precision) out.push_back(m.precision);
                else if (metric == Metric::recall) out.push_back(m.recall);
                else if (m.roc_auc) out.push_back(*m.roc_auc);
            }
            break;
        case Metric::n_clusters:
            for (const auto& g : in.cluster_selected)
                out.push_back(static_cast<double>(g.metrics.n_clusters));
            break;
        case Metric::not_noise_pct:
            for (const auto& g : in.cluster_selected) out.push_back(100.0 - g.metrics.noise_pct);
            break;
        case Metric::silhouette:
            for (const auto& g : in.cluster_selected)
                if (g.metrics.silhouette) out.push_back(*g.metrics.silhouette);
            break;
        case Metric::davies_bouldin_inv:
            for (const auto& g : in.cluster_selected)
                if (g.metrics.davies_bouldin && *g.metrics.davies_bouldin > 0.0)
                    out.push_back(1.0 / *g.metrics.davies_bouldin);
            break;
    }
    return out;
}

int model_row(training::ModelKind kind) {
    for (int i = 0; i < 4; ++i)
        if (kModelOrder[i] == kind) return i;
    return 0;
}

}  // namespace

SummaryTable aggregate(const InputMap& inputs, const std::string& drug1, const std::string& drug2) {
    SummaryTable table;
    table.drug1 = drug1;
    table.drug2 = drug2;
    for (const auto& [key, cell_inputs] : inputs) {
        const int m = model_row(key.first);
        const int s = static_cast<int>(key.second);
        for (int r = 0; r < kMetricCount; ++r) {
            const Metric metric = kAllMetrics[r];
            const auto values = metric_values(metric, cell_inputs);
            CellStats& cell = table.cells[static_cast<std::size_t>(m)][static_cast<std::size_t>(r)][static_cast<std::size_t>(s)];
            if (values.empty()) {
                cell.missing = true;  // flagged, not dropped
                continue;
            }
            const AggregationRule rule = rule_for(metric);
            cell.center = center_of(values, rule);
            cell.spread = spread_of(values, rule);
            cell.missing = false;
        }
    }
    return table;
}

void mark_top(SummaryTable& table) {
    for (auto& model : table.cells) {
        for (auto& row : model) {
            double best = -std::numeric_limits<double>::infinity();
            bool any = false;
            for (const auto& cell : row) {
                if (cell.missing) continue;
                best = std::max(best, cell.center);
                any = true;
            }
            for (auto& cell : row) cell.bold = any && !cell.missing && cell.center == best;
        }
    }
}

BoldTally total_bold(const SummaryTable& table) {
    BoldTally tally;
    for (const auto& model : table.cells)
        for (const auto& row : model)
            for (int s = 0; s < kSetupCount; ++s)
                if (row[static_cast<std::size_t>(s)].bold) {
                    ++tally.counts[static_cast<std::size_t>(s)];
                    ++tally.total;
                }
    return tally;
}

std::array<double, kSetupCount> BoldTally::percentages() const {
    std::array<double, kSetupCount> out{};
    if (total == 0) return out;
    for (int s = 0; s < kSetupCount; ++s)
        out[static_cast<std::size_t>(s)] =
            100.0 * static_cast<double>(counts[static_cast<std::size_t>(s)]) / static_cast<double>(total);
    return out;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

std::string full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Fixed display formats per row family: integers for cluster counts and
// noise, two decimals for everything else.
std::string display(Metric metric, double v) {
    char buf[32];
    if (metric == Metric::n_clusters || metric == Metric::not_noise_pct)
        std::snprintf(buf, sizeof(buf), "%.0f", v);
    else
        std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string percent_str(double v) {
    char buf[32];
    const double rounded = std::round(v * 10.0) / 10.0;
    if (rounded == std::floor(rounded)) std::snprintf(buf, sizeof(buf), "%.0f%%", rounded);
    else std::snprintf(buf, sizeof(buf), "%.1f%%", rounded);
    return buf;
}

}  // namespace

RenderPaths render(const SummaryTable& table, const std::filesystem::path& out_dir,
                   const std::vector<evalsim::HistogramRow>& histograms) {
    std::filesystem::create_directories(out_dir);
    RenderPaths paths;

    // summary.csv: one row per (model, metric), full precision, round-trippable.
    {
        csv::Table t;
        t.header = {"model", "metric"};
        for (SetupCol s : kAllSetups) {
            t.header.push_back("center_" + to_string(s));
            t.header.push_back("spread_" + to_string(s));
            t.header.push_back("bold_" + to_string(s));
        }
        t.header.push_back("drug1");
        t.header.push_back("drug2");
        for (int m = 0; m < 4; ++m) {
            for (int r = 0; r < kMetricCount; ++r) {
                std::vector<std::string> row{training::to_string(kModelOrder[m]),
                                             metric_row_name(kAllMetrics[r], table.drug1, table.drug2)};
                for (int s = 0; s < kSetupCount; ++s) {
                    const CellStats& cell = table.cells[static_cast<std::size_t>(m)][static_cast<std::size_t>(r)][static_cast<std::size_t>(s)];
                    row.push_back(cell.missing ? "NA" : full(cell.center));
                    row.push_back(cell.missing ? "NA" : full(cell.spread));
                    row.push_back(cell.bold ? "1" : "0");
                }
                row.push_back(table.drug1);
                row.push_back(table.drug2);
                t.rows.push_back(std::move(row));
            }
        }
        paths.summary_csv = out_dir / "summary.csv";
        csv::write_file(paths.summary_csv, t);
    }

    // summary.md: the presentation view with bold marks and a Total bold row.
    {
        paths.summary_md = out_dir / "summary.md";
        std::ofstream md(paths.summary_md);
        const BoldTally tally = total_bold(table);
        for (int m = 0; m < 4; ++m) {
            md << "### " << training::to_string(kModelOrder[m]) << "\n\n";
            md << "| metric | aug multi_crop | aug one_crop | no_aug multi_crop | no_aug one_crop |\n";
            md << "| --- | --- | --- | --- | --- |\n";
            for (int r = 0; r < kMetricCount; ++r) {
                md << "| " << metric_row_name(kAllMetrics[r], table.drug1, table.drug2) << " |";
                for (int s = 0; s < kSetupCount; ++s) {
                    const CellStats& cell = table.cells[static_cast<std::size_t>(m)][static_cast<std::size_t>(r)][static_cast<std::size_t>(s)];
                    if (cell.missing) {
                        md << " NA |";
                        continue;
                    }
                    const std::string text = display(kAllMetrics[r], cell.center) + " ± " +
                                             display(kAllMetrics[r], cell.spread);
                    md << " " << (cell.bold ? "**" + text + "**" : text) << " |";
                }
                md << "\n";
            }
            md << "\n";
        }
        md << "### Total bold\n\n";
        md << "| aug multi_crop | aug one_crop | no_aug multi_crop | no_aug one_crop |\n";
        md << "| --- | --- | --- | --- |\n|";
        const auto pct = tally.percentages();
        for (int s = 0; s < kSetupCount; ++s)
            md << " " << tally.counts[static_cast<std::size_t>(s)] << " ("
               << percent_str(pct[static_cast<std::size_t>(s)]) << ") |";
        md << "\n";
    }

    // Barplots: cluster counts and silhouettes per model x setup.
    for (Metric metric : {Metric::n_clusters, Metric::silhouette}) {
        const int r = static_cast<int>(std::find(std::begin(kAllMetrics), std::end(kAllMetrics), metric) -
                                       std::begin(kAllMetrics));
        std::vector<svg::BarGroup> groups;
        for (int m = 0; m < 4; ++m) {
            svg::BarGroup g;
            g.title = training::to_string(kModelOrder[m]);
            for (int s = 0; s < kSetupCount; ++s) {
                const CellStats& cell = table.cells[static_cast<std::size_t>(m)][static_cast<std::size_t>(r)][static_cast<std::size_t>(s)];
                if (cell.missing) continue;
                g.bars.push_back({to_string(kAllSetups[s]), cell.center, cell.spread});
            }
            if (!g.bars.empty()) groups.push_back(std::move(g));
        }
        if (groups.empty()) continue;
        const std::string name =
            metric == Metric::n_clusters ? "clusters_barplot.svg" : "silhouette_barplot.svg";
        const auto path = out_dir / name;
        svg::write_barplot(path, metric_row_name(metric, table.drug1, table.drug2), groups);
        paths.plots.push_back(path);
    }

    // Distance distribution histograms, one file per kind.
    if (!histograms.empty()) {
        std::map<std::string, std::map<std::string, svg::HistogramSeries>> by_kind;
        for (const auto& row : histograms) {
            auto& series = by_kind[row.kind][row.comparison];
            series.label = row.comparison;
            series.bin_lo.push_back(row.bin_lo);
            series.bin_hi.push_back(row.bin_hi);
            series.counts.push_back(static_cast<double>(row.count));
        }
        for (const auto& [kind, series_map] : by_kind) {
            std::vector<svg::HistogramSeries> series;
            for (const auto& [name, s] : series_map) series.push_back(s);
            const auto path = out_dir / ("distances_" + kind + ".svg");
            svg::write_histogram(path, "Distance distributions (" + kind + ")", series);
            paths.plots.push_back(path);
        }
    }
    return paths;
}

SummaryTable read_summary_csv(const std::filesystem::path& path) {
    auto t = csv::read_file(path);
    SummaryTable table;
    if (!t.rows.empty()) {
        table.drug1 = t.at(0, "drug1");
        table.drug2 = t.at(0, "drug2");
    }
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::string model = t.at(i, "model");
        const std::string metric = t.at(i, "metric");
        int m = -1, r = -1;
        for (int mm = 0; mm < 4; ++mm)
            if (training::to_string(kModelOrder[mm]) == model) m = mm;
        for (int rr = 0; rr < kMetricCount; ++rr)
            if (metric_row_name(kAllMetrics[rr], table.drug1, table.drug2) == metric) r = rr;
        if (m < 0 || r < 0) throw DataError("summary.csv: unrecognized row " + model + "/" + metric);
        for (int s = 0; s < kSetupCount; ++s) {
            CellStats& cell = table.cells[static_cast<std::size_t>(m)][static_cast<std::size_t>(r)][static_cast<std::size_t>(s)];
            const std::string center = t.at(i, "center_" + to_string(kAllSetups[s]));
            cell.bold = t.at(i, "bold_" + to_string(kAllSetups[s])) == "1";
            if (center == "NA") {
                cell.missing = true;
            } else {
                cell.missing = false;
                cell.center = std::stod(center);
                cell.spread = std::stod(t.at(i, "spread_" + to_string(kAllSetups[s])));
            }
        }
    }
    return table;
}

}  // namespace morphbench::report
