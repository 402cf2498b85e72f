#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "morphbench/cluster_eval.hpp"
#include "morphbench/probe_eval.hpp"
#include "morphbench/similarity_eval.hpp"
#include "morphbench/training.hpp"

namespace morphbench::report {

// Row families of the summary table, in presentation order.
enum class Metric {
    drug_similarity_d,   // d(drug1, drug2)
    drug_distance_inv,   // D^-1(drug1, drug2)
    accuracy,
    precision,
    recall,
    roauc,
    n_clusters,
    not_noise_pct,
    silhouette,
    davies_bouldin_inv,
};
constexpr int kMetricCount = 10;
constexpr Metric kAllMetrics[kMetricCount] = {
    Metric::drug_similarity_d, Metric::drug_distance_inv, Metric::accuracy,  Metric::precision,
    Metric::recall,            Metric::roauc,             Metric::n_clusters, Metric::not_noise_pct,
    Metric::silhouette,        Metric::davies_bouldin_inv};

// Setup columns in presentation order.
enum class SetupCol { aug_multi, aug_one, no_aug_multi, no_aug_one };
constexpr int kSetupCount = 4;
constexpr SetupCol kAllSetups[kSetupCount] = {SetupCol::aug_multi, SetupCol::aug_one,
                                              SetupCol::no_aug_multi, SetupCol::no_aug_one};
SetupCol setup_col(bool augment, augment::CropStrategy crop);
std::string to_string(SetupCol setup);
SetupCol setup_col_from_string(const std::string& s);

// Model rows in presentation order.
constexpr training::ModelKind kModelOrder[4] = {
    training::ModelKind::SSL, training::ModelKind::ICL, training::ModelKind::WSL,
    training::ModelKind::SSR};

struct AggregationRule {
    enum class Center { median, mean } center = Center::median;
    enum class Spread { mad, sd } spread = Spread::mad;
    enum class Transform { identity, reciprocal } transform = Transform::identity;
};
AggregationRule rule_for(Metric metric);
std::string metric_row_name(Metric metric, const std::string& drug1, const std::string& drug2);

double center_of(std::vector<double> values, const AggregationRule& rule);
double spread_of(std::vector<double> values, const AggregationRule& rule);

struct CellStats {
    double center = 0.0;
    double spread = 0.0;
    bool bold = false;
    bool missing = true;
};

struct SummaryTable {
    // [model in kModelOrder][metric][setup]
    std::array<std::array<std::array<CellStats, kSetupCount>, kMetricCount>, 4> cells{};
    std::string drug1 = "drug00";
    std::string drug2 = "drug01";

    bool operator==(const SummaryTable& other) const;
};

// Everything one (model, setup) cell contributes. Probe metrics exclude the
// pooled row; cluster selections are the per-cell-line winners.
struct CellInputs {
    std::vector<evalsim::SimilarityRecord> similarity;
    std::vector<evalprobe::ClassificationMetrics> probe;
    std::vector<evalcluster::GridResult> cluster_selected;
};

using InputMap = std::map<std::pair<training::ModelKind, SetupCol>, CellInputs>;

// Reciprocals are applied per cell line before aggregation; missing inputs
// leave the cell flagged rather than dropping the row.
SummaryTable aggregate(const InputMap& inputs, const std::string& drug1, const std::string& drug2);

// Flags every setup attaining the row maximum (ties all flagged).
void mark_top(SummaryTable& table);

struct BoldTally {
    std::array<std::size_t, kSetupCount> counts{};
    std::size_t total = 0;  // sum of flags (ties push this past 40)

    std::array<double, kSetupCount> percentages() const;
};
BoldTally total_bold(const SummaryTable& table);

struct RenderPaths {
    std::filesystem::path summary_csv;
    std::filesystem::path summary_md;
    std::vector<std::filesystem::path> plots;
};

RenderPaths render(const SummaryTable& table, const std::filesystem::path& out_dir,
                   const std::vector<evalsim::HistogramRow>& histograms = {});

SummaryTable read_summary_csv(const std::filesystem::path& path);

}  // namespace morphbench::report
