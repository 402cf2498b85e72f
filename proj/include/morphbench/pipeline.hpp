#pragma once

#include <filesystem>
#include <vector>

#include "morphbench/config.hpp"
#include "morphbench/report.hpp"

namespace morphbench::pipeline {

// Writes similarity/probe/cluster outputs under <run_dir>/eval.
void evaluate_run(const std::filesystem::path& run_dir, const training::EmbeddingSet& embeddings,
                  const ExperimentConfig& config);

// Scans runs/*/record.json and eval outputs into report inputs. Double-augment
// variant runs are ignored (the summary has four setup columns).
report::InputMap collect_report_inputs(const std::filesystem::path& runs_dir);

struct PipelineResult {
    std::vector<training::RunRecord> records;
    report::SummaryTable summary;
    std::filesystem::path data_dir;
    std::filesystem::path runs_dir;
    std::filesystem::path report_dir;
};

// generate -> balance -> split -> 16-setup matrix -> embed -> evaluate ->
// aggregate -> render. Resumable: completed runs are skipped.
PipelineResult run_full_pipeline(const ExperimentConfig& config,
                                 const std::filesystem::path& out_root);

}  // namespace morphbench::pipeline
