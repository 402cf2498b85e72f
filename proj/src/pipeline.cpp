#include "morphbench/pipeline.hpp"

#include <fstream>

#include "morphbench/csv.hpp"
#include "morphbench/dataset_io.hpp"
#include "morphbench/errors.hpp"

namespace morphbench::pipeline {

void evaluate_run(const std::filesystem::path& run_dir, const training::EmbeddingSet& embeddings,
                  const ExperimentConfig& config) {
    const auto eval_dir = run_dir / "eval";
    std::filesystem::create_directories(eval_dir);

    // Distance-based similarity on validation rows.
    auto records = evalsim::drug_similarity_analysis(embeddings, config.similarity_drug1,
                                                     config.similarity_drug2,
                                                     config.similarity_control,
                                                     config.similarity_kind, config.seed);
    evalsim::write_similarity_csv(eval_dir / "similarity.csv", records, config.similarity_kind);
    auto comparisons = evalsim::distance_kind_comparison(embeddings, config.similarity_drug1,
                                                         config.similarity_drug2,
                                                         config.similarity_control, config.seed);
    evalsim::write_histogram_csv(eval_dir / "similarity_hist.csv",
                                 evalsim::histogram_table(comparisons));

    // Probe classification: grid-searched on the training split, metrics over
    // the entire embedded dataset per cell line.
    std::vector<std::string> ids;
    std::vector<Label> labels;
    for (const auto& m : embeddings.meta) {
        ids.push_back(m.sample_id);
        labels.push_back(m.label);
    }
    const DatasetSplit split =
        split_ids(ids, labels, embeddings.split_val_fraction, embeddings.split_seed);
    auto grid = evalprobe::grid_search_probe(embeddings, split, config.probe, config.seed);
    evalprobe::write_probe_grid_csv(eval_dir / "probe_grid.csv", grid.log);

    auto scores = grid.probe.scores(embeddings.matrix, embeddings.latent_dim);
    std::vector<int> class_labels;
    class_labels.reserve(labels.size());
    for (Label l : labels) class_labels.push_back(models::class_index(l));
    auto metrics = evalprobe::compute_classification_metrics(scores, class_labels, embeddings.meta);
    evalprobe::write_probe_metrics_csv(eval_dir / "probe_metrics.csv", embeddings.model_id,
                                       embeddings.setup_id, metrics);

    // Clustering grids and the per-cell-line selection.
    auto grid_results = evalcluster::grid_search_partitions(
        embeddings, config.cluster_n_neighbors, config.cluster_min_cluster_size, config.seed);
    evalcluster::write_cluster_grid_csv(eval_dir / "cluster_grid.csv", grid_results);

    std::map<std::string, std::vector<evalcluster::GridResult>> by_cell_line;
    for (const auto& r : grid_results) by_cell_line[r.cell_line].push_back(r);
    std::vector<evalcluster::GridResult> selections;
    const auto partitions_dir = eval_dir / "partitions";
    std::filesystem::create_directories(partitions_dir);
    for (const auto& [cell_line, results] : by_cell_line) {
        evalcluster::GridResult choice;
        try {
            choice = evalcluster::select_best_partition(results);
        } catch (const DataError&) {
            continue;  // no valid partition for this cell line
        }
        selections.push_back(choice);

        // Recompute the winning reduction and labels for the plotting file.
        std::vector<float> data;
        std::vector<std::string> sample_ids;
        for (std::size_t i = 0; i < embeddings.meta.size(); ++i) {
            if (embeddings.meta[i].cell_line != cell_line) continue;
            const float* row = embeddings.row(i);
            data.insert(data.end(), row, row + embeddings.latent_dim);
            sample_ids.push_back(embeddings.meta[i].sample_id);
        }
        evalcluster::SelectedPartition partition;
        partition.choice = choice;
        partition.sample_ids = std::move(sample_ids);
        partition.points = evalcluster::reduce(data, partition.sample_ids.size(),
                                               embeddings.latent_dim, choice.reduction);
        partition.labels = evalcluster::cluster(partition.points, partition.sample_ids.size(),
                                                choice.reduction.n_components, choice.clustering);
        evalcluster::write_partition_csv(partitions_dir / (cell_line + ".csv"), partition);
    }
    evalcluster::write_cluster_selected_csv(eval_dir / "cluster_selected.csv", selections);
}

report::InputMap collect_report_inputs(const std::filesystem::path& runs_dir) {
    report::InputMap inputs;
    if (!std::filesystem::exists(runs_dir)) throw DataError("no runs directory: " + runs_dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(runs_dir)) {
        if (!entry.is_directory()) continue;
        const auto record_path = entry.path() / "record.json";
        if (!std::filesystem::exists(record_path)) continue;
        std::ifstream in(record_path);
        std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        const auto record = training::RunRecord::from_json(text);
        if (record.failed) continue;
        if (record.setup.icl_double_augment) continue;

        const auto key = std::make_pair(record.setup.model,
                                        report::setup_col(record.setup.augment, record.setup.crop));
        report::CellInputs& cell = inputs[key];
        const auto eval_dir = entry.path() / "eval";
        if (std::filesystem::exists(eval_dir / "similarity.csv"))
            cell.similarity = evalsim::read_similarity_csv(eval_dir / "similarity.csv");
        if (std::filesystem::exists(eval_dir / "probe_metrics.csv"))
            cell.probe = evalprobe::read_probe_metrics_csv(eval_dir / "probe_metrics.csv");
        if (std::filesystem::exists(eval_dir / "cluster_selected.csv"))
            cell.cluster_selected =
                evalcluster::read_cluster_selected_csv(eval_dir / "cluster_selected.csv");
    }
    return inputs;
}

PipelineResult run_full_pipeline(const ExperimentConfig& config,
                                 const std::filesystem::path& out_root) {
    PipelineResult result;
    result.data_dir = out_root / "data";
    result.runs_dir = out_root / "runs";
    result.report_dir = out_root / "report";

    Dataset raw;
    if (std::filesystem::exists(result.data_dir / "manifest.json")) {
        raw = load_dataset(result.data_dir);
    } else {
        raw = generate_synthetic(config.data);
        save_dataset(raw, result.data_dir, config.data.to_json());
    }
    const Dataset balanced = balance_subset(raw, config.seed);
    const DatasetSplit data_split = split(balanced, config.val_fraction, config.seed);

    training::MatrixOptions matrix;
    matrix.train.optimizer = config.optimizer;
    matrix.train.early_stop = config.early_stop;
    matrix.train.backbone = config.backbone;
    matrix.train.byol = config.byol;
    matrix.train.policy = config.policy;
    matrix.include_icl_double_augment = config.include_icl_double_augment;
    matrix.seed = config.seed;
    matrix.dataset_checksum = dataset_checksum(balanced);

    result.records = training::train_matrix(balanced, data_split, matrix, result.runs_dir);

    for (const auto& record : result.records) {
        if (record.failed) continue;
        const auto run_dir = result.runs_dir / record.run_id;
        const auto embed_dir = run_dir / "embeddings";
        training::EmbeddingSet embeddings;
        if (std::filesystem::exists(embed_dir / "manifest.json")) {
            embeddings = training::load_embeddings(embed_dir);
        } else {
            embeddings = training::embed_from_checkpoint(record.checkpoint_path, balanced);
            embeddings.split_val_fraction = config.val_fraction;
            embeddings.split_seed = config.seed;
            training::save_embeddings(embeddings, embed_dir);
        }
        if (!std::filesystem::exists(run_dir / "eval" / "cluster_selected.csv"))
            evaluate_run(run_dir, embeddings, config);
    }

    const auto inputs = collect_report_inputs(result.runs_dir);
    result.summary = report::aggregate(inputs, config.similarity_drug1, config.similarity_drug2);
    report::mark_top(result.summary);

    // Histograms from the first available run (figure analogue, one per kind).
    std::vector<evalsim::HistogramRow> hist;
    for (const auto& record : result.records) {
        const auto hist_path = result.runs_dir / record.run_id / "eval" / "similarity_hist.csv";
        if (record.failed || !std::filesystem::exists(hist_path)) continue;
        auto t = csv::read_file(hist_path);
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            evalsim::HistogramRow row;
            row.kind = t.at(i, "kind");
            row.comparison = t.at(i, "comparison");
            row.bin_lo = std::stod(t.at(i, "bin_lo"));
            row.bin_hi = std::stod(t.at(i, "bin_hi"));
            row.count = static_cast<std::size_t>(std::stoull(t.at(i, "count")));
            hist.push_back(std::move(row));
        }
        break;
    }
    report::render(result.summary, result.report_dir, hist);
    return result;
}

}  // namespace morphbench::pipeline
