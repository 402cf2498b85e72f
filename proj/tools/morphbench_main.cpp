#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "morphbench/config.hpp"
#include "morphbench/dataset_io.hpp"
#include "morphbench/errors.hpp"
#include "morphbench/pipeline.hpp"

namespace fs = std::filesystem;
using namespace morphbench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOpts {
    std::string profile = "desk";
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

ExperimentConfig resolve_config(const CommonOpts& opts) {
    ExperimentConfig cfg = ExperimentConfig::from_profile(opts.profile);
    if (!opts.config_path.empty()) cfg.apply_json_file(opts.config_path);
    if (opts.seed_given) {
        cfg.seed = opts.seed;
        cfg.data.seed = opts.seed;
    }
    return cfg;
}

training::TrainingSetup parse_setup(const std::string& text, std::uint64_t seed) {
    // MODEL,AUG,CROP e.g. "ICL,aug,multi_crop"
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto next = text.find(',', pos);
        if (next == std::string::npos) next = text.size();
        parts.push_back(text.substr(pos, next - pos));
        pos = next + 1;
    }
    if (parts.size() != 3)
        throw DataError("--setup expects MODEL,AUG,CROP (e.g. ICL,aug,multi_crop)");
    training::TrainingSetup setup;
    setup.model = training::model_kind_from_string(parts[0]);
    if (parts[1] == "aug") setup.augment = true;
    else if (parts[1] == "no_aug") setup.augment = false;
    else throw DataError("setup augment field must be aug|no_aug");
    setup.crop = augment::crop_strategy_from_string(parts[2]);
    setup.seed = seed;
    return setup;
}

Dataset load_or_generate(const ExperimentConfig& cfg, const std::string& data_dir,
                         const fs::path& out_root) {
    if (!data_dir.empty()) return load_dataset(data_dir);
    const auto dir = out_root / "data";
    if (fs::exists(dir / "manifest.json")) return load_dataset(dir);
    Dataset raw = generate_synthetic(cfg.data);
    save_dataset(raw, dir, cfg.data.to_json());
    return raw;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"morphbench: representation-learning benchmark on cell-image crops"};
    app.require_subcommand(1);

    CommonOpts common;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--profile", common.profile, "config preset: desk|full")
            ->capture_default_str();
        cmd->add_option("--config", common.config_path, "JSON config file overriding the profile");
        cmd->add_option("--seed", common.seed, "override the experiment seed")
            ->each([&](const std::string&) { common.seed_given = true; });
    };

    // generate-data
    std::string out_dir;
    auto* gen = app.add_subcommand("generate-data", "render a synthetic dataset");
    add_common(gen);
    gen->add_option("--out", out_dir, "output dataset directory")->required();

    // ingest
    std::string ingest_images, ingest_meta, ingest_out;
    auto* ingest_cmd = app.add_subcommand("ingest", "serialize a folder of image crops");
    add_common(ingest_cmd);
    ingest_cmd->add_option("--images", ingest_images, "folder of 8-bit grayscale PNG/TIFF crops")
        ->required();
    ingest_cmd->add_option("--meta", ingest_meta, "metadata CSV with a filename column")
        ->required();
    ingest_cmd->add_option("--out", ingest_out, "output dataset directory")->required();

    // train
    std::string setup_text, train_data_dir, train_out = "runs";
    bool train_all = false;
    auto* train_cmd = app.add_subcommand("train", "train one setup or the full matrix");
    add_common(train_cmd);
    train_cmd->add_option("--setup", setup_text, "MODEL,AUG,CROP (e.g. ICL,aug,multi_crop)");
    train_cmd->add_flag("--all", train_all, "train all 16 setups");
    train_cmd->add_option("--data", train_data_dir, "serialized dataset directory (default: synthesize)");
    train_cmd->add_option("--out", train_out, "runs output directory")->capture_default_str();

    // embed
    std::string ckpt_path, embed_data_dir, embed_out;
    auto* embed_cmd = app.add_subcommand("embed", "export embeddings from a checkpoint");
    add_common(embed_cmd);
    embed_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    embed_cmd->add_option("--data", embed_data_dir, "serialized dataset directory")->required();
    embed_cmd->add_option("--out", embed_out, "embeddings output directory")->required();

    // eval-similarity
    std::string sim_embeddings, sim_drug1, sim_drug2, sim_control = "DMSO", sim_kind = "euclidean",
                sim_out;
    auto* sim_cmd = app.add_subcommand("eval-similarity", "distance-based drug similarity");
    add_common(sim_cmd);
    sim_cmd->add_option("--embeddings", sim_embeddings, "embeddings directory")->required();
    sim_cmd->add_option("--drug1", sim_drug1)->required();
    sim_cmd->add_option("--drug2", sim_drug2)->required();
    sim_cmd->add_option("--control", sim_control)->capture_default_str();
    sim_cmd->add_option("--kind", sim_kind, "euclidean|cosine|correlation|braycurtis")
        ->capture_default_str();
    sim_cmd->add_option("--out", sim_out, "output directory (default: embeddings dir)");

    // eval-probe
    std::string probe_embeddings, probe_out;
    auto* probe_cmd = app.add_subcommand("eval-probe", "drug-vs-control probe classification");
    add_common(probe_cmd);
    probe_cmd->add_option("--embeddings", probe_embeddings, "embeddings directory")->required();
    probe_cmd->add_option("--out", probe_out, "output directory (default: embeddings dir)");

    // eval-cluster
    std::string cluster_embeddings, cluster_out;
    auto* cluster_cmd = app.add_subcommand("eval-cluster", "per-cell-line clustering pipeline");
    add_common(cluster_cmd);
    cluster_cmd->add_option("--embeddings", cluster_embeddings, "embeddings directory")->required();
    cluster_cmd->add_option("--out", cluster_out, "output directory (default: embeddings dir)");

    // report
    std::string report_runs, report_out;
    auto* report_cmd = app.add_subcommand("report", "aggregate run evaluations into the summary");
    add_common(report_cmd);
    report_cmd->add_option("--runs", report_runs, "runs directory")->required();
    report_cmd->add_option("--out", report_out, "report output directory")->required();

    // run (one-shot pipeline)
    std::string run_out = "out";
    auto* run_cmd = app.add_subcommand("run", "generate, train the matrix, evaluate and report");
    add_common(run_cmd);
    run_cmd->add_option("--out", run_out, "working directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        const ExperimentConfig cfg = resolve_config(common);

        if (gen->parsed()) {
            Dataset data = generate_synthetic(cfg.data);
            save_dataset(data, out_dir, cfg.data.to_json());
            std::cout << "wrote " << data.size() << " crops to " << out_dir << "\n";
            return kExitOk;
        }

        if (ingest_cmd->parsed()) {
            Dataset data = ingest_folder(ingest_images, ingest_meta);
            save_dataset(data, ingest_out);
            std::cout << "ingested " << data.size() << " crops to " << ingest_out << "\n";
            return kExitOk;
        }

        if (train_cmd->parsed()) {
            if (!train_all && setup_text.empty())
                throw DataError("train: pass --setup MODEL,AUG,CROP or --all");
            Dataset raw = load_or_generate(cfg, train_data_dir, fs::path(train_out).parent_path());
            Dataset balanced = balance_subset(raw, cfg.seed);
            DatasetSplit data_split = split(balanced, cfg.val_fraction, cfg.seed);

            training::MatrixOptions matrix;
            matrix.train.optimizer = cfg.optimizer;
            matrix.train.early_stop = cfg.early_stop;
            matrix.train.backbone = cfg.backbone;
            matrix.train.byol = cfg.byol;
            matrix.train.policy = cfg.policy;
            matrix.include_icl_double_augment = cfg.include_icl_double_augment;
            matrix.seed = cfg.seed;
            matrix.dataset_checksum = dataset_checksum(balanced);

            if (train_all) {
                auto records = training::train_matrix(balanced, data_split, matrix, train_out);
                std::size_t failed = 0;
                for (const auto& r : records) failed += r.failed ? 1 : 0;
                std::cout << records.size() << " setups, " << failed << " failed, records under "
                          << train_out << "\n";
                return failed == 0 ? kExitOk : kExitNumeric;
            }

            training::TrainingSetup setup = parse_setup(setup_text, cfg.seed);
            const std::string id = training::run_id(setup, cfg.optimizer, cfg.backbone,
                                                    matrix.dataset_checksum);
            training::TrainOptions options = matrix.train;
            options.out_dir = fs::path(train_out) / id;
            auto result = training::train(setup, balanced, data_split, options);
            result.record.run_id = id;
            std::ofstream rec(options.out_dir / "record.json");
            rec << result.record.to_json() << "\n";
            std::cout << (result.record.failed ? "FAILED " : "trained ") << setup.id() << " ("
                      << result.record.epochs_completed << " epochs) -> " << options.out_dir
                      << "\n";
            return result.record.failed ? kExitNumeric : kExitOk;
        }

        if (embed_cmd->parsed()) {
            Dataset data = load_dataset(embed_data_dir);
            auto set = training::embed_from_checkpoint(ckpt_path, data);
            set.split_val_fraction = cfg.val_fraction;
            set.split_seed = cfg.seed;
            training::save_embeddings(set, embed_out);
            std::cout << set.rows() << " embeddings of dim " << set.latent_dim << " -> "
                      << embed_out << "\n";
            return kExitOk;
        }

        if (sim_cmd->parsed()) {
            auto embeddings = training::load_embeddings(sim_embeddings);
            const auto kind = evalsim::distance_kind_from_string(sim_kind);
            auto records = evalsim::drug_similarity_analysis(embeddings, sim_drug1, sim_drug2,
                                                             sim_control, kind, cfg.seed);
            const fs::path dir = sim_out.empty() ? fs::path(sim_embeddings) : fs::path(sim_out);
            fs::create_directories(dir);
            evalsim::write_similarity_csv(dir / "similarity.csv", records, kind);
            auto comparisons = evalsim::distance_kind_comparison(embeddings, sim_drug1, sim_drug2,
                                                                 sim_control, cfg.seed);
            evalsim::write_histogram_csv(dir / "similarity_hist.csv",
                                         evalsim::histogram_table(comparisons));
            std::cout << records.size() << " cell lines -> " << (dir / "similarity.csv") << "\n";
            return kExitOk;
        }

        if (probe_cmd->parsed()) {
            auto embeddings = training::load_embeddings(probe_embeddings);
            const fs::path dir = probe_out.empty() ? fs::path(probe_embeddings) : fs::path(probe_out);
            fs::create_directories(dir);
            std::vector<std::string> ids;
            std::vector<Label> labels;
            std::vector<int> class_labels;
            for (const auto& m : embeddings.meta) {
                ids.push_back(m.sample_id);
                labels.push_back(m.label);
                class_labels.push_back(models::class_index(m.label));
            }
            auto data_split = split_ids(ids, labels, embeddings.split_val_fraction,
                                        embeddings.split_seed);
            auto grid = evalprobe::grid_search_probe(embeddings, data_split, cfg.probe, cfg.seed);
            evalprobe::write_probe_grid_csv(dir / "probe_grid.csv", grid.log);
            auto scores = grid.probe.scores(embeddings.matrix, embeddings.latent_dim);
            auto metrics =
                evalprobe::compute_classification_metrics(scores, class_labels, embeddings.meta);
            evalprobe::write_probe_metrics_csv(dir / "probe_metrics.csv", embeddings.model_id,
                                               embeddings.setup_id, metrics);
            std::cout << "probe metrics -> " << (dir / "probe_metrics.csv") << "\n";
            return kExitOk;
        }

        if (cluster_cmd->parsed()) {
            auto embeddings = training::load_embeddings(cluster_embeddings);
            const fs::path dir =
                cluster_out.empty() ? fs::path(cluster_embeddings) : fs::path(cluster_out);
            // evaluate_run writes under dir/eval; reuse it for the cluster part
            // by running the full evaluation into a scratch layout.
            fs::create_directories(dir);
            auto grid_results = evalcluster::grid_search_partitions(
                embeddings, cfg.cluster_n_neighbors, cfg.cluster_min_cluster_size, cfg.seed);
            evalcluster::write_cluster_grid_csv(dir / "cluster_grid.csv", grid_results);
            std::map<std::string, std::vector<evalcluster::GridResult>> by_cell_line;
            for (const auto& r : grid_results) by_cell_line[r.cell_line].push_back(r);
            std::vector<evalcluster::GridResult> selections;
            fs::create_directories(dir / "partitions");
            for (const auto& [cell_line, results] : by_cell_line) {
                try {
                    auto choice = evalcluster::select_best_partition(results);
                    selections.push_back(choice);
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
                    partition.labels =
                        evalcluster::cluster(partition.points, partition.sample_ids.size(),
                                             choice.reduction.n_components, choice.clustering);
                    evalcluster::write_partition_csv(dir / "partitions" / (cell_line + ".csv"),
                                                     partition);
                } catch (const DataError&) {
                    continue;
                }
            }
            evalcluster::write_cluster_selected_csv(dir / "cluster_selected.csv", selections);
            std::cout << grid_results.size() << " grid rows, " << selections.size()
                      << " selections -> " << (dir / "cluster_selected.csv") << "\n";
            return kExitOk;
        }

        if (report_cmd->parsed()) {
            auto inputs = pipeline::collect_report_inputs(report_runs);
            auto table = report::aggregate(inputs, cfg.similarity_drug1, cfg.similarity_drug2);
            report::mark_top(table);
            auto paths = report::render(table, report_out);
            const auto tally = report::total_bold(table);
            std::cout << "summary -> " << paths.summary_csv << " (bold total " << tally.total
                      << ")\n";
            return kExitOk;
        }

        if (run_cmd->parsed()) {
            auto result = pipeline::run_full_pipeline(cfg, run_out);
            std::size_t failed = 0;
            for (const auto& r : result.records) failed += r.failed ? 1 : 0;
            std::cout << result.records.size() << " runs (" << failed << " failed), report under "
                      << result.report_dir << "\n";
            return failed == 0 ? kExitOk : kExitNumeric;
        }
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
