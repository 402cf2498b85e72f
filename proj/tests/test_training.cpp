#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "morphbench/dataset_io.hpp"
#include "morphbench/probe_eval.hpp"
#include "morphbench/synthetic.hpp"
#include "morphbench/training.hpp"
#include "test_util.hpp"

using namespace morphbench;
using namespace morphbench::training;

namespace {

Dataset small_balanced(int images_per_condition = 8, std::uint64_t seed = 3) {
    SyntheticConfig cfg;
    cfg.n_cell_lines = 1;
    cfg.n_drugs = 2;
    cfg.images_per_condition = images_per_condition;
    cfg.seed = seed;
    return balance_subset(generate_synthetic(cfg), seed);
}

TrainOptions micro_options(int epochs, int batch = 16) {
    TrainOptions options;
    options.optimizer.epochs = epochs;
    options.optimizer.batch_size = batch;
    options.optimizer.learning_rate = 1e-3;
    options.backbone = models::BackboneConfig{{{8, 3, 2}, {16, 3, 2}}, 16, 64, 1};
    options.byol = models::ByolConfig{16, 16, 0.99};
    return options;
}

}  // namespace

TEST_CASE("early_stop_check rule traces") {
    EarlyStopConfig cfg;  // delta 0.05, patience 3
    CHECK_FALSE(early_stop_check({1.0, 0.9, 0.8, 0.7, 0.6}, cfg));
    // 0.6 > 1.05 * 0.5 for three consecutive epochs
    CHECK(early_stop_check({1.0, 0.5, 0.6, 0.6, 0.6}, cfg));
    // only two epochs above the margin: not enough evidence
    CHECK_FALSE(early_stop_check({1.0, 0.5, 0.6, 0.6}, cfg));
    CHECK_FALSE(early_stop_check({}, cfg));
    // recovery resets the count
    CHECK_FALSE(early_stop_check({1.0, 0.5, 0.6, 0.6, 0.5, 0.6, 0.6}, cfg));
    // flat histories never trigger (monotone-safe)
    CHECK_FALSE(early_stop_check({0.7, 0.7, 0.7, 0.7, 0.7, 0.7}, cfg));
}

TEST_CASE("setup ids enumerate the 16-setup matrix") {
    MatrixOptions options;
    auto setups = enumerate_setups(options);
    CHECK(setups.size() == 16);
    std::set<std::string> ids;
    for (const auto& s : setups) ids.insert(s.id());
    CHECK(ids.size() == 16);
    CHECK(ids.count("ICL_aug_multi_crop") == 1);
    CHECK(ids.count("WSL_no_aug_one_crop") == 1);

    options.include_icl_double_augment = true;
    CHECK(enumerate_setups(options).size() == 18);  // +2 ICL aug variants

    options.include_icl_double_augment = false;
    options.models = {ModelKind::ICL};
    CHECK(enumerate_setups(options).size() == 4);
}

TEST_CASE("epochs=0 returns initialized params and empty histories") {
    test::TempDir dir;
    Dataset data = small_balanced();
    DatasetSplit sp = split(data, 0.2, 1);
    TrainingSetup setup;
    setup.model = ModelKind::WSL;
    setup.seed = 5;
    TrainOptions options = micro_options(0);
    options.out_dir = dir.path / "run";
    auto out = train(setup, data, sp, options);
    CHECK(out.record.train_loss.empty());
    CHECK(out.record.val_loss.empty());
    CHECK(out.record.epochs_completed == 0);
    CHECK_FALSE(out.record.stopped_early);
    CHECK(std::filesystem::exists(out.record.checkpoint_path));
}

TEST_CASE("same setup and seed reproduce identical loss curves") {
    Dataset data = small_balanced();
    DatasetSplit sp = split(data, 0.2, 1);
    for (ModelKind kind : {ModelKind::WSL, ModelKind::SSL, ModelKind::SSR, ModelKind::ICL}) {
        TrainingSetup setup;
        setup.model = kind;
        setup.augment = true;
        setup.crop = augment::CropStrategy::one_crop;
        setup.seed = 9;
        auto a = train(setup, data, sp, micro_options(2));
        auto b = train(setup, data, sp, micro_options(2));
        CHECK(a.record.train_loss == b.record.train_loss);
        CHECK(a.record.val_loss == b.record.val_loss);
    }
}

TEST_CASE("ssl training descends on synthetic images") {
    // ~200 images, 5 epochs: the descent property, not a fixed value.
    Dataset data = small_balanced(13);  // 1*(2*5+4)*13 = 182 -> balanced less
    DatasetSplit sp = split(data, 0.1, 2);
    TrainingSetup setup;
    setup.model = ModelKind::SSL;
    setup.seed = 4;
    auto out = train(setup, data, sp, micro_options(5, 32));
    REQUIRE(out.record.train_loss.size() >= 2);
    CHECK(out.record.train_loss.back() < out.record.train_loss.front());
}

TEST_CASE("multi_crop setups consume five views per sample") {
    Dataset data = small_balanced();
    DatasetSplit sp = split(data, 0.2, 1);
    TrainingSetup setup;
    setup.model = ModelKind::WSL;
    setup.crop = augment::CropStrategy::multi_crop;
    setup.seed = 6;
    auto out = train(setup, data, sp, micro_options(1));
    CHECK(out.record.epochs_completed == 1);  // smoke: it runs and records
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
    models::Mlp<float> mlp;
    Rng rng(7);
    mlp.init(4, 8, 2, rng);
    std::vector<nn::ParamRef<float>> params;
    mlp.collect("m", params);
    const auto before = nn::flatten_values(params);
    Adam adam(params, 0.05);
    adam.zero_grad();
    adam.step();
    CHECK(nn::flatten_values(params) == before);
}

TEST_CASE("run record json round-trips") {
    RunRecord r;
    r.setup.model = ModelKind::ICL;
    r.setup.augment = true;
    r.setup.crop = augment::CropStrategy::multi_crop;
    r.setup.seed = 11;
    r.run_id = "abc";
    r.train_loss = {1.0, 0.5};
    r.val_loss = {1.1, 0.6};
    r.epoch_seconds = {0.25, 0.5};
    r.total_seconds = 0.8;
    r.epochs_completed = 2;
    r.stopped_early = false;
    RunRecord back = RunRecord::from_json(r.to_json());
    CHECK(back.setup.model == ModelKind::ICL);
    CHECK(back.train_loss == r.train_loss);
    CHECK(back.val_loss == r.val_loss);
    CHECK(back.run_id == "abc");
}

TEST_CASE("train_matrix persists, resumes and filters") {
    test::TempDir dir;
    Dataset data = small_balanced();
    DatasetSplit sp = split(data, 0.2, 1);
    MatrixOptions options;
    options.train = micro_options(1);
    options.models = {ModelKind::WSL};
    options.seed = 3;
    options.dataset_checksum = dataset_checksum(data);

    auto first = train_matrix(data, sp, options, dir.path / "runs");
    CHECK(first.size() == 4);
    for (const auto& r : first) CHECK_FALSE(r.failed);

    // resume: nothing retrains; timestamps of records stay untouched
    std::map<std::string, std::filesystem::file_time_type> mtimes;
    for (const auto& r : first)
        mtimes[r.run_id] =
            std::filesystem::last_write_time(dir.path / "runs" / r.run_id / "record.json");
    auto second = train_matrix(data, sp, options, dir.path / "runs");
    CHECK(second.size() == 4);
    for (const auto& r : second)
        CHECK(std::filesystem::last_write_time(dir.path / "runs" / r.run_id / "record.json") ==
              mtimes[r.run_id]);
}

TEST_CASE("wall-clock total matches the per-epoch sum within 1%") {
    Dataset data = small_balanced();
    DatasetSplit sp = split(data, 0.2, 1);
    TrainingSetup setup;
    setup.model = ModelKind::SSL;
    setup.seed = 12;
    auto out = train(setup, data, sp, micro_options(3, 32));
    double epoch_sum = 0.0;
    for (double s : out.record.epoch_seconds) epoch_sum += s;
    CHECK(out.record.total_seconds == doctest::Approx(epoch_sum).epsilon(0.01));
}

TEST_CASE("embed_dataset: shape, purity, determinism, round-trip") {
    test::TempDir dir;
    Dataset data = small_balanced();
    DatasetSplit sp = split(data, 0.2, 1);
    TrainingSetup setup;
    setup.model = ModelKind::SSL;
    setup.seed = 13;
    TrainOptions options = micro_options(1);
    options.out_dir = dir.path / "run";
    auto trained = train(setup, data, sp, options);

    auto set = embed_dataset(*trained.model, data, setup.id());
    CHECK(set.rows() == data.size());
    CHECK(set.latent_dim == 16);
    CHECK(set.matrix.size() == data.size() * 16);

    // duplicate sample gives a duplicate row
    Dataset duplicated;
    duplicated.push_back(data.images[0], [&] {
        auto m = data.meta[0];
        m.sample_id = "dup_a";
        return m;
    }());
    duplicated.push_back(data.images[0], [&] {
        auto m = data.meta[0];
        m.sample_id = "dup_b";
        return m;
    }());
    auto dup = embed_dataset(*trained.model, duplicated, setup.id());
    for (int j = 0; j < dup.latent_dim; ++j)
        CHECK(dup.matrix[static_cast<std::size_t>(j)] ==
              dup.matrix[static_cast<std::size_t>(j) + 16]);

    // reload from the checkpoint and from disk: bit-identical
    auto from_ckpt = embed_from_checkpoint(trained.record.checkpoint_path, data);
    CHECK(from_ckpt.matrix == set.matrix);
    from_ckpt.split_val_fraction = 0.2;
    from_ckpt.split_seed = 1;
    save_embeddings(from_ckpt, dir.path / "emb");
    auto loaded = load_embeddings(dir.path / "emb");
    CHECK(loaded.matrix == set.matrix);
    CHECK(loaded.latent_dim == 16);
    CHECK(loaded.split_seed == 1);
    CHECK(loaded.meta.size() == data.size());
}

TEST_CASE("icl training does not collapse at desk scale") {
    SyntheticConfig cfg;
    cfg.n_cell_lines = 1;
    cfg.n_drugs = 2;
    cfg.images_per_condition = 70;  // balanced keeps 2*2*70 = 280 rows
    cfg.seed = 14;
    Dataset data = balance_subset(generate_synthetic(cfg), 14);
    REQUIRE(data.size() >= 256);
    DatasetSplit sp = split(data, 0.1, 3);
    TrainingSetup setup;
    setup.model = ModelKind::ICL;
    setup.augment = true;
    setup.seed = 15;
    auto trained = train(setup, data, sp, micro_options(2, 32));
    auto set = embed_dataset(*trained.model, data, setup.id());

    // mean per-coordinate std over >= 256 samples
    const std::size_t n = set.rows();
    double mean_std = 0.0;
    for (int j = 0; j < set.latent_dim; ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += set.matrix[i * 16 + static_cast<std::size_t>(j)];
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = set.matrix[i * 16 + static_cast<std::size_t>(j)] - mean;
            var += d * d;
        }
        mean_std += std::sqrt(var / static_cast<double>(n));
    }
    mean_std /= set.latent_dim;
    CHECK(mean_std > 1e-3);
}

TEST_CASE("byol hyperparameter search: degenerate cases and constraint") {
    test::TempDir dir;
    Dataset data = small_balanced();
    DatasetSplit sp = split(data, 0.2, 1);
    TrainOptions options = micro_options(1, 32);

    ByolSearchRanges ranges;
    ranges.projection_size = {8, 32};
    ranges.projection_hidden_size = {8, 64};
    ranges.moving_average_decay = {0.9, 0.999};

    // n_trials=1 returns the single sampled config
    auto single = byol_hyperparameter_search(data, sp, 1, ranges, options, 17, std::nullopt);
    CHECK(single.trials.size() == 1);
    CHECK(single.best == single.trials[0].config);

    // identical losses tie-break to the first trial
    CHECK_THROWS_AS(byol_hyperparameter_search(data, sp, 0, ranges, options, 17, std::nullopt),
                    DataError);

    // the constrained search keeps hidden == projection and logs trials
    ranges.constrain_equal = true;
    auto constrained =
        byol_hyperparameter_search(data, sp, 3, ranges, options, 18, dir.path / "byol_log.csv");
    for (const auto& trial : constrained.trials)
        CHECK(trial.config.projection_hidden_size == trial.config.projection_size);
    CHECK(std::filesystem::exists(dir.path / "byol_log.csv"));
    double best_loss = std::numeric_limits<double>::infinity();
    for (const auto& trial : constrained.trials) best_loss = std::min(best_loss, trial.final_val_loss);
    bool found = false;
    for (const auto& trial : constrained.trials)
        if (trial.config == constrained.best) {
            found = true;
            CHECK(trial.final_val_loss == best_loss);
        }
    CHECK(found);
}

TEST_CASE("search with identical configs returns the first (stable tie-break)") {
    Dataset data = small_balanced();
    DatasetSplit sp = split(data, 0.2, 1);
    TrainOptions options = micro_options(1, 32);
    ByolSearchRanges ranges;
    ranges.projection_size = {16, 16};
    ranges.projection_hidden_size = {16, 16};
    ranges.moving_average_decay = {0.95, 0.95};
    auto result = byol_hyperparameter_search(data, sp, 2, ranges, options, 19, std::nullopt);
    REQUIRE(result.trials.size() == 2);
    CHECK(result.trials[0].final_val_loss == result.trials[1].final_val_loss);
    CHECK(result.best == result.trials[0].config);
}

TEST_CASE("backbone parameters are bit-identical across probe evaluation") {
    Dataset data = small_balanced();
    DatasetSplit sp = split(data, 0.2, 1);
    TrainingSetup setup;
    setup.model = ModelKind::WSL;
    setup.seed = 21;
    auto trained = train(setup, data, sp, micro_options(1));
    const auto params_before = nn::flatten_values(trained.model->params());

    auto set = embed_dataset(*trained.model, data, setup.id());
    set.split_val_fraction = 0.2;
    set.split_seed = 1;
    evalprobe::ProbeConfig config;
    config.hidden_units = 16;
    config.epochs = 5;
    config.learning_rates = {0.05};
    config.momentums = {0.0};
    config.weight_decays = {0.0};
    auto result = evalprobe::grid_search_probe(set, sp, config, 22);
    (void)result;

    CHECK(nn::flatten_values(trained.model->params()) == params_before);
    auto again = embed_dataset(*trained.model, data, setup.id());
    CHECK(again.matrix == set.matrix);
}

TEST_CASE("non-finite loss marks the run failed and the matrix continues") {
    test::TempDir dir;
    Dataset data = small_balanced();
    DatasetSplit sp = split(data, 0.2, 1);
    MatrixOptions options;
    options.train = micro_options(2);
    options.train.optimizer.learning_rate = 1e18;  // guaranteed blow-up
    options.models = {ModelKind::SSL, ModelKind::WSL};
    options.dataset_checksum = dataset_checksum(data);
    auto records = train_matrix(data, sp, options, dir.path / "runs");
    CHECK(records.size() == 8);
    for (const auto& r : records) {
        if (r.failed) {
            CHECK_FALSE(r.failure_reason.empty());
            CHECK(std::filesystem::exists(dir.path / "runs" / r.run_id / "record.json"));
        }
    }
}
