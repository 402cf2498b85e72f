#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "morphbench/probe_eval.hpp"
#include "test_util.hpp"

using namespace morphbench;
using namespace morphbench::evalprobe;

namespace {

// Independent oracle: sweep thresholds at every unique score, build the
// empirical ROC curve, integrate with the trapezoid rule.
double trapezoid_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::vector<double> thresholds = scores;
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l == 1 ? n_pos : n_neg) += 1;

    std::vector<std::pair<double, double>> curve;  // (fpr, tpr), descending thresholds
    curve.push_back({0.0, 0.0});
    for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= *it) (labels[i] == 1 ? tp : fp) += 1;
        }
        curve.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                         static_cast<double>(tp) / static_cast<double>(n_pos)});
    }
    curve.push_back({1.0, 1.0});
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        area += (curve[i].first - curve[i - 1].first) * (curve[i].second + curve[i - 1].second) / 2.0;
    return area;
}

// Two separable Gaussian clusters in latent space.
training::EmbeddingSet gaussian_fixture(std::size_t n, int dim, double separation,
                                        std::uint64_t seed, int n_cell_lines = 1) {
    training::EmbeddingSet set;
    set.latent_dim = dim;
    set.split_val_fraction = 0.2;
    set.split_seed = seed;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const bool drug = i % 2 == 1;
        SampleMeta m;
        m.sample_id = "g" + std::to_string(i);
        m.cell_line = "CL0" + std::to_string(i % static_cast<std::size_t>(n_cell_lines));
        m.drug = drug ? "drugA" : "DMSO";
        m.label = drug ? Label::drug : Label::control;
        m.concentration_level = drug ? 4 : 0;
        m.time_point = 48.0;
        m.replicate = "r0";
        set.meta.push_back(std::move(m));
        for (int j = 0; j < dim; ++j) {
            const double center = (j == 0 && drug) ? separation : 0.0;
            set.matrix.push_back(static_cast<float>(center + rng.normal()));
        }
    }
    return set;
}

DatasetSplit split_of(const training::EmbeddingSet& set) {
    std::vector<std::string> ids;
    std::vector<Label> labels;
    for (const auto& m : set.meta) {
        ids.push_back(m.sample_id);
        labels.push_back(m.label);
    }
    return split_ids(ids, labels, set.split_val_fraction, set.split_seed);
}

}  // namespace

TEST_CASE("hand example: confusion matrix and rank AUC by brute force") {
    // labels [1,1,0,0], drug scores [0.9, 0.4, 0.6, 0.1]
    // preds at 0.5: [1,0,1,0] -> TP=1 FN=1 FP=1 TN=1
    // accuracy 2/4, precision 1/2, recall 1/2; AUC pairs: 3 of 4 ordered.
    nn::Tensor<float> scores({4, 2});
    const double drug_scores[4] = {0.9, 0.4, 0.6, 0.1};
    for (int i = 0; i < 4; ++i) {
        scores.data[static_cast<std::size_t>(i) * 2 + 1] = static_cast<float>(drug_scores[i]);
        scores.data[static_cast<std::size_t>(i) * 2] = static_cast<float>(1.0 - drug_scores[i]);
    }
    std::vector<int> labels{1, 1, 0, 0};
    std::vector<SampleMeta> meta(4);
    for (int i = 0; i < 4; ++i) {
        meta[static_cast<std::size_t>(i)].sample_id = "s" + std::to_string(i);
        meta[static_cast<std::size_t>(i)].cell_line = "CL00";
    }
    auto metrics = compute_classification_metrics(scores, labels, meta);
    REQUIRE(metrics.size() == 2);  // one cell line + pooled
    for (const auto& m : metrics) {
        CHECK(m.accuracy == doctest::Approx(0.5));
        CHECK(m.precision == doctest::Approx(0.5));
        CHECK(m.recall == doctest::Approx(0.5));
        REQUIRE(m.roc_auc.has_value());
        CHECK(*m.roc_auc == doctest::Approx(0.75).epsilon(1e-12));
    }
}

TEST_CASE("perfect scores give all-ones metrics") {
    nn::Tensor<float> scores({4, 2});
    std::vector<int> labels{1, 0, 1, 0};
    for (int i = 0; i < 4; ++i) {
        scores.data[static_cast<std::size_t>(i) * 2 + 1] = labels[static_cast<std::size_t>(i)] ? 0.99f : 0.01f;
        scores.data[static_cast<std::size_t>(i) * 2] = labels[static_cast<std::size_t>(i)] ? 0.01f : 0.99f;
    }
    std::vector<SampleMeta> meta(4);
    for (int i = 0; i < 4; ++i) meta[static_cast<std::size_t>(i)].cell_line = "CL00";
    auto metrics = compute_classification_metrics(scores, labels, meta);
    for (const auto& m : metrics) {
        CHECK(m.accuracy == doctest::Approx(1.0));
        CHECK(m.precision == doctest::Approx(1.0));
        CHECK(m.recall == doctest::Approx(1.0));
        CHECK(*m.roc_auc == doctest::Approx(1.0));
    }
}

TEST_CASE("constant 0.5 scores: at-chance accuracy and AUC, ties to control") {
    nn::Tensor<float> scores({4, 2});
    for (auto& v : scores.data) v = 0.5f;
    std::vector<int> labels{1, 1, 0, 0};
    std::vector<SampleMeta> meta(4);
    for (int i = 0; i < 4; ++i) meta[static_cast<std::size_t>(i)].cell_line = "CL00";
    auto metrics = compute_classification_metrics(scores, labels, meta);
    // threshold convention: score == 0.5 predicts control -> both drugs wrong
    CHECK(metrics[0].accuracy == doctest::Approx(0.5));
    CHECK(*metrics[0].roc_auc == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(metrics[0].recall == doctest::Approx(0.0));
}

TEST_CASE("single-class cell line: auc missing with a flag") {
    nn::Tensor<float> scores({3, 2});
    for (int i = 0; i < 3; ++i) {
        scores.data[static_cast<std::size_t>(i) * 2 + 1] = 0.7f;
        scores.data[static_cast<std::size_t>(i) * 2] = 0.3f;
    }
    std::vector<int> labels{1, 1, 1};
    std::vector<SampleMeta> meta(3);
    for (int i = 0; i < 3; ++i) meta[static_cast<std::size_t>(i)].cell_line = "CL00";
    auto metrics = compute_classification_metrics(scores, labels, meta);
    CHECK_FALSE(metrics[0].roc_auc.has_value());
    CHECK(std::find(metrics[0].flags.begin(), metrics[0].flags.end(), "single_class") !=
          metrics[0].flags.end());
}

TEST_CASE("rank AUC equals trapezoidal ROC integration on random fixtures") {
    Rng rng(61);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + rng.uniform_index(96);
        std::vector<double> scores;
        std::vector<int> labels;
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            // quantized scores force ties
            scores.push_back(std::round(rng.uniform() * 10.0) / 10.0);
            labels.push_back(rng.bernoulli(0.4) ? 1 : 0);
            (labels.back() ? has1 : has0) = true;
        }
        if (!has0 || !has1) continue;
        CHECK(roc_auc_rank(scores, labels) ==
              doctest::Approx(trapezoid_auc(scores, labels)).epsilon(1e-12));
    }
}

TEST_CASE("label-flip symmetry maps AUC to 1-AUC") {
    Rng rng(62);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> scores;
        std::vector<int> labels{0, 1};  // guarantee both classes
        scores.push_back(rng.uniform());
        scores.push_back(rng.uniform());
        for (int i = 0; i < 40; ++i) {
            scores.push_back(std::round(rng.uniform() * 20.0) / 20.0);
            labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
        }
        std::vector<double> flipped_scores;
        std::vector<int> flipped_labels;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            flipped_scores.push_back(1.0 - scores[i]);
            flipped_labels.push_back(1 - labels[i]);
        }
        CHECK(roc_auc_rank(flipped_scores, flipped_labels) ==
              doctest::Approx(roc_auc_rank(scores, labels)).epsilon(1e-12));
        CHECK(roc_auc_rank(scores, flipped_labels) ==
              doctest::Approx(1.0 - roc_auc_rank(scores, labels)).epsilon(1e-12));
    }
}

TEST_CASE("metrics are permutation-invariant in sample order") {
    Rng rng(63);
    const std::size_t n = 40;
    nn::Tensor<float> scores({static_cast<int>(n), 2});
    std::vector<int> labels;
    std::vector<SampleMeta> meta(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float s = static_cast<float>(rng.uniform());
        scores.data[i * 2 + 1] = s;
        scores.data[i * 2] = 1.0f - s;
        labels.push_back(i % 3 == 0 ? 1 : 0);
        meta[i].cell_line = i % 2 ? "CL00" : "CL01";
        meta[i].sample_id = "s" + std::to_string(i);
    }
    auto base = compute_classification_metrics(scores, labels, meta);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    nn::Tensor<float> scores2({static_cast<int>(n), 2});
    std::vector<int> labels2(n);
    std::vector<SampleMeta> meta2(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores2.data[i * 2] = scores.data[perm[i] * 2];
        scores2.data[i * 2 + 1] = scores.data[perm[i] * 2 + 1];
        labels2[i] = labels[perm[i]];
        meta2[i] = meta[perm[i]];
    }
    auto permuted = compute_classification_metrics(scores2, labels2, meta2);
    REQUIRE(base.size() == permuted.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(base[i].cell_line == permuted[i].cell_line);
        CHECK(base[i].accuracy == doctest::Approx(permuted[i].accuracy).epsilon(1e-12));
        CHECK(*base[i].roc_auc == doctest::Approx(*permuted[i].roc_auc).epsilon(1e-12));
    }
}

TEST_CASE("train_probe: lr=0 leaves parameters unchanged; determinism holds") {
    auto set = gaussian_fixture(64, 8, 2.0, 70);
    std::vector<int> labels;
    for (const auto& m : set.meta) labels.push_back(models::class_index(m.label));
    ProbeConfig config;
    config.hidden_units = 16;
    config.epochs = 3;
    config.batch_size = 32;

    Probe before;
    before.init(set.latent_dim, config.hidden_units, 71);
    std::vector<nn::ParamRef<float>> before_params;
    before.mlp.collect("probe", before_params);
    const auto before_values = nn::flatten_values(before_params);

    Probe trained = train_probe(set.matrix, set.latent_dim, labels, config,
                                ProbeHyperparams{0.0, 0.0, 0.0}, 71);
    std::vector<nn::ParamRef<float>> after_params;
    trained.mlp.collect("probe", after_params);
    CHECK(nn::flatten_values(after_params) == before_values);

    Probe a = train_probe(set.matrix, set.latent_dim, labels, config,
                          ProbeHyperparams{0.05, 0.9, 1e-4}, 72);
    Probe b = train_probe(set.matrix, set.latent_dim, labels, config,
                          ProbeHyperparams{0.05, 0.9, 1e-4}, 72);
    std::vector<nn::ParamRef<float>> pa, pb;
    a.mlp.collect("probe", pa);
    b.mlp.collect("probe", pb);
    CHECK(nn::flatten_values(pa) == nn::flatten_values(pb));
}

TEST_CASE("train_probe rejects single-class labels") {
    auto set = gaussian_fixture(16, 4, 1.0, 73);
    std::vector<int> labels(set.meta.size(), 1);
    ProbeConfig config;
    CHECK_THROWS_AS(
        train_probe(set.matrix, set.latent_dim, labels, config, ProbeHyperparams{}, 73),
        DataError);
}

TEST_CASE("probe reaches full training accuracy on a separable fixture") {
    auto set = gaussian_fixture(300, 8, 20.0, 74);  // +-10 sigma separation
    std::vector<int> labels;
    for (const auto& m : set.meta) labels.push_back(models::class_index(m.label));
    ProbeConfig config;
    config.hidden_units = 32;
    config.epochs = 25;
    config.batch_size = 64;
    Probe probe = train_probe(set.matrix, set.latent_dim, labels, config,
                              ProbeHyperparams{0.01, 0.9, 0.0}, 75);
    auto scores = probe.scores(set.matrix, set.latent_dim);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int pred = scores.data[i * 2 + 1] > 0.5f ? 1 : 0;
        if (pred == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    CHECK(correct == labels.size());
}

TEST_CASE("grid search selects a working lr over lr=0 and breaks ties stably") {
    auto set = gaussian_fixture(400, 8, 20.0, 76);
    auto sp = split_of(set);
    ProbeConfig config;
    config.hidden_units = 16;
    config.epochs = 10;
    config.batch_size = 64;
    config.learning_rates = {0.0, 0.05};
    config.momentums = {0.0};
    config.weight_decays = {0.0};
    auto result = grid_search_probe(set, sp, config, 77);
    CHECK(result.best.learning_rate == 0.05);
    CHECK(result.log.size() == 2);

    // degenerate single-point grid returns that point
    config.learning_rates = {0.01};
    auto single = grid_search_probe(set, sp, config, 78);
    CHECK(single.best.learning_rate == 0.01);
    CHECK(single.log.size() == 1);

    // empty grid is a hard error
    config.learning_rates = {};
    CHECK_THROWS_AS(grid_search_probe(set, sp, config, 79), DataError);
}

TEST_CASE("probe training never touches backbone parameters") {
    // Frozen-embedding contract: embeddings exported before and after a probe
    // grid search are bit-identical because the probe only ever sees the
    // exported matrix.
    auto set = gaussian_fixture(120, 8, 5.0, 80);
    auto sp = split_of(set);
    const auto matrix_before = set.matrix;
    ProbeConfig config;
    config.hidden_units = 16;
    config.epochs = 5;
    config.batch_size = 64;
    config.learning_rates = {0.05};
    config.momentums = {0.9};
    config.weight_decays = {1e-4};
    auto result = grid_search_probe(set, sp, config, 81);
    (void)result;
    CHECK(set.matrix == matrix_before);
}

TEST_CASE("probe metrics csv round-trips") {
    test::TempDir dir;
    ClassificationMetrics m;
    m.cell_line = "CL00";
    m.accuracy = 0.75;
    m.precision = 0.5;
    m.recall = 0.5;
    m.roc_auc = 0.75;
    m.n_drug = 2;
    m.n_control = 2;
    ClassificationMetrics missing;
    missing.cell_line = "CL01";
    missing.accuracy = 1.0;
    missing.n_drug = 3;
    write_probe_metrics_csv(dir.path / "probe_metrics.csv", "WSL", "WSL_aug_one_crop",
                            {m, missing});
    auto back = read_probe_metrics_csv(dir.path / "probe_metrics.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[0].accuracy == 0.75);
    CHECK(back[0].roc_auc.has_value());
    CHECK_FALSE(back[1].roc_auc.has_value());
}
