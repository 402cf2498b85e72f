#include "morphbench/probe_eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "morphbench/csv.hpp"
#include "morphbench/errors.hpp"
#include "morphbench/hash.hpp"

namespace morphbench::evalprobe {

using models::Tensor;

void ProbeConfig::check() const {
    if (hidden_units < 1 || epochs < 0 || batch_size < 1)
        throw DataError("probe config: bad dimensions");
    if (learning_rates.empty() || momentums.empty() || weight_decays.empty())
        throw DataError("probe grid sets must be nonempty");
}

void Probe::init(int latent_dim, int hidden, std::uint64_t seed) {
    in_dim = latent_dim;
    Rng rng(seed ^ 0x9a0beull);
    mlp.init(latent_dim, hidden, 2, rng);
}

nn::Tensor<float> Probe::scores(const std::vector<float>& embeddings, int latent_dim) const {
    if (latent_dim != in_dim) throw DataError("probe: latent_dim mismatch");
    const int n = static_cast<int>(embeddings.size()) / latent_dim;
    Tensor<float> x({n, latent_dim});
    x.data.assign(embeddings.begin(), embeddings.end());
    auto logits = const_cast<Probe*>(this)->mlp.forward(x);
    // softmax rows
    Tensor<float> out({n, 2});
    for (int i = 0; i < n; ++i) {
        const float a = logits.data[static_cast<std::size_t>(i) * 2];
        const float b = logits.data[static_cast<std::size_t>(i) * 2 + 1];
        const float mx = std::max(a, b);
        const double ea = std::exp(static_cast<double>(a - mx));
        const double eb = std::exp(static_cast<double>(b - mx));
        out.data[static_cast<std::size_t>(i) * 2] = static_cast<float>(ea / (ea + eb));
        out.data[static_cast<std::size_t>(i) * 2 + 1] = static_cast<float>(eb / (ea + eb));
    }
    return out;
}

Probe train_probe(const std::vector<float>& embeddings, int latent_dim,
                  const std::vector<int>& labels, const ProbeConfig& config,
                  const ProbeHyperparams& hyperparams, std::uint64_t seed) {
    config.check();
    const std::size_t n = labels.size();
    if (embeddings.size() != n * static_cast<std::size_t>(latent_dim))
        throw DataError("train_probe: embeddings/labels misaligned");
    bool has0 = false, has1 = false;
    for (int l : labels) (l == 0 ? has0 : has1) = true;
    if (!has0 || !has1) throw DataError("train_probe: single-class training labels");

    Probe probe;
    probe.init(latent_dim, config.hidden_units, seed);
    auto params = [&] {
        std::vector<nn::ParamRef<float>> out;
        probe.mlp.collect("probe", out);
        return out;
    }();
    std::vector<std::vector<float>> velocity(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
        velocity[i].assign(params[i].value->numel(), 0.0f);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(seed ^ fnv1a64("probe_epoch/" + std::to_string(epoch)));
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.batch_size));
            const int bsz = static_cast<int>(stop - start);
            Tensor<float> x({bsz, latent_dim});
            std::vector<int> y(static_cast<std::size_t>(bsz));
            for (std::size_t i = start; i < stop; ++i) {
                const std::size_t row = order[i];
                std::copy(embeddings.begin() + static_cast<std::ptrdiff_t>(row * static_cast<std::size_t>(latent_dim)),
                          embeddings.begin() + static_cast<std::ptrdiff_t>((row + 1) * static_cast<std::size_t>(latent_dim)),
                          x.data.begin() + static_cast<std::ptrdiff_t>((i - start) * static_cast<std::size_t>(latent_dim)));
                y[i - start] = labels[row];
            }
            for (auto& p : params) p.grad->zero();
            auto logits = probe.mlp.forward(x);
            auto lg = models::ce_loss_grad(logits, y);
            probe.mlp.backward(lg.grad);

            for (std::size_t pi = 0; pi < params.size(); ++pi) {
                auto& value = params[pi].value->data;
                const auto& grad = params[pi].grad->data;
                auto& vel = velocity[pi];
                for (std::size_t k = 0; k < value.size(); ++k) {
                    const double g = grad[k] + hyperparams.weight_decay * value[k];
                    vel[k] = static_cast<float>(hyperparams.momentum * vel[k] + g);
                    value[k] -= static_cast<float>(hyperparams.learning_rate * vel[k]);
                }
            }
        }
    }
    return probe;
}

namespace {

double accuracy_of(const Tensor<float>& scores, const std::vector<int>& labels) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int pred = scores.data[i * 2 + 1] > 0.5f ? 1 : 0;  // ties predict control
        if (pred == labels[i]) ++correct;
    }
    return labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace

GridSearchResult grid_search_probe(const training::EmbeddingSet& embeddings,
                                   const DatasetSplit& split, const ProbeConfig& config,
                                   std::uint64_t seed) {
    config.check();

    std::vector<float> train_x, val_x;
    std::vector<int> train_y, val_y;
    const auto dim = static_cast<std::size_t>(embeddings.latent_dim);
    for (std::size_t i = 0; i < embeddings.meta.size(); ++i) {
        const auto& m = embeddings.meta[i];
        const int label = models::class_index(m.label);
        const float* row = embeddings.row(i);
        if (split.is_val(m.sample_id)) {
            val_x.insert(val_x.end(), row, row + dim);
            val_y.push_back(label);
        } else if (split.train_ids.count(m.sample_id)) {
            train_x.insert(train_x.end(), row, row + dim);
            train_y.push_back(label);
        }
    }
    if (train_y.empty() || val_y.empty())
        throw DataError("grid_search_probe: empty split part");

    GridSearchResult result;
    bool have_best = false;
    double best_acc = -1.0;
    // Grid order matches the tie-break: lower lr, then lower wd, then lower momentum.
    auto sorted = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    for (double lr : sorted(config.learning_rates)) {
        for (double wd : sorted(config.weight_decays)) {
            for (double momentum : sorted(config.momentums)) {
                ProbeHyperparams hp{lr, momentum, wd};
                Probe probe = train_probe(train_x, embeddings.latent_dim, train_y, config, hp, seed);
                const double acc = accuracy_of(probe.scores(val_x, embeddings.latent_dim), val_y);
                result.log.push_back({hp, acc});
                if (!have_best || acc > best_acc) {
                    have_best = true;
                    best_acc = acc;
                    result.best = hp;
                    result.probe = std::move(probe);
                }
            }
        }
    }
    return result;
}

double roc_auc_rank(const std::vector<double>& drug_scores, const std::vector<int>& labels) {
    // Mann-Whitney U via midranks; ties contribute 1/2.
    const std::size_t n = drug_scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return drug_scores[a] < drug_scores[b]; });

    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) throw DataError("roc_auc: single-class labels");

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && drug_scores[order[j + 1]] == drug_scores[order[i]]) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += midrank;
        i = j + 1;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<ClassificationMetrics> compute_classification_metrics(
    const nn::Tensor<float>& scores, const std::vector<int>& labels,
    const std::vector<SampleMeta>& meta) {
    if (labels.size() != meta.size() ||
        scores.data.size() != labels.size() * 2)
        throw DataError("classification metrics: misaligned inputs");

    std::map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < meta.size(); ++i) {
        groups[meta[i].cell_line].push_back(i);
        all.push_back(i);
    }

    auto compute = [&](const std::string& name, const std::vector<std::size_t>& rows) {
        ClassificationMetrics m;
        m.cell_line = name;
        std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
        std::vector<double> drug_scores;
        std::vector<int> row_labels;
        for (std::size_t i : rows) {
            const double s = scores.data[i * 2 + 1];
            const int pred = s > 0.5 ? 1 : 0;
            const int y = labels[i];
            if (y == 1) ++m.n_drug;
            else ++m.n_control;
            if (pred == 1 && y == 1) ++tp;
            else if (pred == 1 && y == 0) ++fp;
            else if (pred == 0 && y == 1) ++fn;
            else ++tn;
            drug_scores.push_back(s);
            row_labels.push_back(y);
        }
        const auto total = static_cast<double>(rows.size());
        m.accuracy = total > 0 ? static_cast<double>(tp + tn) / total : 0.0;
        m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        if (m.n_drug > 0 && m.n_control > 0) {
            m.roc_auc = roc_auc_rank(drug_scores, row_labels);
        } else {
            m.flags.push_back("single_class");
        }
        return m;
    };

    std::vector<ClassificationMetrics> out;
    for (const auto& [cell_line, rows] : groups) out.push_back(compute(cell_line, rows));
    out.push_back(compute(kPooledCellLine, all));
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

void write_probe_metrics_csv(const std::filesystem::path& path, const std::string& model,
                             const std::string& setup,
                             const std::vector<ClassificationMetrics>& metrics) {
    csv::Table t;
    t.header = {"model", "setup", "cell_line", "accuracy", "precision", "recall",
                "roc_auc", "n_drug", "n_control", "flags"};
    for (const auto& m : metrics) {
        std::string flags;
        for (std::size_t i = 0; i < m.flags.size(); ++i) {
            if (i) flags += ';';
            flags += m.flags[i];
        }
        t.rows.push_back({model, setup, m.cell_line, fmt(m.accuracy), fmt(m.precision),
                          fmt(m.recall), m.roc_auc ? fmt(*m.roc_auc) : "NA",
                          std::to_string(m.n_drug), std::to_string(m.n_control), flags});
    }
    csv::write_file(path, t);
}

std::vector<ClassificationMetrics> read_probe_metrics_csv(const std::filesystem::path& path) {
    auto t = csv::read_file(path);
    std::vector<ClassificationMetrics> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        ClassificationMetrics m;
        m.cell_line = t.at(i, "cell_line");
        m.accuracy = std::stod(t.at(i, "accuracy"));
        m.precision = std::stod(t.at(i, "precision"));
        m.recall = std::stod(t.at(i, "recall"));
        const std::string& auc = t.at(i, "roc_auc");
        if (auc != "NA") m.roc_auc = std::stod(auc);
        m.n_drug = static_cast<std::size_t>(std::stoull(t.at(i, "n_drug")));
        m.n_control = static_cast<std::size_t>(std::stoull(t.at(i, "n_control")));
        out.push_back(std::move(m));
    }
    return out;
}

void write_probe_grid_csv(const std::filesystem::path& path, const std::vector<GridPoint>& log) {
    csv::Table t;
    t.header = {"learning_rate", "momentum", "weight_decay", "val_accuracy"};
    for (const auto& p : log)
        t.rows.push_back({fmt(p.hyperparams.learning_rate), fmt(p.hyperparams.momentum),
                          fmt(p.hyperparams.weight_decay), fmt(p.val_accuracy)});
    csv::write_file(path, t);
}

}  // namespace morphbench::evalprobe
