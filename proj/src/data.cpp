#include "morphbench/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "morphbench/errors.hpp"

namespace morphbench {

std::string to_string(Label label) { return label == Label::control ? "control" : "drug"; }

Label label_from_string(const std::string& s) {
    if (s == "control") return Label::control;
    if (s == "drug") return Label::drug;
    throw DataError("unknown label string: '" + s + "'");
}

bool ImageCrop::valid() const {
    if (px.size() != static_cast<std::size_t>(kPixels)) return false;
    for (float v : px)
        if (!(v >= 0.0f && v <= 1.0f)) return false;  // catches NaN too
    return true;
}

void ImageCrop::check() const {
    if (px.size() != static_cast<std::size_t>(kPixels))
        throw DataError("image crop is not 64x64");
    for (float v : px)
        if (!(v >= 0.0f && v <= 1.0f))
            throw DataError("image crop intensity outside [0,1]");
}

void Dataset::check() const {
    if (images.size() != meta.size()) throw DataError("dataset images/meta misaligned");
    std::unordered_set<std::string> seen;
    for (const auto& m : meta) {
        if (!seen.insert(m.sample_id).second)
            throw DataError("duplicate sample_id: " + m.sample_id);
        if (m.concentration_level < 0 || m.concentration_level > 4)
            throw DataError("concentration_level outside 0..4: " + m.sample_id);
        if (m.time_point < 0.0) throw DataError("negative time_point: " + m.sample_id);
    }
    for (const auto& img : images) img.check();
}

Dataset balance_subset(const Dataset& dataset, std::uint64_t seed) {
    // Latest time point per (cell_line, drug) among max-concentration samples.
    std::map<std::pair<std::string, std::string>, double> latest;
    for (const auto& m : dataset.meta) {
        if (m.label != Label::drug || m.concentration_level != 4) continue;
        auto key = std::make_pair(m.cell_line, m.drug);
        auto it = latest.find(key);
        if (it == latest.end() || m.time_point > it->second) latest[key] = m.time_point;
    }

    std::vector<std::size_t> drug_rows, control_rows;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& m = dataset.meta[i];
        if (m.label == Label::control) {
            control_rows.push_back(i);
        } else if (m.concentration_level == 4) {
            auto it = latest.find(std::make_pair(m.cell_line, m.drug));
            if (it != latest.end() && m.time_point == it->second) drug_rows.push_back(i);
        }
    }

    if (drug_rows.empty()) throw DataError("missing label: drug");
    if (control_rows.empty()) throw DataError("missing label: control");

    auto downsample = [&](std::vector<std::size_t>& rows, std::size_t target) {
        Rng rng(seed);
        rng.shuffle(rows);
        rows.resize(target);
        std::sort(rows.begin(), rows.end());  // keep dataset order in the output
    };

    std::size_t n = std::min(drug_rows.size(), control_rows.size());
    if (drug_rows.size() > n) downsample(drug_rows, n);
    if (control_rows.size() > n) downsample(control_rows, n);

    std::vector<std::size_t> keep;
    keep.reserve(2 * n);
    keep.insert(keep.end(), drug_rows.begin(), drug_rows.end());
    keep.insert(keep.end(), control_rows.begin(), control_rows.end());
    std::sort(keep.begin(), keep.end());

    Dataset out;
    out.images.reserve(keep.size());
    out.meta.reserve(keep.size());
    for (std::size_t i : keep) out.push_back(dataset.images[i], dataset.meta[i]);
    return out;
}

DatasetSplit split_ids(const std::vector<std::string>& ids, const std::vector<Label>& labels,
                       double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw DataError("val_fraction must be in (0,1)");
    if (ids.size() != labels.size()) throw DataError("split: ids/labels misaligned");

    const std::size_t n = ids.size();
    const auto total_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));

    // Per-label validation counts via largest remainder so the total is exact
    // and each label's share stays within one sample of val_fraction.
    std::vector<std::size_t> by_label[2];
    for (std::size_t i = 0; i < n; ++i) by_label[labels[i] == Label::drug ? 1 : 0].push_back(i);

    double exact[2];
    std::size_t take[2];
    for (int l = 0; l < 2; ++l) {
        exact[l] = val_fraction * static_cast<double>(by_label[l].size());
        take[l] = static_cast<std::size_t>(std::floor(exact[l]));
    }
    std::size_t assigned = take[0] + take[1];
    int order[2] = {0, 1};
    if (exact[1] - std::floor(exact[1]) > exact[0] - std::floor(exact[0])) std::swap(order[0], order[1]);
    for (int k = 0; assigned < total_val && k < 2; ++k) {
        int l = order[k];
        if (take[l] < by_label[l].size()) {
            ++take[l];
            ++assigned;
        }
    }
    // Rounding can land one short/long when a label pool is exhausted.
    for (int l = 0; assigned < total_val && l < 2; ++l) {
        while (assigned < total_val && take[l] < by_label[l].size()) {
            ++take[l];
            ++assigned;
        }
    }
    while (assigned > total_val) {
        int l = take[0] >= take[1] ? 0 : 1;
        --take[l];
        --assigned;
    }

    DatasetSplit out;
    out.val_fraction = val_fraction;
    out.seed = seed;
    for (int l = 0; l < 2; ++l) {
        auto rows = by_label[l];
        Rng rng(seed ^ (0x9d5cu + static_cast<std::uint64_t>(l)));
        rng.shuffle(rows);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::string& id = ids[rows[i]];
            if (i < take[l]) out.val_ids.insert(id);
            else out.train_ids.insert(id);
        }
    }
    return out;
}

DatasetSplit split(const Dataset& dataset, double val_fraction, std::uint64_t seed) {
    std::vector<std::string> ids;
    std::vector<Label> labels;
    ids.reserve(dataset.size());
    labels.reserve(dataset.size());
    for (const auto& m : dataset.meta) {
        ids.push_back(m.sample_id);
        labels.push_back(m.label);
    }
    return split_ids(ids, labels, val_fraction, seed);
}

}  // namespace morphbench
