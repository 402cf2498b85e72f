#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "morphbench/rng.hpp"

namespace morphbench {

enum class Label { control, drug };

std::string to_string(Label label);
Label label_from_string(const std::string& s);  // throws DataError on unknown strings

// One 64x64 grayscale crop with intensities in [0, 1].
struct ImageCrop {
    static constexpr int kSide = 64;
    static constexpr int kPixels = kSide * kSide;

    std::vector<float> px;  // row-major kSide x kSide

    ImageCrop() : px(kPixels, 0.0f) {}
    explicit ImageCrop(std::vector<float> pixels) : px(std::move(pixels)) {}

    float& at(int row, int col) { return px[static_cast<std::size_t>(row) * kSide + col]; }
    float at(int row, int col) const { return px[static_cast<std::size_t>(row) * kSide + col]; }

    bool valid() const;
    void check() const;  // throws DataError when invalid
};

struct SampleMeta {
    std::string sample_id;
    std::string cell_line;
    std::string drug;              // control marker (e.g. "DMSO") for controls
    int concentration_level = 0;   // 0..4, 4 = maximum
    double time_point = 0.0;       // hours
    Label label = Label::control;
    std::string replicate;
};

struct Dataset {
    std::vector<ImageCrop> images;
    std::vector<SampleMeta> meta;

    std::size_t size() const { return images.size(); }
    bool empty() const { return images.empty(); }

    void push_back(ImageCrop crop, SampleMeta m) {
        images.push_back(std::move(crop));
        meta.push_back(std::move(m));
    }

    void check() const;  // sample ids unique, images valid, sizes aligned
};

struct DatasetSplit {
    std::set<std::string> train_ids;
    std::set<std::string> val_ids;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;

    bool is_val(const std::string& id) const { return val_ids.count(id) != 0; }
};

// Keeps drug samples at the maximum concentration level and, per
// (cell_line, drug), the latest time point; controls at any time point.
// The majority label is then downsampled uniformly with `seed` so both
// labels end up with equal counts.
Dataset balance_subset(const Dataset& dataset, std::uint64_t seed);

// Stratified by label; |val| = round(val_fraction * N) with each label's
// share within one sample of val_fraction. Deterministic given seed.
DatasetSplit split(const Dataset& dataset, double val_fraction, std::uint64_t seed);

// Same split rule on bare (id, label) pairs; lets evaluation stages rebuild
// the training split from persisted metadata without the pixel data.
DatasetSplit split_ids(const std::vector<std::string>& ids, const std::vector<Label>& labels,
                       double val_fraction, std::uint64_t seed);

}  // namespace morphbench
