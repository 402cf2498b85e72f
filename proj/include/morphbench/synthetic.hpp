#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "morphbench/data.hpp"

namespace morphbench {

// Blob-based stand-in generator. Cells render as anisotropic Gaussian blobs;
// drug effect at strength f swaps an f-fraction of cells for smaller, dimmer
// fragments. Controls grow denser with time.
struct SyntheticConfig {
    int n_cell_lines = 2;
    int n_drugs = 3;
    int images_per_condition = 10;
    std::pair<int, int> cell_density_range{4, 26};   // cells per crop
    std::pair<double, double> cell_size_px{7.0, 13.0};
    std::vector<double> fragmentation_per_drug;      // [0,1] each; empty -> defaults
    std::vector<double> growth_rate_per_cell_line;   // cells/hour; empty -> defaults
    double noise_sigma = 0.02;
    std::uint64_t seed = 7;

    // Control samples cover these time points; drug samples sit at the last one.
    static constexpr double kTimePoints[4] = {12.0, 24.0, 36.0, 48.0};
    static constexpr int kConcentrationLevels = 5;  // levels 0..4

    void check() const;
    std::vector<double> effective_fragmentation() const;
    std::vector<double> effective_growth() const;
    std::string to_json() const;
    static SyntheticConfig from_json(const std::string& text);

    static std::string cell_line_name(int i);
    static std::string drug_name(int i);
};

// Parameters of one rendered crop; both the control and the drug path reduce
// to this, so fragmentation 0 reproduces the control branch exactly.
struct RenderParams {
    int n_cells = 0;
    int n_fragments = 0;
    std::pair<double, double> cell_size_px{7.0, 13.0};
    double fragment_size_factor = 0.35;
    double fragment_intensity_factor = 0.55;
    double noise_sigma = 0.0;

    bool operator==(const RenderParams&) const = default;
};

RenderParams control_render_params(const SyntheticConfig& cfg, int cell_line, double time_point);
RenderParams drug_render_params(const SyntheticConfig& cfg, int cell_line, int drug,
                                int concentration_level);

ImageCrop render_crop(const RenderParams& params, Rng& rng);

Dataset generate_synthetic(const SyntheticConfig& config);

}  // namespace morphbench
