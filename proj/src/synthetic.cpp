#include "morphbench/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "morphbench/errors.hpp"
#include "morphbench/hash.hpp"

namespace morphbench {

constexpr double SyntheticConfig::kTimePoints[4];

void SyntheticConfig::check() const {
    if (n_cell_lines < 1 || n_drugs < 1) throw DataError("synthetic: need >=1 cell line and drug");
    if (images_per_condition < 1) throw DataError("synthetic: images_per_condition must be positive");
    if (cell_density_range.first < 1 || cell_density_range.second < cell_density_range.first)
        throw DataError("synthetic: degenerate cell_density_range");
    if (!(cell_size_px.first > 0.0 && cell_size_px.second >= cell_size_px.first))
        throw DataError("synthetic: degenerate cell_size_px");
    if (noise_sigma < 0.0) throw DataError("synthetic: negative noise_sigma");
    for (double f : fragmentation_per_drug)
        if (f < 0.0 || f > 1.0) throw DataError("synthetic: fragmentation_strength outside [0,1]");
    if (!fragmentation_per_drug.empty() &&
        fragmentation_per_drug.size() != static_cast<std::size_t>(n_drugs))
        throw DataError("synthetic: fragmentation_per_drug must have n_drugs entries");
    if (!growth_rate_per_cell_line.empty() &&
        growth_rate_per_cell_line.size() != static_cast<std::size_t>(n_cell_lines))
        throw DataError("synthetic: growth_rate_per_cell_line must have n_cell_lines entries");
}

std::vector<double> SyntheticConfig::effective_fragmentation() const {
    if (!fragmentation_per_drug.empty()) return fragmentation_per_drug;
    // First two drugs share one strength: the known-similar pair for the
    // distance analysis. The rest spread over [0.2, 1.0].
    std::vector<double> out(static_cast<std::size_t>(n_drugs));
    for (int i = 0; i < n_drugs; ++i) {
        if (i < 2) out[static_cast<std::size_t>(i)] = 0.85;
        else out[static_cast<std::size_t>(i)] = 0.2 + 0.8 * ((i - 2) % 4) / 3.0;
    }
    return out;
}

std::vector<double> SyntheticConfig::effective_growth() const {
    if (!growth_rate_per_cell_line.empty()) return growth_rate_per_cell_line;
    std::vector<double> out(static_cast<std::size_t>(n_cell_lines));
    for (int i = 0; i < n_cell_lines; ++i)
        out[static_cast<std::size_t>(i)] = 0.30 + 0.12 * (i % 3);
    return out;
}

std::string SyntheticConfig::cell_line_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "CL%02d", i);
    return buf;
}

std::string SyntheticConfig::drug_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "drug%02d", i);
    return buf;
}

std::string SyntheticConfig::to_json() const {
    nlohmann::json j;
    j["n_cell_lines"] = n_cell_lines;
    j["n_drugs"] = n_drugs;
    j["images_per_condition"] = images_per_condition;
    j["cell_density_range"] = {cell_density_range.first, cell_density_range.second};
    j["cell_size_px"] = {cell_size_px.first, cell_size_px.second};
    j["fragmentation_per_drug"] = effective_fragmentation();
    j["growth_rate_per_cell_line"] = effective_growth();
    j["noise_sigma"] = noise_sigma;
    j["seed"] = seed;
    return j.dump();
}

SyntheticConfig SyntheticConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    SyntheticConfig cfg;
    cfg.n_cell_lines = j.value("n_cell_lines", cfg.n_cell_lines);
    cfg.n_drugs = j.value("n_drugs", cfg.n_drugs);
    cfg.images_per_condition = j.value("images_per_condition", cfg.images_per_condition);
    if (j.contains("cell_density_range"))
        cfg.cell_density_range = {j["cell_density_range"][0], j["cell_density_range"][1]};
    if (j.contains("cell_size_px"))
        cfg.cell_size_px = {j["cell_size_px"][0], j["cell_size_px"][1]};
    if (j.contains("fragmentation_per_drug"))
        cfg.fragmentation_per_drug = j["fragmentation_per_drug"].get<std::vector<double>>();
    if (j.contains("growth_rate_per_cell_line"))
        cfg.growth_rate_per_cell_line = j["growth_rate_per_cell_line"].get<std::vector<double>>();
    cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

namespace {

// Density at a time point: base plus linear growth, clamped to the range.
int cells_at(const SyntheticConfig& cfg, double growth_rate, double time_point) {
    const double expected = cfg.cell_density_range.first + growth_rate * time_point;
    const auto n = static_cast<int>(std::lround(expected));
    return std::clamp(n, cfg.cell_density_range.first, cfg.cell_density_range.second);
}

void add_blob(ImageCrop& img, double cx, double cy, double sigma_major, double sigma_minor,
              double angle, double intensity) {
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double extent = 3.0 * sigma_major;
    const int r0 = std::max(0, static_cast<int>(cy - extent));
    const int r1 = std::min(ImageCrop::kSide - 1, static_cast<int>(cy + extent) + 1);
    const int c0 = std::max(0, static_cast<int>(cx - extent));
    const int c1 = std::min(ImageCrop::kSide - 1, static_cast<int>(cx + extent) + 1);
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
            const double dx = c - cx, dy = r - cy;
            const double u = ca * dx + sa * dy;
            const double v = -sa * dx + ca * dy;
            const double q = (u * u) / (2.0 * sigma_major * sigma_major) +
                             (v * v) / (2.0 * sigma_minor * sigma_minor);
            if (q > 9.0) continue;
            img.at(r, c) = static_cast<float>(
                std::min(1.0, img.at(r, c) + intensity * std::exp(-q)));
        }
    }
}

void add_population(ImageCrop& img, int count, double size_lo, double size_hi,
                    double intensity_lo, double intensity_hi, Rng& rng) {
    constexpr double margin = 3.0;
    for (int i = 0; i < count; ++i) {
        const double cx = rng.uniform(margin, ImageCrop::kSide - margin);
        const double cy = rng.uniform(margin, ImageCrop::kSide - margin);
        const double diameter = rng.uniform(size_lo, size_hi);
        const double sigma_major = diameter / 4.0 * rng.uniform(1.0, 1.4);
        const double sigma_minor = sigma_major * rng.uniform(0.45, 0.85);
        const double angle = rng.uniform(0.0, 3.14159265358979323846);
        const double intensity = rng.uniform(intensity_lo, intensity_hi);
        add_blob(img, cx, cy, sigma_major, sigma_minor, angle, intensity);
    }
}

}  // namespace

RenderParams control_render_params(const SyntheticConfig& cfg, int cell_line, double time_point) {
    RenderParams p;
    p.n_cells = cells_at(cfg, cfg.effective_growth()[static_cast<std::size_t>(cell_line)], time_point);
    p.n_fragments = 0;
    p.cell_size_px = cfg.cell_size_px;
    p.noise_sigma = cfg.noise_sigma;
    return p;
}

RenderParams drug_render_params(const SyntheticConfig& cfg, int cell_line, int drug,
                                int concentration_level) {
    const double latest = SyntheticConfig::kTimePoints[3];
    RenderParams p = control_render_params(cfg, cell_line, latest);
    const double strength = cfg.effective_fragmentation()[static_cast<std::size_t>(drug)];
    const double effect = strength * concentration_level / 4.0;  // 10x dilution ladder, level 4 = max
    const int base = p.n_cells;
    p.n_cells = static_cast<int>(std::lround(base * (1.0 - effect)));
    p.n_fragments = static_cast<int>(std::lround(base * effect * 3.0));
    return p;
}

ImageCrop render_crop(const RenderParams& params, Rng& rng) {
    ImageCrop img;
    add_population(img, params.n_cells, params.cell_size_px.first, params.cell_size_px.second,
                   0.55, 0.95, rng);
    if (params.n_fragments > 0) {
        add_population(img, params.n_fragments,
                       params.cell_size_px.first * params.fragment_size_factor,
                       params.cell_size_px.second * params.fragment_size_factor,
                       0.55 * params.fragment_intensity_factor,
                       0.95 * params.fragment_intensity_factor, rng);
    }
    if (params.noise_sigma > 0.0) {
        for (auto& v : img.px)
            v = static_cast<float>(std::clamp(v + rng.normal(0.0, params.noise_sigma), 0.0, 1.0));
    }
    return img;
}

Dataset generate_synthetic(const SyntheticConfig& config) {
    config.check();
    Dataset out;
    const double latest = SyntheticConfig::kTimePoints[3];

    auto sample_rng = [&](const std::string& id) {
        return Rng(config.seed ^ fnv1a64(id));
    };

    for (int cl = 0; cl < config.n_cell_lines; ++cl) {
        const std::string cell_line = SyntheticConfig::cell_line_name(cl);
        for (int dr = 0; dr < config.n_drugs; ++dr) {
            const std::string drug = SyntheticConfig::drug_name(dr);
            for (int level = 0; level < SyntheticConfig::kConcentrationLevels; ++level) {
                const RenderParams params = drug_render_params(config, cl, dr, level);
                for (int i = 0; i < config.images_per_condition; ++i) {
                    SampleMeta m;
                    m.sample_id = cell_line + "_" + drug + "_c" + std::to_string(level) +
                                  "_t48_i" + std::to_string(i);
                    m.cell_line = cell_line;
                    m.drug = drug;
                    m.concentration_level = level;
                    m.time_point = latest;
                    m.label = Label::drug;
                    m.replicate = "r" + std::to_string(i % 3);
                    Rng rng = sample_rng(m.sample_id);
                    out.push_back(render_crop(params, rng), std::move(m));
                }
            }
        }
        for (double t : SyntheticConfig::kTimePoints) {
            const RenderParams params = control_render_params(config, cl, t);
            for (int i = 0; i < config.images_per_condition; ++i) {
                SampleMeta m;
                m.sample_id = cell_line + "_DMSO_t" + std::to_string(static_cast<int>(t)) +
                              "_i" + std::to_string(i);
                m.cell_line = cell_line;
                m.drug = "DMSO";
                m.concentration_level = 0;
                m.time_point = t;
                m.label = Label::control;
                m.replicate = "r" + std::to_string(i % 3);
                Rng rng = sample_rng(m.sample_id);
                out.push_back(render_crop(params, rng), std::move(m));
            }
        }
    }
    out.check();
    return out;
}

}  // namespace morphbench
