#pragma once

#include <filesystem>
#include <string>

#include "morphbench/cluster_eval.hpp"
#include "morphbench/probe_eval.hpp"
#include "morphbench/similarity_eval.hpp"
#include "morphbench/synthetic.hpp"
#include "morphbench/training.hpp"

namespace morphbench {

// One declarative bundle for the whole harness. Profiles provide presets
// ("desk" runs the full matrix in minutes, "full" mirrors the reference
// setup); a JSON config file overrides individual fields.
struct ExperimentConfig {
    std::string profile = "desk";
    SyntheticConfig data;
    augment::AugmentationPolicy policy;
    models::BackboneConfig backbone = models::default_backbone();
    models::ByolConfig byol;
    training::OptimizerConfig optimizer;
    training::EarlyStopConfig early_stop;
    double val_fraction = 0.1;
    std::uint64_t seed = 7;
    bool include_icl_double_augment = false;

    evalprobe::ProbeConfig probe;
    std::vector<int> cluster_n_neighbors{15, 30, 60, 100};
    std::vector<int> cluster_min_cluster_size{30, 75, 150, 300};
    double cluster_min_dist = 0.1;

    std::string similarity_drug1 = "drug00";
    std::string similarity_drug2 = "drug01";
    std::string similarity_control = "DMSO";
    evalsim::DistanceKind similarity_kind = evalsim::DistanceKind::euclidean;

    static ExperimentConfig desk_profile();
    static ExperimentConfig full_profile();
    static ExperimentConfig from_profile(const std::string& name);

    // Overlays fields present in the JSON file onto this config.
    void apply_json_file(const std::filesystem::path& path);
    void apply_json(const std::string& text);
    std::string to_json() const;
};

}  // namespace morphbench
