#include "morphbench/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "morphbench/errors.hpp"

namespace morphbench {

ExperimentConfig ExperimentConfig::desk_profile() {
    ExperimentConfig cfg;
    cfg.profile = "desk";
    cfg.data.n_cell_lines = 2;
    cfg.data.n_drugs = 3;
    cfg.data.images_per_condition = 52;  // 2*(3*5+4)*52 = 1976 crops
    cfg.data.seed = 7;
    cfg.optimizer.epochs = 2;
    cfg.optimizer.batch_size = 64;
    cfg.val_fraction = 0.2;  // keeps per-set pair counts workable at this scale
    cfg.cluster_n_neighbors = {5, 10};
    cfg.cluster_min_cluster_size = {5, 15};
    return cfg;
}

ExperimentConfig ExperimentConfig::full_profile() {
    ExperimentConfig cfg;
    cfg.profile = "full";
    cfg.data.n_cell_lines = 21;
    cfg.data.n_drugs = 31;
    cfg.data.images_per_condition = 64;
    cfg.optimizer.epochs = 50;
    cfg.optimizer.batch_size = 256;
    cfg.val_fraction = 0.1;
    cfg.cluster_n_neighbors = {15, 30, 60, 100};
    cfg.cluster_min_cluster_size = {30, 75, 150, 300};
    return cfg;
}

ExperimentConfig ExperimentConfig::from_profile(const std::string& name) {
    if (name == "desk") return desk_profile();
    if (name == "full") return full_profile();
    throw DataError("unknown profile: '" + name + "' (expected desk|full)");
}

void ExperimentConfig::apply_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path.string());
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    apply_json(text);
}

void ExperimentConfig::apply_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);

    if (j.contains("profile")) *this = from_profile(j["profile"].get<std::string>());

    if (j.contains("data")) {
        const auto& d = j["data"];
        data.n_cell_lines = d.value("n_cell_lines", data.n_cell_lines);
        data.n_drugs = d.value("n_drugs", data.n_drugs);
        data.images_per_condition = d.value("images_per_condition", data.images_per_condition);
        if (d.contains("cell_density_range"))
            data.cell_density_range = {d["cell_density_range"][0], d["cell_density_range"][1]};
        if (d.contains("cell_size_px"))
            data.cell_size_px = {d["cell_size_px"][0], d["cell_size_px"][1]};
        if (d.contains("fragmentation_per_drug"))
            data.fragmentation_per_drug = d["fragmentation_per_drug"].get<std::vector<double>>();
        if (d.contains("growth_rate_per_cell_line"))
            data.growth_rate_per_cell_line =
                d["growth_rate_per_cell_line"].get<std::vector<double>>();
        data.noise_sigma = d.value("noise_sigma", data.noise_sigma);
        data.seed = d.value("seed", data.seed);
    }
    if (j.contains("augment")) {
        const auto& a = j["augment"];
        if (a.contains("resized_crop_scale"))
            policy.resized_crop_scale = {a["resized_crop_scale"][0], a["resized_crop_scale"][1]};
        policy.hflip_probability = a.value("hflip_probability", policy.hflip_probability);
        policy.blur_probability = a.value("blur_probability", policy.blur_probability);
        if (a.contains("blur_sigma")) policy.blur_sigma = {a["blur_sigma"][0], a["blur_sigma"][1]};
        policy.blur_kernel_px = a.value("blur_kernel_px", policy.blur_kernel_px);
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        backbone.latent_dim = m.value("latent_dim", backbone.latent_dim);
        if (m.contains("blocks")) {
            backbone.blocks.clear();
            for (const auto& b : m["blocks"])
                backbone.blocks.push_back({b.at("out_channels"), b.value("kernel", 3), b.value("stride", 2)});
        }
        if (m.contains("byol")) {
            const auto& y = m["byol"];
            byol.projection_size = y.value("projection_size", byol.projection_size);
            byol.projection_hidden_size =
                y.value("projection_hidden_size", byol.projection_hidden_size);
            byol.moving_average_decay =
                y.value("moving_average_decay", byol.moving_average_decay);
        }
    }
    if (j.contains("optimizer")) {
        const auto& o = j["optimizer"];
        optimizer.learning_rate = o.value("learning_rate", optimizer.learning_rate);
        optimizer.epochs = o.value("epochs", optimizer.epochs);
        optimizer.batch_size = o.value("batch_size", optimizer.batch_size);
    }
    if (j.contains("early_stop")) {
        const auto& e = j["early_stop"];
        early_stop.relative_margin = e.value("relative_margin", early_stop.relative_margin);
        early_stop.patience = e.value("patience", early_stop.patience);
    }
    if (j.contains("split")) {
        val_fraction = j["split"].value("val_fraction", val_fraction);
        seed = j["split"].value("seed", seed);
    }
    if (j.contains("matrix"))
        include_icl_double_augment =
            j["matrix"].value("include_icl_double_augment", include_icl_double_augment);
    if (j.contains("probe")) {
        const auto& p = j["probe"];
        probe.hidden_units = p.value("hidden_units", probe.hidden_units);
        probe.epochs = p.value("epochs", probe.epochs);
        probe.batch_size = p.value("batch_size", probe.batch_size);
        if (p.contains("learning_rates"))
            probe.learning_rates = p["learning_rates"].get<std::vector<double>>();
        if (p.contains("momentums")) probe.momentums = p["momentums"].get<std::vector<double>>();
        if (p.contains("weight_decays"))
            probe.weight_decays = p["weight_decays"].get<std::vector<double>>();
    }
    if (j.contains("cluster")) {
        const auto& c = j["cluster"];
        if (c.contains("n_neighbors"))
            cluster_n_neighbors = c["n_neighbors"].get<std::vector<int>>();
        if (c.contains("min_cluster_size"))
            cluster_min_cluster_size = c["min_cluster_size"].get<std::vector<int>>();
        cluster_min_dist = c.value("min_dist", cluster_min_dist);
    }
    if (j.contains("similarity")) {
        const auto& s = j["similarity"];
        similarity_drug1 = s.value("drug1", similarity_drug1);
        similarity_drug2 = s.value("drug2", similarity_drug2);
        similarity_control = s.value("control", similarity_control);
        if (s.contains("kind"))
            similarity_kind = evalsim::distance_kind_from_string(s["kind"].get<std::string>());
    }
    seed = j.value("seed", seed);
}

std::string ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["profile"] = profile;
    j["data"] = nlohmann::json::parse(data.to_json());
    j["augment"] = {{"resized_crop_scale", {policy.resized_crop_scale.first, policy.resized_crop_scale.second}},
                    {"hflip_probability", policy.hflip_probability},
                    {"blur_probability", policy.blur_probability},
                    {"blur_sigma", {policy.blur_sigma.first, policy.blur_sigma.second}},
                    {"blur_kernel_px", policy.blur_kernel_px}};
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : backbone.blocks)
        blocks.push_back({{"out_channels", b.out_channels}, {"kernel", b.kernel}, {"stride", b.stride}});
    j["model"] = {{"latent_dim", backbone.latent_dim},
                  {"blocks", blocks},
                  {"byol",
                   {{"projection_size", byol.projection_size},
                    {"projection_hidden_size", byol.projection_hidden_size},
                    {"moving_average_decay", byol.moving_average_decay}}}};
    j["optimizer"] = {{"learning_rate", optimizer.learning_rate},
                      {"epochs", optimizer.epochs},
                      {"batch_size", optimizer.batch_size}};
    j["early_stop"] = {{"relative_margin", early_stop.relative_margin},
                       {"patience", early_stop.patience}};
    j["split"] = {{"val_fraction", val_fraction}, {"seed", seed}};
    j["matrix"] = {{"include_icl_double_augment", include_icl_double_augment}};
    j["probe"] = {{"hidden_units", probe.hidden_units},
                  {"epochs", probe.epochs},
                  {"batch_size", probe.batch_size},
                  {"learning_rates", probe.learning_rates},
                  {"momentums", probe.momentums},
                  {"weight_decays", probe.weight_decays}};
    j["cluster"] = {{"n_neighbors", cluster_n_neighbors},
                    {"min_cluster_size", cluster_min_cluster_size},
                    {"min_dist", cluster_min_dist}};
    j["similarity"] = {{"drug1", similarity_drug1},
                       {"drug2", similarity_drug2},
                       {"control", similarity_control},
                       {"kind", evalsim::to_string(similarity_kind)}};
    j["seed"] = seed;
    return j.dump(2);
}

}  // namespace morphbench
