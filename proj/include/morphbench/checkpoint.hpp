#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "morphbench/nets.hpp"

namespace morphbench {

// Single-file checkpoint: "MBCK" magic, u32 version, u64 header length, JSON
// header (architecture, setup id, epoch, seed, tensor directory), then raw
// little-endian float32 tensor data in directory order.
struct CheckpointInfo {
    models::BackboneConfig backbone;
    models::ByolConfig byol;     // meaningful for ICL checkpoints only
    std::string model;           // WSL | SSL | SSR | ICL
    std::string setup_id;
    int epoch = 0;
    std::uint64_t seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointInfo& info,
                     const std::vector<nn::ParamRef<float>>& params);

// Loads tensor data into an already-constructed parameter list; names and
// shapes must match the directory exactly.
CheckpointInfo load_checkpoint(const std::filesystem::path& path,
                               const std::vector<nn::ParamRef<float>>& params);

// Header only (to pick the right architecture before loading tensors).
CheckpointInfo peek_checkpoint(const std::filesystem::path& path);

std::string checkpoint_checksum(const std::filesystem::path& path);

std::string backbone_config_to_json(const models::BackboneConfig& cfg);
models::BackboneConfig backbone_config_from_json(const std::string& text);

}  // namespace morphbench
