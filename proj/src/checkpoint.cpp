#include "morphbench/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "morphbench/errors.hpp"
#include "morphbench/hash.hpp"

namespace morphbench {

namespace {

constexpr char kMagic[4] = {'M', 'B', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

nlohmann::json backbone_to_json(const models::BackboneConfig& cfg) {
    nlohmann::json j;
    j["latent_dim"] = cfg.latent_dim;
    j["in_side"] = cfg.in_side;
    j["in_channels"] = cfg.in_channels;
    j["blocks"] = nlohmann::json::array();
    for (const auto& b : cfg.blocks)
        j["blocks"].push_back({{"out_channels", b.out_channels}, {"kernel", b.kernel}, {"stride", b.stride}});
    return j;
}

models::BackboneConfig backbone_from_json(const nlohmann::json& j) {
    models::BackboneConfig cfg;
    cfg.latent_dim = j.at("latent_dim");
    cfg.in_side = j.at("in_side");
    cfg.in_channels = j.at("in_channels");
    cfg.blocks.clear();
    for (const auto& b : j.at("blocks"))
        cfg.blocks.push_back({b.at("out_channels"), b.at("kernel"), b.at("stride")});
    return cfg;
}

}  // namespace

std::string backbone_config_to_json(const models::BackboneConfig& cfg) {
    return backbone_to_json(cfg).dump();
}

models::BackboneConfig backbone_config_from_json(const std::string& text) {
    return backbone_from_json(nlohmann::json::parse(text));
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointInfo& info,
                     const std::vector<nn::ParamRef<float>>& params) {
    nlohmann::json header;
    header["model"] = info.model;
    header["setup_id"] = info.setup_id;
    header["epoch"] = info.epoch;
    header["seed"] = info.seed;
    header["backbone"] = backbone_to_json(info.backbone);
    header["byol"] = {{"projection_size", info.byol.projection_size},
                      {"projection_hidden_size", info.byol.projection_hidden_size},
                      {"moving_average_decay", info.byol.moving_average_decay}};
    header["tensors"] = nlohmann::json::array();
    for (const auto& p : params)
        header["tensors"].push_back({{"name", p.name}, {"shape", p.value->shape}});
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    const std::uint64_t hlen = header_str.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& p : params)
        out.write(reinterpret_cast<const char*>(p.value->data.data()),
                  static_cast<std::streamsize>(p.value->numel() * sizeof(float)));
    if (!out) throw DataError("short checkpoint write: " + path.string());
}

static nlohmann::json read_header(std::ifstream& in, const std::filesystem::path& path) {
    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t hlen = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a checkpoint file: " + path.string());
    if (version != kVersion)
        throw DataError("unsupported checkpoint version in " + path.string());
    std::string header_str(hlen, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw DataError("truncated checkpoint header: " + path.string());
    return nlohmann::json::parse(header_str);
}

static CheckpointInfo info_from_header(const nlohmann::json& header) {
    CheckpointInfo info;
    info.model = header.at("model");
    info.setup_id = header.at("setup_id");
    info.epoch = header.at("epoch");
    info.seed = header.at("seed");
    info.backbone = backbone_from_json(header.at("backbone"));
    info.byol.projection_size = header.at("byol").at("projection_size");
    info.byol.projection_hidden_size = header.at("byol").at("projection_hidden_size");
    info.byol.moving_average_decay = header.at("byol").at("moving_average_decay");
    return info;
}

CheckpointInfo peek_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    return info_from_header(read_header(in, path));
}

CheckpointInfo load_checkpoint(const std::filesystem::path& path,
                               const std::vector<nn::ParamRef<float>>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    nlohmann::json header = read_header(in, path);

    const auto& tensors = header.at("tensors");
    if (tensors.size() != params.size())
        throw DataError("checkpoint tensor count mismatch: " + path.string());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& entry = tensors[i];
        if (entry.at("name") != params[i].name)
            throw DataError("checkpoint tensor name mismatch at index " + std::to_string(i) +
                            ": expected " + params[i].name);
        std::vector<int> shape = entry.at("shape");
        if (shape != params[i].value->shape)
            throw DataError("checkpoint tensor shape mismatch for " + params[i].name);
        in.read(reinterpret_cast<char*>(params[i].value->data.data()),
                static_cast<std::streamsize>(params[i].value->numel() * sizeof(float)));
    }
    if (!in) throw DataError("truncated checkpoint data: " + path.string());
    return info_from_header(header);
}

std::string checkpoint_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return to_hex(fnv1a64(bytes.data(), bytes.size()));
}

}  // namespace morphbench
