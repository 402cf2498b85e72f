#include "morphbench/models.hpp"

#include <cstdio>

#include "morphbench/hash.hpp"

namespace morphbench {

std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace morphbench

namespace morphbench::models {

void BackboneConfig::check() const {
    if (latent_dim <= 0) throw DataError("backbone latent_dim must be positive");
    int side = in_side;
    for (const auto& b : blocks) {
        if (b.out_channels <= 0 || b.kernel <= 0 || b.stride <= 0)
            throw DataError("backbone block with non-positive dimension");
        side = nn::conv_out_side(side, b.kernel, b.stride, b.kernel / 2);
        if (side < 1) throw DataError("backbone blocks collapse the spatial map below 1x1");
    }
}

BackboneConfig default_backbone() {
    BackboneConfig cfg;
    cfg.blocks = {{32, 3, 2}, {64, 3, 2}, {128, 3, 2}, {128, 3, 2}};
    cfg.latent_dim = 128;
    cfg.in_side = 64;
    return cfg;
}

BackboneConfig micro_backbone() {
    BackboneConfig cfg;
    cfg.blocks = {{4, 3, 2}, {8, 3, 2}};
    cfg.latent_dim = 8;
    cfg.in_side = 8;
    return cfg;
}

void check_finite(const std::vector<ParamRef<float>>& params) {
    for (const auto& p : params)
        if (!p.value->all_finite())
            throw NumericError("non-finite parameter tensor: " + p.name);
}

Tensor<float> backbone_forward(Backbone<float>& backbone,
                               const std::vector<const ImageCrop*>& crops) {
    std::vector<ParamRef<float>> params;
    backbone.collect("backbone", params);
    check_finite(params);
    auto x = batch_from_crops<float>(crops);
    auto latent = backbone.forward(x);
    if (!latent.all_finite()) throw NumericError("backbone produced non-finite latent");
    return latent;
}

}  // namespace morphbench::models
