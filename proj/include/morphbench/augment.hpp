#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "morphbench/data.hpp"
#include "morphbench/rng.hpp"

namespace morphbench::augment {

struct AugmentationPolicy {
    std::pair<double, double> resized_crop_scale{0.5, 1.0};  // fraction of area
    double hflip_probability = 0.5;
    double blur_probability = 0.5;
    std::pair<double, double> blur_sigma{0.1, 2.0};
    int blur_kernel_px = 5;

    void check() const;  // throws DataError on degenerate settings

    static AugmentationPolicy identity() {
        return {{1.0, 1.0}, 0.0, 0.0, {0.1, 2.0}, 5};
    }
};

enum class CropStrategy { one_crop, multi_crop };

CropStrategy crop_strategy_from_string(const std::string& s);
std::string to_string(CropStrategy s);

struct ViewSet {
    std::vector<ImageCrop> views;
    std::string source_id;
};

// Multi-crop area-fraction windows; "about half/quarter size" resolved to
// source side lengths of 24-40 px and 12-20 px.
constexpr double kHalfAreaLo = 0.14, kHalfAreaHi = 0.39;
constexpr double kQuarterAreaLo = 0.035, kQuarterAreaHi = 0.10;

// Random resized crop (aspect jitter 3/4..4/3, bilinear back to 64x64),
// horizontal flip, Gaussian blur with reflect padding. Deterministic given rng.
ImageCrop apply_augmentations(const ImageCrop& img, const AugmentationPolicy& policy, Rng& rng);

// one_crop: [img], augmented iff a policy is given. multi_crop: base view plus
// two half-size and two quarter-size crops, each resized to 64x64; the policy
// (if given) is applied to every view independently.
ViewSet make_views(const ImageCrop& img, CropStrategy strategy,
                   const std::optional<AugmentationPolicy>& policy, Rng& rng,
                   const std::string& source_id = {});

// Two independently augmented views; with double_augment the source image is
// pre-augmented once and both views are drawn from the result.
std::pair<ImageCrop, ImageCrop> byol_view_pair(const ImageCrop& img,
                                               const AugmentationPolicy& policy,
                                               bool double_augment, Rng& rng);

// Shared raster primitives (also used by tests and the synthetic generator).
ImageCrop flip_horizontal(const ImageCrop& img);
ImageCrop resize_region_bilinear(const ImageCrop& img, double x0, double y0, double w, double h);
ImageCrop gaussian_blur(const ImageCrop& img, double sigma, int kernel_px);

}  // namespace morphbench::augment
