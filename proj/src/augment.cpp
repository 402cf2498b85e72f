#include "morphbench/augment.hpp"

#include <algorithm>
#include <cmath>

#include "morphbench/errors.hpp"

namespace morphbench::augment {

void AugmentationPolicy::check() const {
    auto [lo, hi] = resized_crop_scale;
    if (!(lo > 0.0 && lo <= hi && hi <= 1.0))
        throw DataError("resized_crop_scale must satisfy 0 < lo <= hi <= 1");
    if (hflip_probability < 0.0 || hflip_probability > 1.0)
        throw DataError("hflip_probability outside [0,1]");
    if (blur_probability < 0.0 || blur_probability > 1.0)
        throw DataError("blur_probability outside [0,1]");
    if (!(blur_sigma.first > 0.0 && blur_sigma.first <= blur_sigma.second))
        throw DataError("blur_sigma range invalid");
    if (blur_kernel_px < 3 || blur_kernel_px % 2 == 0)
        throw DataError("blur kernel must be odd and >= 3");
}

CropStrategy crop_strategy_from_string(const std::string& s) {
    if (s == "one_crop") return CropStrategy::one_crop;
    if (s == "multi_crop") return CropStrategy::multi_crop;
    throw DataError("unknown crop strategy: '" + s + "'");
}

std::string to_string(CropStrategy s) {
    return s == CropStrategy::one_crop ? "one_crop" : "multi_crop";
}

ImageCrop flip_horizontal(const ImageCrop& img) {
    ImageCrop out;
    for (int r = 0; r < ImageCrop::kSide; ++r)
        for (int c = 0; c < ImageCrop::kSide; ++c)
            out.at(r, c) = img.at(r, ImageCrop::kSide - 1 - c);
    return out;
}

// Bilinear sampling of the window [x0, x0+w) x [y0, y0+h) back to 64x64,
// half-pixel centers. A full-image window reproduces the input exactly.
ImageCrop resize_region_bilinear(const ImageCrop& img, double x0, double y0, double w, double h) {
    constexpr int side = ImageCrop::kSide;
    ImageCrop out;
    const double sx = w / side;
    const double sy = h / side;
    for (int r = 0; r < side; ++r) {
        double src_y = y0 + (r + 0.5) * sy - 0.5;
        src_y = std::clamp(src_y, 0.0, static_cast<double>(side - 1));
        const int y_lo = static_cast<int>(src_y);
        const int y_hi = std::min(y_lo + 1, side - 1);
        const double fy = src_y - y_lo;
        for (int c = 0; c < side; ++c) {
            double src_x = x0 + (c + 0.5) * sx - 0.5;
            src_x = std::clamp(src_x, 0.0, static_cast<double>(side - 1));
            const int x_lo = static_cast<int>(src_x);
            const int x_hi = std::min(x_lo + 1, side - 1);
            const double fx = src_x - x_lo;
            const double v = (1.0 - fy) * ((1.0 - fx) * img.at(y_lo, x_lo) + fx * img.at(y_lo, x_hi)) +
                             fy * ((1.0 - fx) * img.at(y_hi, x_lo) + fx * img.at(y_hi, x_hi));
            out.at(r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return out;
}

// Reflect indexing (edge repeats: -1 -> 0, -2 -> 1).
static int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

ImageCrop gaussian_blur(const ImageCrop& img, double sigma, int kernel_px) {
    constexpr int side = ImageCrop::kSide;
    const int radius = kernel_px / 2;
    std::vector<double> kernel(static_cast<std::size_t>(kernel_px));
    double sum = 0.0;
    for (int i = 0; i < kernel_px; ++i) {
        const double d = i - radius;
        kernel[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += kernel[static_cast<std::size_t>(i)];
    }
    for (auto& k : kernel) k /= sum;

    // Separable passes, horizontal then vertical.
    std::vector<double> tmp(ImageCrop::kPixels);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<std::size_t>(i + radius)] * img.at(r, reflect(c + i, side));
            tmp[static_cast<std::size_t>(r) * side + c] = acc;
        }
    ImageCrop out;
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<std::size_t>(i + radius)] * tmp[static_cast<std::size_t>(reflect(r + i, side)) * side + c];
            out.at(r, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
        }
    return out;
}

// Torchvision-style sampling: up to 10 attempts to fit an area/aspect draw,
// then a full-window fallback (so scale (1,1) degenerates to identity).
static ImageCrop random_resized_crop(const ImageCrop& img, double scale_lo, double scale_hi, Rng& rng) {
    constexpr int side = ImageCrop::kSide;
    constexpr double area = static_cast<double>(side) * side;
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double target_area = area * rng.uniform(scale_lo, scale_hi);
        const double aspect = rng.uniform(3.0 / 4.0, 4.0 / 3.0);
        const int w = static_cast<int>(std::lround(std::sqrt(target_area * aspect)));
        const int h = static_cast<int>(std::lround(std::sqrt(target_area / aspect)));
        if (w < 1 || h < 1 || w > side || h > side) continue;
        const int x0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(side - w + 1)));
        const int y0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(side - h + 1)));
        return resize_region_bilinear(img, x0, y0, w, h);
    }
    return resize_region_bilinear(img, 0, 0, side, side);
}

ImageCrop apply_augmentations(const ImageCrop& img, const AugmentationPolicy& policy, Rng& rng) {
    policy.check();
    ImageCrop out = random_resized_crop(img, policy.resized_crop_scale.first,
                                        policy.resized_crop_scale.second, rng);
    if (rng.bernoulli(policy.hflip_probability)) out = flip_horizontal(out);
    if (rng.bernoulli(policy.blur_probability)) {
        const double sigma = rng.uniform(policy.blur_sigma.first, policy.blur_sigma.second);
        out = gaussian_blur(out, sigma, policy.blur_kernel_px);
    }
    return out;
}

// Square window with side 64*sqrt(area_fraction), uniform position.
static ImageCrop scaled_crop(const ImageCrop& img, double area_lo, double area_hi, Rng& rng) {
    constexpr int side = ImageCrop::kSide;
    const double frac = rng.uniform(area_lo, area_hi);
    int crop_side = static_cast<int>(std::lround(side * std::sqrt(frac)));
    crop_side = std::clamp(crop_side, 1, side);
    const int x0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(side - crop_side + 1)));
    const int y0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(side - crop_side + 1)));
    return resize_region_bilinear(img, x0, y0, crop_side, crop_side);
}

ViewSet make_views(const ImageCrop& img, CropStrategy strategy,
                   const std::optional<AugmentationPolicy>& policy, Rng& rng,
                   const std::string& source_id) {
    ViewSet out;
    out.source_id = source_id;
    if (strategy == CropStrategy::one_crop) {
        out.views.push_back(policy ? apply_augmentations(img, *policy, rng) : img);
        return out;
    }
    out.views.push_back(img);
    out.views.push_back(scaled_crop(img, kHalfAreaLo, kHalfAreaHi, rng));
    out.views.push_back(scaled_crop(img, kHalfAreaLo, kHalfAreaHi, rng));
    out.views.push_back(scaled_crop(img, kQuarterAreaLo, kQuarterAreaHi, rng));
    out.views.push_back(scaled_crop(img, kQuarterAreaLo, kQuarterAreaHi, rng));
    if (policy)
        for (auto& view : out.views) view = apply_augmentations(view, *policy, rng);
    return out;
}

std::pair<ImageCrop, ImageCrop> byol_view_pair(const ImageCrop& img,
                                               const AugmentationPolicy& policy,
                                               bool double_augment, Rng& rng) {
    ImageCrop base = double_augment ? apply_augmentations(img, policy, rng) : img;
    ImageCrop a = apply_augmentations(base, policy, rng);
    ImageCrop b = apply_augmentations(base, policy, rng);
    return {std::move(a), std::move(b)};
}

}  // namespace morphbench::augment
