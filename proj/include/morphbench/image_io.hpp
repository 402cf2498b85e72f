#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace morphbench::imageio {

struct Gray8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> px;  // row-major
};

// 8-bit grayscale PNG and uncompressed grayscale TIFF. Anything else
// (color, 16-bit, palette, compressed TIFF) is rejected with DataError.
Gray8 read_image(const std::filesystem::path& path);

Gray8 read_png(const std::filesystem::path& path);
Gray8 read_tiff(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Gray8& img);

}  // namespace morphbench::imageio
