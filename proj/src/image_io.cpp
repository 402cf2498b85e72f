#include "morphbench/image_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "morphbench/errors.hpp"

namespace morphbench::imageio {

namespace {

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image file: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | p[3];
}

std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* data, std::size_t n, std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    uLongf out_len = static_cast<uLongf>(out.size());
    int rc = uncompress(out.data(), &out_len, data, static_cast<uLong>(n));
    if (rc != Z_OK || out_len != out.size()) throw DataError("corrupt image: zlib inflate failed");
    return out;
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

Gray8 read_png(const std::filesystem::path& path) {
    auto bytes = read_all(path);
    static const std::uint8_t magic[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), magic, 8) != 0)
        throw DataError("corrupt image (not a PNG): " + path.string());

    Gray8 img;
    int bit_depth = 0, color_type = -1;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        std::uint32_t len = be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw DataError("corrupt PNG chunk: " + path.string());
        std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
        const std::uint8_t* payload = &bytes[pos + 8];
        if (type == "IHDR") {
            if (len != 13) throw DataError("corrupt PNG IHDR: " + path.string());
            img.width = static_cast<int>(be32(payload));
            img.height = static_cast<int>(be32(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw DataError("interlaced PNG unsupported: " + path.string());
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (img.width <= 0 || img.height <= 0 || idat.empty())
        throw DataError("corrupt PNG: " + path.string());
    if (bit_depth != 8 || color_type != 0)
        throw DataError("PNG must be 8-bit grayscale: " + path.string());

    const std::size_t stride = static_cast<std::size_t>(img.width);
    auto raw = zlib_inflate(idat.data(), idat.size(), (stride + 1) * static_cast<std::size_t>(img.height));
    img.px.resize(stride * static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        const std::uint8_t filter = raw[(stride + 1) * y];
        const std::uint8_t* src = &raw[(stride + 1) * y + 1];
        std::uint8_t* dst = &img.px[stride * y];
        const std::uint8_t* up = y > 0 ? &img.px[stride * (y - 1)] : nullptr;
        for (std::size_t x = 0; x < stride; ++x) {
            int a = x > 0 ? dst[x - 1] : 0;
            int b = up ? up[x] : 0;
            int c = (x > 0 && up) ? up[x - 1] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw DataError("corrupt PNG filter: " + path.string());
            }
            dst[x] = static_cast<std::uint8_t>(v & 0xff);
        }
    }
    return img;
}

void write_png(const std::filesystem::path& path, const Gray8& img) {
    const std::size_t stride = static_cast<std::size_t>(img.width);
    std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        raw[(stride + 1) * y] = 0;  // no filter
        std::memcpy(&raw[(stride + 1) * y + 1], &img.px[stride * y], stride);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    if (compress(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size())) != Z_OK)
        throw DataError("png write: deflate failed");
    comp.resize(comp_len);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image file: " + path.string());
    auto put32 = [&](std::uint32_t v) {
        std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16), std::uint8_t(v >> 8), std::uint8_t(v)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    auto chunk = [&](const char* type, const std::uint8_t* data, std::size_t n) {
        put32(static_cast<std::uint32_t>(n));
        out.write(type, 4);
        if (n) out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
        uLong crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
        if (n) crc = crc32(crc, data, static_cast<uInt>(n));
        put32(static_cast<std::uint32_t>(crc));
    };
    static const std::uint8_t magic[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    out.write(reinterpret_cast<const char*>(magic), 8);
    std::uint8_t ihdr[13] = {};
    std::uint32_t w = static_cast<std::uint32_t>(img.width), h = static_cast<std::uint32_t>(img.height);
    ihdr[0] = w >> 24; ihdr[1] = w >> 16; ihdr[2] = w >> 8; ihdr[3] = w;
    ihdr[4] = h >> 24; ihdr[5] = h >> 16; ihdr[6] = h >> 8; ihdr[7] = h;
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 0;   // grayscale
    chunk("IHDR", ihdr, 13);
    chunk("IDAT", comp.data(), comp.size());
    chunk("IEND", nullptr, 0);
}

Gray8 read_tiff(const std::filesystem::path& path) {
    auto bytes = read_all(path);
    if (bytes.size() < 8) throw DataError("corrupt image (short TIFF): " + path.string());
    bool le;
    if (bytes[0] == 'I' && bytes[1] == 'I') le = true;
    else if (bytes[0] == 'M' && bytes[1] == 'M') le = false;
    else throw DataError("corrupt image (not a TIFF): " + path.string());

    auto rd16 = [&](std::size_t off) -> std::uint32_t {
        if (off + 2 > bytes.size()) throw DataError("corrupt TIFF: " + path.string());
        return le ? bytes[off] | (bytes[off + 1] << 8) : (bytes[off] << 8) | bytes[off + 1];
    };
    auto rd32 = [&](std::size_t off) -> std::uint32_t {
        if (off + 4 > bytes.size()) throw DataError("corrupt TIFF: " + path.string());
        if (le)
            return bytes[off] | (bytes[off + 1] << 8) | (bytes[off + 2] << 16) | (std::uint32_t(bytes[off + 3]) << 24);
        return (std::uint32_t(bytes[off]) << 24) | (bytes[off + 1] << 16) | (bytes[off + 2] << 8) | bytes[off + 3];
    };

    if (rd16(2) != 42) throw DataError("corrupt TIFF (bad magic): " + path.string());
    std::size_t ifd = rd32(4);
    std::uint32_t entries = rd16(ifd);

    std::uint32_t width = 0, height = 0, bits = 1, compression = 1, photometric = 1, spp = 1;
    std::uint32_t rows_per_strip = 0xffffffff;
    std::vector<std::uint32_t> strip_offsets, strip_counts;

    auto read_values = [&](std::size_t entry, std::uint32_t count, std::uint32_t type) {
        std::vector<std::uint32_t> vals;
        std::size_t unit = type == 3 ? 2 : 4;
        std::size_t where = (unit * count <= 4) ? entry + 8 : rd32(entry + 8);
        for (std::uint32_t i = 0; i < count; ++i)
            vals.push_back(type == 3 ? rd16(where + 2 * i) : rd32(where + 4 * i));
        return vals;
    };

    for (std::uint32_t e = 0; e < entries; ++e) {
        std::size_t entry = ifd + 2 + 12 * e;
        std::uint32_t tag = rd16(entry);
        std::uint32_t type = rd16(entry + 2);
        std::uint32_t count = rd32(entry + 4);
        switch (tag) {
            case 256: width = read_values(entry, 1, type)[0]; break;
            case 257: height = read_values(entry, 1, type)[0]; break;
            case 258: bits = read_values(entry, 1, type)[0]; break;
            case 259: compression = read_values(entry, 1, type)[0]; break;
            case 262: photometric = read_values(entry, 1, type)[0]; break;
            case 273: strip_offsets = read_values(entry, count, type); break;
            case 277: spp = read_values(entry, 1, type)[0]; break;
            case 278: rows_per_strip = read_values(entry, 1, type)[0]; break;
            case 279: strip_counts = read_values(entry, count, type); break;
            default: break;
        }
    }

    if (width == 0 || height == 0 || strip_offsets.empty())
        throw DataError("corrupt TIFF (missing fields): " + path.string());
    if (compression != 1) throw DataError("TIFF must be uncompressed: " + path.string());
    if (bits != 8 || spp != 1 || photometric > 1)
        throw DataError("TIFF must be 8-bit grayscale: " + path.string());

    Gray8 img;
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.px.reserve(static_cast<std::size_t>(width) * height);
    for (std::size_t s = 0; s < strip_offsets.size(); ++s) {
        std::size_t off = strip_offsets[s];
        std::size_t cnt = s < strip_counts.size() ? strip_counts[s]
                                                  : static_cast<std::size_t>(width) * height;
        if (off + cnt > bytes.size()) throw DataError("corrupt TIFF strip: " + path.string());
        img.px.insert(img.px.end(), bytes.begin() + off, bytes.begin() + off + cnt);
    }
    if (img.px.size() != static_cast<std::size_t>(width) * height)
        throw DataError("corrupt TIFF (pixel count): " + path.string());
    if (photometric == 0)  // white-is-zero
        for (auto& v : img.px) v = static_cast<std::uint8_t>(255 - v);
    return img;
}

Gray8 read_image(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == ".png") return read_png(path);
    if (ext == ".tif" || ext == ".tiff") return read_tiff(path);
    throw DataError("unsupported image extension '" + ext + "': " + path.string());
}

}  // namespace morphbench::imageio
