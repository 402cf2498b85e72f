#include "morphbench/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "morphbench/csv.hpp"
#include "morphbench/errors.hpp"
#include "morphbench/hash.hpp"
#include "morphbench/image_io.hpp"

namespace morphbench {

static_assert(std::endian::native == std::endian::little,
              "f32 blobs are little-endian; big-endian hosts are unsupported");

void write_f32(const std::filesystem::path& path, const std::vector<float>& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!out) throw DataError("short write: " + path.string());
}

std::vector<float> read_f32(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("cannot open " + path.string());
    auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % sizeof(float) != 0) throw DataError("truncated f32 blob: " + path.string());
    std::vector<float> out(bytes / sizeof(float));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw DataError("short read: " + path.string());
    return out;
}

static std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

static csv::Table meta_table(const std::vector<SampleMeta>& meta) {
    csv::Table t;
    t.header = {"sample_id", "cell_line", "drug", "concentration_level",
                "time_point", "label", "replicate"};
    for (const auto& m : meta) {
        t.rows.push_back({m.sample_id, m.cell_line, m.drug,
                          std::to_string(m.concentration_level), format_double(m.time_point),
                          to_string(m.label), m.replicate});
    }
    return t;
}

static std::vector<SampleMeta> meta_from_table(const csv::Table& t) {
    std::vector<SampleMeta> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        SampleMeta m;
        m.sample_id = t.at(i, "sample_id");
        m.cell_line = t.at(i, "cell_line");
        m.drug = t.at(i, "drug");
        m.concentration_level = std::stoi(t.at(i, "concentration_level"));
        m.time_point = std::stod(t.at(i, "time_point"));
        m.label = label_from_string(t.at(i, "label"));
        m.replicate = t.at(i, "replicate");
        out.push_back(std::move(m));
    }
    return out;
}

std::string dataset_checksum(const Dataset& dataset) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& img : dataset.images)
        h = fnv1a64(img.px.data(), img.px.size() * sizeof(float), h);
    return to_hex(h);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir,
                  const std::optional<std::string>& generator_config_json) {
    dataset.check();
    std::filesystem::create_directories(dir);

    std::vector<float> flat;
    flat.reserve(dataset.size() * ImageCrop::kPixels);
    for (const auto& img : dataset.images) flat.insert(flat.end(), img.px.begin(), img.px.end());
    write_f32(dir / "images.f32", flat);
    csv::write_file(dir / "meta.csv", meta_table(dataset.meta));

    nlohmann::json manifest;
    manifest["n"] = dataset.size();
    manifest["checksum"] = dataset_checksum(dataset);
    if (generator_config_json)
        manifest["generator_config"] = nlohmann::json::parse(*generator_config_json);
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
    auto flat = read_f32(dir / "images.f32");
    auto meta = meta_from_table(csv::read_file(dir / "meta.csv"));
    if (flat.size() != meta.size() * static_cast<std::size_t>(ImageCrop::kPixels))
        throw DataError("dataset pixel blob does not match meta.csv row count: " + dir.string());

    Dataset out;
    out.meta = std::move(meta);
    out.images.reserve(out.meta.size());
    for (std::size_t i = 0; i < out.meta.size(); ++i) {
        std::vector<float> px(flat.begin() + static_cast<std::ptrdiff_t>(i * ImageCrop::kPixels),
                              flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * ImageCrop::kPixels));
        out.images.emplace_back(std::move(px));
    }
    out.check();
    return out;
}

std::string load_dataset_checksum(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw DataError("missing manifest.json in " + dir.string());
    nlohmann::json manifest = nlohmann::json::parse(in);
    return manifest.at("checksum").get<std::string>();
}

Dataset ingest_folder(const std::filesystem::path& root,
                      const std::filesystem::path& metadata_table) {
    auto table = csv::read_file(metadata_table);
    for (const char* col : {"sample_id", "cell_line", "drug", "concentration_level",
                            "time_point", "label", "replicate", "filename"})
        if (table.column(col) < 0)
            throw DataError("metadata table missing column '" + std::string(col) + "'");

    Dataset out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& filename = table.at(i, "filename");
        auto path = root / filename;
        if (!std::filesystem::exists(path))
            throw DataError("metadata row references missing file: " + path.string());

        auto gray = imageio::read_image(path);
        if (gray.width != ImageCrop::kSide || gray.height != ImageCrop::kSide)
            throw DataError("image is not 64x64: " + path.string());

        ImageCrop crop;
        for (int p = 0; p < ImageCrop::kPixels; ++p)
            crop.px[static_cast<std::size_t>(p)] = static_cast<float>(gray.px[static_cast<std::size_t>(p)]) / 255.0f;

        SampleMeta m;
        m.sample_id = table.at(i, "sample_id");
        m.cell_line = table.at(i, "cell_line");
        m.drug = table.at(i, "drug");
        m.concentration_level = std::stoi(table.at(i, "concentration_level"));
        m.time_point = std::stod(table.at(i, "time_point"));
        m.label = label_from_string(table.at(i, "label"));
        m.replicate = table.at(i, "replicate");
        out.push_back(std::move(crop), std::move(m));
    }
    out.check();
    return out;
}

}  // namespace morphbench
