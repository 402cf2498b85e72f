#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "morphbench/data.hpp"

namespace morphbench {

// Little-endian float32 blobs; the layout is documented in the README.
void write_f32(const std::filesystem::path& path, const std::vector<float>& values);
std::vector<float> read_f32(const std::filesystem::path& path);

// Dataset directory: images.f32 (row-major N x 64 x 64) + meta.csv + manifest.json.
// `generator_config_json` is stored verbatim in the manifest when present.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir,
                  const std::optional<std::string>& generator_config_json = std::nullopt);
Dataset load_dataset(const std::filesystem::path& dir);

// Checksum of the serialized pixel blob, as recorded in manifest.json.
std::string dataset_checksum(const Dataset& dataset);
std::string load_dataset_checksum(const std::filesystem::path& dir);

// Decodes every image named in the metadata table (CSV with columns
// sample_id,cell_line,drug,concentration_level,time_point,label,replicate,filename),
// scales 8-bit intensities by 1/255 and rejects anything that is not 64x64.
Dataset ingest_folder(const std::filesystem::path& root,
                      const std::filesystem::path& metadata_table);

}  // namespace morphbench
