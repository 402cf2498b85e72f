#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace morphbench::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
    const std::string& at(std::size_t row, const std::string& name) const;
};

Table read_file(const std::filesystem::path& path);
Table parse(const std::string& text);

std::string escape(const std::string& field);
void write_file(const std::filesystem::path& path, const Table& table);

}  // namespace morphbench::csv
