#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace morphbench::svg {

struct Bar {
    std::string label;
    double value = 0.0;
    double error = 0.0;  // symmetric error bar half-height
};

struct BarGroup {
    std::string title;
    std::vector<Bar> bars;
};

// Grouped bar plot with error bars; deterministic output bytes.
void write_barplot(const std::filesystem::path& path, const std::string& title,
                   const std::vector<BarGroup>& groups);

struct HistogramSeries {
    std::string label;
    std::vector<double> bin_lo, bin_hi;
    std::vector<double> counts;
};

void write_histogram(const std::filesystem::path& path, const std::string& title,
                     const std::vector<HistogramSeries>& series);

}  // namespace morphbench::svg
