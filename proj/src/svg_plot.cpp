#include "morphbench/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "morphbench/errors.hpp"

namespace morphbench::svg {

namespace {

constexpr double kWidth = 900.0, kHeight = 420.0;
constexpr double kMarginLeft = 60.0, kMarginBottom = 70.0, kMarginTop = 40.0, kMarginRight = 20.0;

const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                          "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void write_barplot(const std::filesystem::path& path, const std::string& title,
                   const std::vector<BarGroup>& groups) {
    double lo = 0.0, hi = 0.0;
    std::size_t total_bars = 0;
    for (const auto& g : groups) {
        for (const auto& b : g.bars) {
            lo = std::min(lo, b.value - b.error);
            hi = std::max(hi, b.value + b.error);
            ++total_bars;
        }
    }
    if (total_bars == 0) throw DataError("barplot: no bars");
    if (hi == lo) hi = lo + 1.0;
    const double span = hi - lo;
    hi += 0.05 * span;
    lo -= 0.05 * span;

    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    const double slot = plot_w / static_cast<double>(total_bars + groups.size());
    auto y_of = [&](double v) { return kMarginTop + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    std::ofstream out(path);
    if (!out) throw DataError("cannot write plot: " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\">\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
        << escape(title) << "</text>\n";
    // axis
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << y_of(std::max(0.0, lo)) << "\" x2=\""
        << kWidth - kMarginRight << "\" y2=\"" << y_of(std::max(0.0, lo))
        << "\" stroke=\"#333\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = lo + (hi - lo) * tick / 4.0;
        out << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << y_of(v) + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << num(v) << "</text>\n";
        out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << y_of(v) << "\" x2=\""
            << kWidth - kMarginRight << "\" y2=\"" << y_of(v)
            << "\" stroke=\"#ddd\" stroke-dasharray=\"3,3\"/>\n";
    }

    double x = kMarginLeft + slot * 0.5;
    for (const auto& g : groups) {
        const double group_x0 = x;
        for (std::size_t i = 0; i < g.bars.size(); ++i) {
            const auto& b = g.bars[i];
            const double y0 = y_of(std::max(0.0, std::min(b.value, 0.0)));
            const double y1 = y_of(b.value);
            const double top = std::min(y0, y1);
            const double height = std::max(1.0, std::abs(y0 - y1));
            out << "<rect x=\"" << x << "\" y=\"" << top << "\" width=\"" << slot * 0.8
                << "\" height=\"" << height << "\" fill=\""
                << kPalette[i % 8] << "\"/>\n";
            if (b.error > 0.0) {
                const double cx = x + slot * 0.4;
                out << "<line x1=\"" << cx << "\" y1=\"" << y_of(b.value - b.error) << "\" x2=\""
                    << cx << "\" y2=\"" << y_of(b.value + b.error) << "\" stroke=\"#222\"/>\n";
                out << "<line x1=\"" << cx - 4 << "\" y1=\"" << y_of(b.value + b.error)
                    << "\" x2=\"" << cx + 4 << "\" y2=\"" << y_of(b.value + b.error)
                    << "\" stroke=\"#222\"/>\n";
                out << "<line x1=\"" << cx - 4 << "\" y1=\"" << y_of(b.value - b.error)
                    << "\" x2=\"" << cx + 4 << "\" y2=\"" << y_of(b.value - b.error)
                    << "\" stroke=\"#222\"/>\n";
            }
            out << "<text x=\"" << x + slot * 0.4 << "\" y=\"" << kHeight - kMarginBottom + 14
                << "\" text-anchor=\"end\" font-size=\"10\" transform=\"rotate(-45 "
                << x + slot * 0.4 << " " << kHeight - kMarginBottom + 14 << ")\">"
                << escape(b.label) << "</text>\n";
            x += slot;
        }
        const double group_x1 = x - slot * 0.2;
        out << "<text x=\"" << (group_x0 + group_x1) / 2 << "\" y=\"" << kHeight - 8
            << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(g.title) << "</text>\n";
        x += slot;  // gap between groups
    }
    out << "</svg>\n";
}

void write_histogram(const std::filesystem::path& path, const std::string& title,
                     const std::vector<HistogramSeries>& series) {
    double x_hi = 0.0, y_hi = 0.0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.counts.size(); ++i) {
            x_hi = std::max(x_hi, s.bin_hi[i]);
            y_hi = std::max(y_hi, s.counts[i]);
        }
    }
    if (x_hi <= 0.0) x_hi = 1.0;
    if (y_hi <= 0.0) y_hi = 1.0;

    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    auto x_of = [&](double v) { return kMarginLeft + plot_w * v / x_hi; };
    auto y_of = [&](double v) { return kMarginTop + plot_h * (1.0 - v / y_hi); };

    std::ofstream out(path);
    if (!out) throw DataError("cannot write plot: " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\">\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
        << escape(title) << "</text>\n";
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << y_of(0) << "\" x2=\""
        << kWidth - kMarginRight << "\" y2=\"" << y_of(0) << "\" stroke=\"#333\"/>\n";
    for (int tick = 0; tick <= 5; ++tick) {
        const double v = x_hi * tick / 5.0;
        out << "<text x=\"" << x_of(v) << "\" y=\"" << kHeight - kMarginBottom + 16
            << "\" text-anchor=\"middle\" font-size=\"11\">" << num(v) << "</text>\n";
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % 8];
        for (std::size_t i = 0; i < s.counts.size(); ++i) {
            if (s.counts[i] <= 0.0) continue;
            out << "<rect x=\"" << x_of(s.bin_lo[i]) << "\" y=\"" << y_of(s.counts[i])
                << "\" width=\"" << std::max(0.5, x_of(s.bin_hi[i]) - x_of(s.bin_lo[i]))
                << "\" height=\"" << y_of(0) - y_of(s.counts[i]) << "\" fill=\"" << color
                << "\" fill-opacity=\"0.45\"/>\n";
        }
        out << "<rect x=\"" << kWidth - 190 << "\" y=\"" << 32 + 18 * static_cast<double>(si)
            << "\" width=\"12\" height=\"12\" fill=\"" << color << "\" fill-opacity=\"0.45\"/>\n";
        out << "<text x=\"" << kWidth - 172 << "\" y=\"" << 42 + 18 * static_cast<double>(si)
            << "\" font-size=\"12\">" << escape(s.label) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace morphbench::svg
