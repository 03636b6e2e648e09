#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "echolab/common.hpp"

namespace echolab::sweep {

/// Floats are printed with 17 significant digits so CSV round-trips are
/// bit-exact.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Comma-separated table with `#`-prefixed metadata lines and a fixed header
/// row. Cells are either preformatted strings or doubles.
class CsvWriter {
public:
    void add_metadata(const std::string& key, const std::string& value) {
        metadata_.push_back("# " + key + " = " + value);
    }
    void set_header(std::vector<std::string> columns) { header_ = std::move(columns); }

    void add_row(const std::vector<std::string>& cells) {
        std::string row;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) row += ',';
            row += cells[i];
        }
        rows_.push_back(std::move(row));
    }

    std::string str() const {
        std::string out;
        for (const auto& m : metadata_) out += m + "\n";
        for (std::size_t i = 0; i < header_.size(); ++i) {
            if (i) out += ',';
            out += header_[i];
        }
        out += "\n";
        for (const auto& r : rows_) out += r + "\n";
        return out;
    }

private:
    std::vector<std::string> metadata_;
    std::vector<std::string> header_;
    std::vector<std::string> rows_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

// ---------------------------------------------------------------------------
// Minimal self-contained SVG emission: line plots and heat maps.

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

namespace svg_detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

/// 5-stop blue-to-red interpolation for heat maps.
inline std::string heat_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    static const double stops[5][3] = {
        {0.050, 0.030, 0.530}, {0.120, 0.570, 0.850}, {0.380, 0.810, 0.430},
        {0.970, 0.730, 0.130}, {0.840, 0.110, 0.110}};
    const double pos = t * 4.0;
    const int lo = std::min(3, static_cast<int>(pos));
    const double f = pos - lo;
    char buf[8];
    std::string out = "#";
    for (int c = 0; c < 3; ++c) {
        const int v =
            static_cast<int>(std::round(255.0 * (stops[lo][c] * (1.0 - f) + stops[lo + 1][c] * f)));
        std::snprintf(buf, sizeof(buf), "%02x", std::clamp(v, 0, 255));
        out += buf;
    }
    return out;
}

} // namespace svg_detail

/// Axis-labeled polyline plot of one or more series.
inline std::string render_line_plot(const std::string& title, const std::string& xlabel,
                                    const std::string& ylabel,
                                    const std::vector<Series>& series) {
    const int width = 720, height = 480, ml = 70, mr = 160, mt = 40, mb = 55;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (xmin > xmax) { xmin = 0; xmax = 1; }
    if (ymin > ymax) { ymin = 0; ymax = 1; }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pw = width - ml - mr, ph = height - mt - mb;
    const auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    const auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(width / 2) + "\" y=\"24\" text-anchor=\"middle\" "
           "font-size=\"16\">" + title + "</text>\n";
    // axes
    svg += "<rect x=\"" + std::to_string(ml) + "\" y=\"" + std::to_string(mt) + "\" width=\"" +
           svg_detail::num(pw) + "\" height=\"" + svg_detail::num(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double xv = xmin + (xmax - xmin) * k / 5.0;
        const double yv = ymin + (ymax - ymin) * k / 5.0;
        svg += "<text x=\"" + svg_detail::num(px(xv)) + "\" y=\"" + std::to_string(height - mb + 18) +
               "\" text-anchor=\"middle\" font-size=\"11\">" + svg_detail::num(xv) + "</text>\n";
        svg += "<text x=\"" + std::to_string(ml - 8) + "\" y=\"" + svg_detail::num(py(yv) + 4) +
               "\" text-anchor=\"end\" font-size=\"11\">" + svg_detail::num(yv) + "</text>\n";
        svg += "<line x1=\"" + svg_detail::num(px(xv)) + "\" y1=\"" + std::to_string(mt) +
               "\" x2=\"" + svg_detail::num(px(xv)) + "\" y2=\"" + std::to_string(height - mb) +
               "\" stroke=\"#dddddd\"/>\n";
    }
    svg += "<text x=\"" + std::to_string(ml + static_cast<int>(pw) / 2) + "\" y=\"" +
           std::to_string(height - 12) + "\" text-anchor=\"middle\" font-size=\"13\">" + xlabel +
           "</text>\n";
    svg += "<text x=\"18\" y=\"" + std::to_string(mt + static_cast<int>(ph) / 2) +
           "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " +
           std::to_string(mt + static_cast<int>(ph) / 2) + ")\">" + ylabel + "</text>\n";
    int color = 0;
    for (const auto& s : series) {
        const char* c = svg_detail::kPalette[color % 8];
        std::string points;
        for (std::size_t i = 0; i < s.x.size(); ++i)
            points += svg_detail::num(px(s.x[i])) + "," + svg_detail::num(py(s.y[i])) + " ";
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"1.5\" "
               "points=\"" + points + "\"/>\n";
        svg += "<text x=\"" + std::to_string(width - mr + 12) + "\" y=\"" +
               std::to_string(mt + 16 + 18 * color) + "\" font-size=\"12\" fill=\"" + c + "\">" +
               s.name + "</text>\n";
        ++color;
    }
    svg += "</svg>\n";
    return svg;
}

/// Heat map over a rectangular (x, y) grid; values in row-major order with x
/// varying fastest.
inline std::string render_heatmap(const std::string& title, const std::string& xlabel,
                                  const std::string& ylabel, const std::vector<double>& xs,
                                  const std::vector<double>& ys,
                                  const std::vector<double>& values) {
    const int width = 720, height = 520, ml = 70, mr = 100, mt = 40, mb = 55;
    const double pw = width - ml - mr, ph = height - mt - mb;
    double vmin = 1e300, vmax = -1e300;
    for (double v : values)
        if (std::isfinite(v)) {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
    if (vmin > vmax) { vmin = 0; vmax = 1; }
    if (vmax == vmin) vmax = vmin + 1;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(width / 2) + "\" y=\"24\" text-anchor=\"middle\" "
           "font-size=\"16\">" + title + "</text>\n";
    const double cw = pw / xs.size(), chh = ph / ys.size();
    for (std::size_t j = 0; j < ys.size(); ++j)
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double v = values[j * xs.size() + i];
            const std::string color = std::isfinite(v)
                                          ? svg_detail::heat_color((v - vmin) / (vmax - vmin))
                                          : std::string("#ffffff");
            svg += "<rect x=\"" + svg_detail::num(ml + i * cw) + "\" y=\"" +
                   svg_detail::num(mt + ph - (j + 1) * chh) + "\" width=\"" +
                   svg_detail::num(cw + 0.5) + "\" height=\"" + svg_detail::num(chh + 0.5) +
                   "\" fill=\"" + color + "\"/>\n";
        }
    svg += "<rect x=\"" + std::to_string(ml) + "\" y=\"" + std::to_string(mt) + "\" width=\"" +
           svg_detail::num(pw) + "\" height=\"" + svg_detail::num(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + std::to_string(ml + static_cast<int>(pw) / 2) + "\" y=\"" +
           std::to_string(height - 12) + "\" text-anchor=\"middle\" font-size=\"13\">" + xlabel +
           "</text>\n";
    svg += "<text x=\"18\" y=\"" + std::to_string(mt + static_cast<int>(ph) / 2) +
           "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " +
           std::to_string(mt + static_cast<int>(ph) / 2) + ")\">" + ylabel + "</text>\n";
    // axis extent labels and a small color bar
    svg += "<text x=\"" + std::to_string(ml) + "\" y=\"" + std::to_string(height - mb + 18) +
           "\" font-size=\"11\">" + svg_detail::num(xs.front()) + "</text>\n";
    svg += "<text x=\"" + std::to_string(ml + static_cast<int>(pw)) + "\" y=\"" +
           std::to_string(height - mb + 18) + "\" text-anchor=\"end\" font-size=\"11\">" +
           svg_detail::num(xs.back()) + "</text>\n";
    svg += "<text x=\"" + std::to_string(ml - 8) + "\" y=\"" + std::to_string(height - mb) +
           "\" text-anchor=\"end\" font-size=\"11\">" + svg_detail::num(ys.front()) + "</text>\n";
    svg += "<text x=\"" + std::to_string(ml - 8) + "\" y=\"" + std::to_string(mt + 12) +
           "\" text-anchor=\"end\" font-size=\"11\">" + svg_detail::num(ys.back()) + "</text>\n";
    for (int k = 0; k <= 40; ++k) {
        svg += "<rect x=\"" + std::to_string(width - mr + 24) + "\" y=\"" +
               svg_detail::num(mt + ph - (k + 1) * ph / 41.0) + "\" width=\"16\" height=\"" +
               svg_detail::num(ph / 41.0 + 0.5) + "\" fill=\"" +
               svg_detail::heat_color(k / 40.0) + "\"/>\n";
    }
    svg += "<text x=\"" + std::to_string(width - mr + 44) + "\" y=\"" +
           std::to_string(mt + static_cast<int>(ph)) + "\" font-size=\"11\">" +
           svg_detail::num(vmin) + "</text>\n";
    svg += "<text x=\"" + std::to_string(width - mr + 44) + "\" y=\"" + std::to_string(mt + 12) +
           "\" font-size=\"11\">" + svg_detail::num(vmax) + "</text>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace echolab::sweep
