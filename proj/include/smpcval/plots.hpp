#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace smpcval {

struct PlotSeries {
    enum class Style { Line, Markers, Polygon, Dashed };

    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    Style style = Style::Line;
    double marker_radius = 2.0;
};

struct PlotPanel {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<PlotSeries> series;
    /// Dashed reference rectangle (x_min, x_max, y_min, y_max).
    std::optional<std::array<double, 4>> frame;
    /// Vertical reference line.
    std::optional<double> marker_x;
};

/// Static SVG with the panels side by side. `comment` lands in an XML comment
/// at the top of the file. Output is a pure function of the inputs.
std::string render_svg(const std::vector<PlotPanel>& panels, const std::string& title,
                       const std::string& comment);

/// Qualitative palette entry i (cycled).
const char* palette(std::size_t i);

}  // namespace smpcval
