#include "smpcval/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace smpcval {

namespace {

constexpr double kPanelWidth = 480.0;
constexpr double kPanelHeight = 360.0;
constexpr double kLeft = 72.0, kRight = 18.0, kTop = 36.0, kBottom = 52.0;
constexpr double kTitleHeight = 28.0;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '&':
                out += "&amp;";
                break;
            case '"':
                out += "&quot;";
                break;
            default:
                out += c;
        }
    }
    return out;
}

struct Axis {
    bool log = false;
    double lo = 0.0, hi = 1.0;  // in transformed units

    double transform(double v) const { return log ? std::log10(v) : v; }
    bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
};

Axis make_axis(bool log, double lo, double hi) {
    Axis a;
    a.log = log;
    if (!(lo <= hi)) {
        lo = log ? 1.0 : 0.0;
        hi = log ? 10.0 : 1.0;
    }
    if (log) {
        a.lo = std::floor(std::log10(lo));
        a.hi = std::ceil(std::log10(hi));
        if (a.hi <= a.lo) a.hi = a.lo + 1.0;
        return a;
    }
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) {
        const double pad = lo == 0.0 ? 1.0 : 0.1 * std::abs(lo);
        lo -= pad;
        hi += pad;
    } else {
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    a.lo = lo;
    a.hi = hi;
    return a;
}

std::vector<double> ticks(const Axis& a) {
    std::vector<double> out;
    if (a.log) {
        const int step = std::max(1, static_cast<int>(std::ceil((a.hi - a.lo) / 8.0)));
        for (int e = static_cast<int>(a.lo); e <= static_cast<int>(a.hi); e += step)
            out.push_back(std::pow(10.0, e));
        return out;
    }
    const double raw = (a.hi - a.lo) / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    for (double t = std::ceil(a.lo / step) * step; t <= a.hi + 1e-9 * step; t += step)
        out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    return out;
}

void render_panel(std::string& out, const PlotPanel& p, double ox, double oy) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    auto extend = [&](double x, double y) {
        if (std::isfinite(x) && (!p.log_x || x > 0.0)) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
        }
        if (std::isfinite(y) && (!p.log_y || y > 0.0)) {
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    };
    for (const auto& s : p.series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) extend(s.x[i], s.y[i]);
    if (p.frame) {
        extend((*p.frame)[0], (*p.frame)[2]);
        extend((*p.frame)[1], (*p.frame)[3]);
    }
    const Axis ax = make_axis(p.log_x, xmin, xmax);
    const Axis ay = make_axis(p.log_y, ymin, ymax);

    const double px0 = ox + kLeft, px1 = ox + kPanelWidth - kRight;
    const double py0 = oy + kTop, py1 = oy + kPanelHeight - kBottom;
    auto X = [&](double v) { return px0 + (ax.transform(v) - ax.lo) / (ax.hi - ax.lo) * (px1 - px0); };
    auto Y = [&](double v) { return py1 - (ay.transform(v) - ay.lo) / (ay.hi - ay.lo) * (py1 - py0); };

    out += "<g>\n";
    out += "<text x=\"" + fmt((px0 + px1) / 2) + "\" y=\"" + fmt(oy + 22) +
           "\" text-anchor=\"middle\" font-size=\"14\">" + escape(p.title) + "</text>\n";
    for (double t : ticks(ax)) {
        const double x = X(t);
        if (x < px0 - 0.5 || x > px1 + 0.5) continue;
        out += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(py0) + "\" x2=\"" + fmt(x) + "\" y2=\"" +
               fmt(py1) + "\" stroke=\"#e0e0e0\"/>\n";
        out += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(py1 + 16) +
               "\" text-anchor=\"middle\" font-size=\"11\">" + tick_label(t) + "</text>\n";
    }
    for (double t : ticks(ay)) {
        const double y = Y(t);
        if (y < py0 - 0.5 || y > py1 + 0.5) continue;
        out += "<line x1=\"" + fmt(px0) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(px1) + "\" y2=\"" +
               fmt(y) + "\" stroke=\"#e0e0e0\"/>\n";
        out += "<text x=\"" + fmt(px0 - 6) + "\" y=\"" + fmt(y + 4) +
               "\" text-anchor=\"end\" font-size=\"11\">" + tick_label(t) + "</text>\n";
    }
    out += "<rect x=\"" + fmt(px0) + "\" y=\"" + fmt(py0) + "\" width=\"" + fmt(px1 - px0) +
           "\" height=\"" + fmt(py1 - py0) + "\" fill=\"none\" stroke=\"#333\"/>\n";
    out += "<text x=\"" + fmt((px0 + px1) / 2) + "\" y=\"" + fmt(py1 + 38) +
           "\" text-anchor=\"middle\" font-size=\"12\">" + escape(p.x_label) + "</text>\n";
    out += "<text transform=\"translate(" + fmt(ox + 18) + "," + fmt((py0 + py1) / 2) +
           ") rotate(-90)\" text-anchor=\"middle\" font-size=\"12\">" + escape(p.y_label) +
           "</text>\n";

    out += "<svg x=\"" + fmt(px0) + "\" y=\"" + fmt(py0) + "\" width=\"" + fmt(px1 - px0) +
           "\" height=\"" + fmt(py1 - py0) + "\" viewBox=\"" + fmt(px0) + " " + fmt(py0) + " " +
           fmt(px1 - px0) + " " + fmt(py1 - py0) + "\" overflow=\"hidden\">\n";
    if (p.frame) {
        const auto& f = *p.frame;
        out += "<rect x=\"" + fmt(X(f[0])) + "\" y=\"" + fmt(Y(f[3])) + "\" width=\"" +
               fmt(X(f[1]) - X(f[0])) + "\" height=\"" + fmt(Y(f[2]) - Y(f[3])) +
               "\" fill=\"none\" stroke=\"#2ca02c\" stroke-dasharray=\"4 3\"/>\n";
    }
    if (p.marker_x && ax.usable(*p.marker_x)) {
        const double x = X(*p.marker_x);
        out += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(py0) + "\" x2=\"" + fmt(x) + "\" y2=\"" +
               fmt(py1) + "\" stroke=\"#777\" stroke-dasharray=\"2 3\"/>\n";
    }
    for (const auto& s : p.series) {
        std::string pts;
        const std::size_t n = std::min(s.x.size(), s.y.size());
        auto flush_line = [&](const char* dash) {
            if (pts.empty()) return;
            out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.4\"" +
                   dash + " points=\"" + pts + "\"/>\n";
            pts.clear();
        };
        for (std::size_t i = 0; i < n; ++i) {
            const bool ok = ax.usable(s.x[i]) && ay.usable(s.y[i]);
            if (s.style == PlotSeries::Style::Markers) {
                if (ok)
                    out += "<circle cx=\"" + fmt(X(s.x[i])) + "\" cy=\"" + fmt(Y(s.y[i])) +
                           "\" r=\"" + fmt(s.marker_radius) + "\" fill=\"" + s.color + "\"/>\n";
                continue;
            }
            if (!ok) {
                if (s.style != PlotSeries::Style::Polygon)
                    flush_line(s.style == PlotSeries::Style::Dashed ? " stroke-dasharray=\"5 3\"" : "");
                continue;
            }
            if (!pts.empty()) pts += ' ';
            pts += fmt(X(s.x[i])) + "," + fmt(Y(s.y[i]));
        }
        if (s.style == PlotSeries::Style::Polygon) {
            if (!pts.empty())
                out += "<polygon fill=\"" + s.color + "\" fill-opacity=\"0.15\" stroke=\"" +
                       s.color + "\" stroke-width=\"1.4\" points=\"" + pts + "\"/>\n";
        } else if (s.style != PlotSeries::Style::Markers) {
            flush_line(s.style == PlotSeries::Style::Dashed ? " stroke-dasharray=\"5 3\"" : "");
        }
    }
    out += "</svg>\n";

    double ly = py0 + 14;
    for (const auto& s : p.series) {
        if (s.label.empty()) continue;
        const double lx = px1 - 130;
        out += "<rect x=\"" + fmt(lx) + "\" y=\"" + fmt(ly - 8) +
               "\" width=\"12\" height=\"8\" fill=\"" + s.color + "\"/>\n";
        out += "<text x=\"" + fmt(lx + 16) + "\" y=\"" + fmt(ly) + "\" font-size=\"11\">" +
               escape(s.label) + "</text>\n";
        ly += 14;
    }
    out += "</g>\n";
}

}  // namespace

const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    return colors[i % (sizeof colors / sizeof colors[0])];
}

std::string render_svg(const std::vector<PlotPanel>& panels, const std::string& title,
                       const std::string& comment) {
    const double width = kPanelWidth * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
    const double height = kPanelHeight + kTitleHeight;
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<!--\n";
    std::string safe = comment;
    for (std::size_t pos; (pos = safe.find("--")) != std::string::npos;) safe.replace(pos, 2, "- -");
    out += safe;
    if (!safe.empty() && safe.back() != '\n') out += '\n';
    out += "-->\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" +
           fmt(height) + "\" viewBox=\"0 0 " + fmt(width) + " " + fmt(height) +
           "\" font-family=\"sans-serif\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + fmt(width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"16\">" +
           escape(title) + "</text>\n";
    for (std::size_t i = 0; i < panels.size(); ++i)
        render_panel(out, panels[i], kPanelWidth * static_cast<double>(i), kTitleHeight);
    out += "</svg>\n";
    return out;
}

}  // namespace smpcval
