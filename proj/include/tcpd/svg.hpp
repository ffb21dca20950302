#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "tcpd/detector.hpp"

namespace tcpd {

/// Static SVG of the ratio series: the T curve, the tau threshold line,
/// kept/pruned candidate intervals shaded, and a marker per estimated
/// location. Large spikes are clipped at the view ceiling so the sub-tau
/// structure stays readable.
inline void write_detection_svg(std::ostream& os, const Detection& det, int width = 960, int height = 360) {
    const RatioSeries& s = det.series;
    const long long len = s.len();
    const double margin_l = 50, margin_r = 15, margin_t = 20, margin_b = 40;
    const double plot_w = width - margin_l - margin_r;
    const double plot_h = height - margin_t - margin_b;
    double y_max = 0.0;
    for (long long i = 1; i <= len; ++i) y_max = std::max(y_max, s.at(i));
    y_max = std::min(y_max, 3.0);
    y_max = std::max(y_max, 1.2);

    auto xpos = [&](double i) { return margin_l + (i - 1.0) / std::max(1.0, static_cast<double>(len - 1)) * plot_w; };
    auto ypos = [&](double v) { return margin_t + (1.0 - std::min(v, y_max) / y_max) * plot_h; };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

    // candidate intervals
    for (const auto& iv : det.intervals) {
        const double x0 = xpos(static_cast<double>(std::max(iv.m, 1LL)));
        const double x1 = xpos(static_cast<double>(std::min(iv.M, len)));
        os << "  <rect class=\"" << (iv.pruned ? "interval-pruned" : "interval-kept") << "\" x=\"" << x0
           << "\" y=\"" << margin_t << "\" width=\"" << std::max(1.0, x1 - x0) << "\" height=\"" << plot_h
           << "\" fill=\"" << (iv.pruned ? "#f4c7c3" : "#cfe8cf") << "\" opacity=\"0.5\"/>\n";
    }

    // axes
    os << "  <line class=\"axis\" x1=\"" << margin_l << "\" y1=\"" << margin_t + plot_h << "\" x2=\""
       << margin_l + plot_w << "\" y2=\"" << margin_t + plot_h << "\" stroke=\"black\"/>\n";
    os << "  <line class=\"axis\" x1=\"" << margin_l << "\" y1=\"" << margin_t << "\" x2=\"" << margin_l
       << "\" y2=\"" << margin_t + plot_h << "\" stroke=\"black\"/>\n";

    // tau threshold
    os << "  <line class=\"tau\" x1=\"" << margin_l << "\" y1=\"" << ypos(det.tau) << "\" x2=\""
       << margin_l + plot_w << "\" y2=\"" << ypos(det.tau)
       << "\" stroke=\"#c00\" stroke-dasharray=\"6,4\"/>\n";

    // T curve
    os << "  <polyline class=\"t-curve\" fill=\"none\" stroke=\"#246\" stroke-width=\"1\" points=\"";
    for (long long i = 1; i <= len; ++i) {
        os << xpos(static_cast<double>(i)) << "," << ypos(s.at(i));
        if (i < len) os << " ";
    }
    os << "\"/>\n";

    // estimated locations (location axis is i + 2*alpha - 1; map back to i)
    for (long long z : det.locations) {
        const double i = static_cast<double>(z - 2LL * det.alpha + 1);
        const double x = xpos(std::clamp(i, 1.0, static_cast<double>(len)));
        os << "  <line class=\"cp-marker\" x1=\"" << x << "\" y1=\"" << margin_t << "\" x2=\"" << x
           << "\" y2=\"" << margin_t + plot_h << "\" stroke=\"#333\" stroke-width=\"1\" opacity=\"0.8\"/>\n";
        os << "  <circle class=\"cp-dot\" cx=\"" << x << "\" cy=\"" << margin_t << "\" r=\"3\" fill=\"#333\"/>\n";
    }

    // labels
    os << "  <text x=\"" << margin_l << "\" y=\"" << height - 10 << "\" font-size=\"12\">i = 1</text>\n";
    os << "  <text x=\"" << margin_l + plot_w - 80 << "\" y=\"" << height - 10 << "\" font-size=\"12\">i = "
       << len << "</text>\n";
    os << "  <text x=\"5\" y=\"" << ypos(det.tau) + 4 << "\" font-size=\"12\" fill=\"#c00\">tau=" << det.tau
       << "</text>\n";
    os << "  <text x=\"5\" y=\"" << margin_t + 4 << "\" font-size=\"12\">" << (det.mode == DetectMode::sfd ? "T_n" : "T_n^v")
       << "</text>\n";
    os << "</svg>\n";
}

inline void write_detection_svg(const std::string& path, const Detection& det, int width = 960,
                                int height = 360) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_detection_svg(os, det, width, height);
    if (!os) throw std::runtime_error("SVG write failed: " + path);
}

}  // namespace tcpd
