#pragma once

// Minimal SVG emission for the experiment harness: multi-series line
// plots (learning curves) and paired bars with error whiskers (MVR
// summaries). Presentation only; every number also lands in CSV.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace rtcsp {

struct SvgSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

namespace detail {

inline std::string fnum(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string fshort(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf"};
    return colors[i % 7];
}

} // namespace detail

inline std::string svg_line_plot(const std::string& title, const std::string& x_label,
                                 const std::string& y_label,
                                 const std::vector<SvgSeries>& series) {
    const double width = 720, height = 480;
    const double ml = 70, mr = 160, mt = 50, mb = 60;
    double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_min = std::min(y_min, s.y[i]);
            y_max = std::max(y_max, s.y[i]);
        }
    if (!(x_max > x_min)) x_max = x_min + 1.0;
    if (!(y_max > y_min)) y_max = y_min + 1.0;
    const double y_pad = 0.05 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;
    auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr); };
    auto py = [&](double y) {
        return height - mb - (y - y_min) / (y_max - y_min) * (height - mt - mb);
    };

    std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='" + detail::fnum(width)
                      + "' height='" + detail::fnum(height) + "'>\n"
                      + "<rect width='100%' height='100%' fill='white'/>\n"
                      + "<text x='" + detail::fnum(width / 2) + "' y='28' font-size='16' "
                        "text-anchor='middle'>" + title + "</text>\n";
    // axes
    svg += "<line x1='" + detail::fnum(ml) + "' y1='" + detail::fnum(height - mb) + "' x2='"
           + detail::fnum(width - mr) + "' y2='" + detail::fnum(height - mb)
           + "' stroke='black'/>\n";
    svg += "<line x1='" + detail::fnum(ml) + "' y1='" + detail::fnum(mt) + "' x2='"
           + detail::fnum(ml) + "' y2='" + detail::fnum(height - mb) + "' stroke='black'/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double xv = x_min + k * (x_max - x_min) / 5;
        const double yv = y_min + k * (y_max - y_min) / 5;
        svg += "<text x='" + detail::fnum(px(xv)) + "' y='" + detail::fnum(height - mb + 18)
               + "' font-size='11' text-anchor='middle'>" + detail::fshort(xv) + "</text>\n";
        svg += "<text x='" + detail::fnum(ml - 8) + "' y='" + detail::fnum(py(yv) + 4)
               + "' font-size='11' text-anchor='end'>" + detail::fshort(yv) + "</text>\n";
        svg += "<line x1='" + detail::fnum(ml) + "' y1='" + detail::fnum(py(yv)) + "' x2='"
               + detail::fnum(width - mr) + "' y2='" + detail::fnum(py(yv))
               + "' stroke='#dddddd'/>\n";
    }
    svg += "<text x='" + detail::fnum((width - mr + ml) / 2) + "' y='"
           + detail::fnum(height - 16) + "' font-size='13' text-anchor='middle'>" + x_label
           + "</text>\n";
    svg += "<text x='18' y='" + detail::fnum(height / 2)
           + "' font-size='13' text-anchor='middle' transform='rotate(-90 18 "
           + detail::fnum(height / 2) + ")'>" + y_label + "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        std::string points;
        for (std::size_t i = 0; i < series[s].x.size(); ++i)
            points += detail::fnum(px(series[s].x[i])) + "," + detail::fnum(py(series[s].y[i]))
                      + " ";
        svg += "<polyline fill='none' stroke='" + std::string(detail::palette(s))
               + "' stroke-width='2' points='" + points + "'/>\n";
        const double ly = mt + 18.0 * static_cast<double>(s);
        svg += "<line x1='" + detail::fnum(width - mr + 10) + "' y1='" + detail::fnum(ly)
               + "' x2='" + detail::fnum(width - mr + 34) + "' y2='" + detail::fnum(ly)
               + "' stroke='" + detail::palette(s) + "' stroke-width='2'/>\n";
        svg += "<text x='" + detail::fnum(width - mr + 40) + "' y='" + detail::fnum(ly + 4)
               + "' font-size='12'>" + series[s].label + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

struct SvgBarGroup {
    std::string label;            // x-axis group label
    std::vector<double> values;   // one bar per arm
    std::vector<double> errors;   // whisker half-lengths, same size
};

inline std::string svg_bar_plot(const std::string& title, const std::string& y_label,
                                const std::vector<std::string>& arm_names,
                                const std::vector<SvgBarGroup>& groups) {
    const double width = 720, height = 480;
    const double ml = 70, mr = 150, mt = 50, mb = 60;
    double y_max = 0.0;
    for (const auto& g : groups)
        for (std::size_t a = 0; a < g.values.size(); ++a)
            y_max = std::max(y_max, g.values[a] + (a < g.errors.size() ? g.errors[a] : 0.0));
    if (y_max <= 0.0) y_max = 1.0;
    y_max *= 1.08;
    auto py = [&](double y) { return height - mb - y / y_max * (height - mt - mb); };

    std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='" + detail::fnum(width)
                      + "' height='" + detail::fnum(height) + "'>\n"
                      + "<rect width='100%' height='100%' fill='white'/>\n"
                      + "<text x='" + detail::fnum(width / 2) + "' y='28' font-size='16' "
                        "text-anchor='middle'>" + title + "</text>\n";
    svg += "<line x1='" + detail::fnum(ml) + "' y1='" + detail::fnum(height - mb) + "' x2='"
           + detail::fnum(width - mr) + "' y2='" + detail::fnum(height - mb)
           + "' stroke='black'/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double yv = k * y_max / 5;
        svg += "<text x='" + detail::fnum(ml - 8) + "' y='" + detail::fnum(py(yv) + 4)
               + "' font-size='11' text-anchor='end'>" + detail::fshort(yv) + "</text>\n";
        svg += "<line x1='" + detail::fnum(ml) + "' y1='" + detail::fnum(py(yv)) + "' x2='"
               + detail::fnum(width - mr) + "' y2='" + detail::fnum(py(yv))
               + "' stroke='#dddddd'/>\n";
    }
    svg += "<text x='18' y='" + detail::fnum(height / 2)
           + "' font-size='13' text-anchor='middle' transform='rotate(-90 18 "
           + detail::fnum(height / 2) + ")'>" + y_label + "</text>\n";

    const double group_w = (width - ml - mr) / std::max<std::size_t>(1, groups.size());
    const std::size_t arms = arm_names.size();
    const double bar_w = group_w / (arms + 1.0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double gx = ml + group_w * g + bar_w / 2;
        for (std::size_t a = 0; a < groups[g].values.size() && a < arms; ++a) {
            const double x = gx + a * bar_w;
            const double v = groups[g].values[a];
            svg += "<rect x='" + detail::fnum(x) + "' y='" + detail::fnum(py(v)) + "' width='"
                   + detail::fnum(bar_w * 0.9) + "' height='"
                   + detail::fnum(py(0.0) - py(v)) + "' fill='" + detail::palette(a)
                   + "'/>\n";
            if (a < groups[g].errors.size() && groups[g].errors[a] > 0.0) {
                const double cx = x + bar_w * 0.45;
                svg += "<line x1='" + detail::fnum(cx) + "' y1='"
                       + detail::fnum(py(v - groups[g].errors[a])) + "' x2='"
                       + detail::fnum(cx) + "' y2='"
                       + detail::fnum(py(v + groups[g].errors[a]))
                       + "' stroke='black' stroke-width='1.5'/>\n";
            }
        }
        svg += "<text x='" + detail::fnum(gx + bar_w * arms / 2) + "' y='"
               + detail::fnum(height - mb + 18) + "' font-size='11' text-anchor='middle'>"
               + groups[g].label + "</text>\n";
    }
    for (std::size_t a = 0; a < arms; ++a) {
        const double ly = mt + 18.0 * static_cast<double>(a);
        svg += "<rect x='" + detail::fnum(width - mr + 10) + "' y='" + detail::fnum(ly - 8)
               + "' width='14' height='11' fill='" + detail::palette(a) + "'/>\n";
        svg += "<text x='" + detail::fnum(width - mr + 30) + "' y='" + detail::fnum(ly + 2)
               + "' font-size='12'>" + arm_names[a] + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace rtcsp
