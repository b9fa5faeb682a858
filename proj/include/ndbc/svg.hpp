#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "ndbc/error.hpp"

namespace ndbc {

struct Series {
    std::string label;
    std::vector<double> t;
    std::vector<double> y;
};

struct PlotStyle {
    std::string title;
    std::string x_label = "t";
    std::string y_label;
    bool log_y = false;
    int width = 640;
    int height = 400;
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string svg_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

/// Standalone SVG line chart: axes with five ticks each, one polyline per series.
/// Output depends only on the input, byte for byte.
inline std::string emit_svg(const std::vector<Series>& series, const PlotStyle& style = {}) {
    require(!series.empty(), ErrorCode::EmptySeries, "no series to plot");
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const auto& s : series) {
        require(s.t.size() == s.y.size(), ErrorCode::InvalidArgument, "series '" + s.label + "' has t/y length mismatch");
        require(s.t.size() >= 2, ErrorCode::EmptySeries, "series '" + s.label + "' needs at least two points");
        for (std::size_t i = 0; i < s.t.size(); ++i) {
            require(std::isfinite(s.t[i]) && std::isfinite(s.y[i]), ErrorCode::InvalidArgument,
                    "series '" + s.label + "' has non-finite values");
            require(!style.log_y || s.y[i] > 0.0, ErrorCode::NonPositiveData,
                    "log-scale plot needs positive values in '" + s.label + "'");
            const double y = style.log_y ? std::log10(s.y[i]) : s.y[i];
            x_lo = std::min(x_lo, s.t[i]);
            x_hi = std::max(x_hi, s.t[i]);
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    }
    if (x_hi == x_lo) x_hi = x_lo + 1.0;
    if (y_hi == y_lo) {
        y_lo -= 0.5;
        y_hi += 0.5;
    }

    const double left = 70, right = 20, top = 40, bottom = 50;
    const double pw = style.width - left - right;
    const double ph = style.height - top - bottom;
    auto px = [&](double t) { return left + (t - x_lo) / (x_hi - x_lo) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };
    using detail::svg_num;

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(style.width) + "\" height=\"" +
           std::to_string(style.height) + "\" viewBox=\"0 0 " + std::to_string(style.width) + " " +
           std::to_string(style.height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!style.title.empty()) {
        out += "<text x=\"" + svg_num(style.width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
               detail::xml_escape(style.title) + "</text>\n";
    }
    out += "<g stroke=\"black\" stroke-width=\"1\">\n";
    out += "<line x1=\"" + svg_num(left) + "\" y1=\"" + svg_num(top + ph) + "\" x2=\"" + svg_num(left + pw) + "\" y2=\"" +
           svg_num(top + ph) + "\"/>\n";
    out += "<line x1=\"" + svg_num(left) + "\" y1=\"" + svg_num(top) + "\" x2=\"" + svg_num(left) + "\" y2=\"" +
           svg_num(top + ph) + "\"/>\n";
    out += "</g>\n<g font-family=\"sans-serif\" font-size=\"10\">\n";
    for (int i = 0; i <= 4; ++i) {
        const double tx = x_lo + (x_hi - x_lo) * i / 4.0;
        const double ty = y_lo + (y_hi - y_lo) * i / 4.0;
        out += "<text x=\"" + svg_num(px(tx)) + "\" y=\"" + svg_num(top + ph + 15) + "\" text-anchor=\"middle\">" +
               detail::svg_tick(tx) + "</text>\n";
        const std::string ylab = detail::svg_tick(style.log_y ? std::pow(10.0, ty) : ty);
        out += "<text x=\"" + svg_num(left - 6) + "\" y=\"" + svg_num(py(ty) + 3) + "\" text-anchor=\"end\">" + ylab +
               "</text>\n";
    }
    out += "<text x=\"" + svg_num(left + pw / 2) + "\" y=\"" + svg_num(style.height - 12.0) +
           "\" text-anchor=\"middle\">" + detail::xml_escape(style.x_label) + "</text>\n";
    if (!style.y_label.empty()) {
        out += "<text x=\"14\" y=\"" + svg_num(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
               svg_num(top + ph / 2) + ")\">" + detail::xml_escape(style.y_label + (style.log_y ? " (log)" : "")) +
               "</text>\n";
    }
    out += "</g>\n";

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        out += "<polyline fill=\"none\" stroke=\"" + std::string(palette[k % 6]) + "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.t.size(); ++i) {
            const double y = style.log_y ? std::log10(s.y[i]) : s.y[i];
            if (i) out += ' ';
            out += svg_num(px(s.t[i])) + "," + svg_num(py(y));
        }
        out += "\"/>\n";
        if (!s.label.empty()) {
            out += "<text x=\"" + svg_num(left + pw - 4) + "\" y=\"" + svg_num(top + 14.0 + 14.0 * static_cast<double>(k)) +
                   "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + palette[k % 6] + "\">" +
                   detail::xml_escape(s.label) + "</text>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

}  // namespace ndbc
