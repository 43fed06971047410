#pragma once

// Static SVG line charts of cumulative regret and a markdown table of fits.

#include "lcb/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace lcb {

struct ReportSeries {
    std::string label;
    Summary summary;
    std::vector<FitReport> fits;
};

enum class AxisScale { Linear, Log };

namespace detail {

struct Axis {
    AxisScale scale;
    double lo;
    double hi;

    double map(double v) const { return scale == AxisScale::Log ? std::log10(v) : v; }
    double frac(double v) const { return hi > lo ? (map(v) - lo) / (hi - lo) : 0.5; }
};

inline Axis make_axis(AxisScale scale, double vmin, double vmax) {
    if (scale == AxisScale::Log) {
        const double lo = std::floor(std::log10(vmin));
        double hi = std::ceil(std::log10(vmax));
        if (hi <= lo) hi = lo + 1.0;
        return {scale, lo, hi};
    }
    double lo = std::min(0.0, vmin);
    double hi = vmax;
    if (hi <= lo) hi = lo + 1.0;
    return {scale, lo, hi};
}

inline std::vector<double> ticks(const Axis& a) {
    std::vector<double> out;
    if (a.scale == AxisScale::Log) {
        for (double e = a.lo; e <= a.hi + 1e-9; e += 1.0) out.push_back(std::pow(10.0, e));
        return out;
    }
    const double span = a.hi - a.lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    for (double v = std::ceil(a.lo / step) * step; v <= a.hi + 1e-9 * span; v += step) out.push_back(v);
    return out;
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline const char* palette_color(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
    return colors[i % (sizeof colors / sizeof colors[0])];
}

}  // namespace detail

/// Cumulative regret against t. Non-positive values are dropped on a log axis.
inline std::string render_svg(const std::vector<ReportSeries>& series, AxisScale xscale, AxisScale yscale) {
    const double W = 800, H = 500, left = 80, right = 200, top = 40, bottom = 60;
    const double pw = W - left - right, ph = H - top - bottom;

    auto usable = [&](long t, double y) { return t >= 1 && (yscale == AxisScale::Linear || y > 0.0); };
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.summary.rounds.size(); ++i) {
            if (!usable(s.summary.rounds[i], s.summary.mean[i])) continue;
            xmin = std::min(xmin, static_cast<double>(s.summary.rounds[i]));
            xmax = std::max(xmax, static_cast<double>(s.summary.rounds[i]));
            ymin = std::min(ymin, s.summary.mean[i]);
            ymax = std::max(ymax, s.summary.mean[i]);
        }
    if (!std::isfinite(xmin)) {
        xmin = 1;
        xmax = 10;
        ymin = 1;
        ymax = 10;
    }
    const detail::Axis ax = detail::make_axis(xscale, xmin, xmax);
    const detail::Axis ay = detail::make_axis(yscale, ymin, ymax);
    auto px = [&](double v) { return left + ax.frac(v) * pw; };
    auto py = [&](double v) { return top + (1.0 - ay.frac(v)) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">cumulative regret ("
       << (xscale == AxisScale::Log ? "log" : "linear") << " t, " << (yscale == AxisScale::Log ? "log" : "linear")
       << " regret)</text>\n";
    for (double t : detail::ticks(ax)) {
        const double x = px(t);
        os << "<line x1=\"" << x << "\" y1=\"" << top << "\" x2=\"" << x << "\" y2=\"" << top + ph
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << x << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << detail::num(t)
           << "</text>\n";
    }
    for (double v : detail::ticks(ay)) {
        const double y = py(v);
        os << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + pw << "\" y2=\"" << y
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << detail::num(v)
           << "</text>\n";
    }
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">t</text>\n";
    os << "<text x=\"20\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
       << top + ph / 2 << ")\">cum_regret</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        os << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << detail::palette_color(k) << "\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.summary.rounds.size(); ++i) {
            if (!usable(s.summary.rounds[i], s.summary.mean[i])) continue;
            if (!first) os << ' ';
            os << px(static_cast<double>(s.summary.rounds[i])) << ',' << py(s.summary.mean[i]);
            first = false;
        }
        os << "\"/>\n";
        const double ly = top + 10 + 20.0 * static_cast<double>(k);
        os << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 40 << "\" y2=\"" << ly
           << "\" stroke-width=\"2\" stroke=\"" << detail::palette_color(k) << "\"/>\n";
        os << "<text x=\"" << left + pw + 46 << "\" y=\"" << ly + 4 << "\">" << s.label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline std::string fits_markdown(const std::vector<ReportSeries>& series) {
    std::ostringstream os;
    os << "| series | model | coefficient | intercept | R^2 |\n";
    os << "|---|---|---|---|---|\n";
    for (const auto& s : series)
        for (const auto& f : s.fits)
            os << "| " << s.label << " | " << f.model << " | " << format_double(f.coefficient) << " | "
               << format_double(f.intercept) << " | " << format_double(f.r2) << " |\n";
    return os.str();
}

}  // namespace lcb
