#include "wbc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "wbc/fsio.hpp"

namespace wbc::svg {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 440;
constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 24;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 48;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

/// Round-ish tick spacing covering [lo, hi] with about `want` intervals.
std::vector<double> ticks(double lo, double hi, int want) {
    const double span = hi - lo;
    if (span <= 0) return {lo};
    const double raw = span / want;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (mag * m >= raw) {
            step = mag * m;
            break;
        }
    }
    std::vector<double> out;
    double t = std::ceil(lo / step) * step;
    for (; t <= hi + step * 1e-9; t += step) out.push_back(t);
    return out;
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series) {
    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    bool any = false;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw std::invalid_argument("line_chart: series x/y length mismatch");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_min = std::min(y_min, s.y[i]);
            y_max = std::max(y_max, s.y[i]);
            any = true;
        }
    }
    if (!any) {
        x_min = 0;
        x_max = 1;
        y_min = 0;
        y_max = 1;
    }
    if (x_max == x_min) x_max = x_min + 1;
    if (y_max == y_min) y_max = y_min + 1;
    // a little headroom on y
    const double pad = (y_max - y_min) * 0.05;
    y_min -= pad;
    y_max += pad;

    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    auto px = [&](double x) { return kMarginLeft + (x - x_min) / (x_max - x_min) * plot_w; };
    auto py = [&](double y) { return kMarginTop + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"15\" font-weight=\"bold\">"
        << escape(title) << "</text>\n";

    // axes
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
        << "\" y2=\"" << kHeight - kMarginBottom << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kHeight - kMarginBottom << "\" x2=\""
        << kWidth - kMarginRight << "\" y2=\"" << kHeight - kMarginBottom << "\" stroke=\"black\"/>\n";

    for (double t : ticks(x_min, x_max, 8)) {
        const double x = px(t);
        out << "<line x1=\"" << fmt(x) << "\" y1=\"" << kHeight - kMarginBottom << "\" x2=\"" << fmt(x)
            << "\" y2=\"" << kHeight - kMarginBottom + 4 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << fmt(x) << "\" y=\"" << kHeight - kMarginBottom + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(t)
            << "</text>\n";
    }
    for (double t : ticks(y_min, y_max, 6)) {
        const double y = py(t);
        out << "<line x1=\"" << kMarginLeft - 4 << "\" y1=\"" << fmt(y) << "\" x2=\"" << kMarginLeft
            << "\" y2=\"" << fmt(y) << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << fmt(y) << "\" x2=\"" << kWidth - kMarginRight
            << "\" y2=\"" << fmt(y) << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << fmt(y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(t)
            << "</text>\n";
    }

    out << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(x_label)
        << "</text>\n";
    out << "<text x=\"16\" y=\"" << kMarginTop + plot_h / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
        << kMarginTop + plot_h / 2 << ")\">" << escape(y_label) << "</text>\n";

    for (const auto& s : series) {
        if (s.x.empty()) continue;
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) out << ' ';
            out << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i]));
        }
        out << "\"/>\n";
    }

    // legend
    double ly = kMarginTop + 8;
    for (const auto& s : series) {
        out << "<line x1=\"" << kMarginLeft + 10 << "\" y1=\"" << fmt(ly) << "\" x2=\"" << kMarginLeft + 34
            << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << kMarginLeft + 40 << "\" y=\"" << fmt(ly + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(s.label) << "</text>\n";
        ly += 16;
    }

    out << "</svg>\n";
    return out.str();
}

void write_line_chart(const std::string& path, const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<Series>& series) {
    io::write_file_atomic(path, line_chart(title, x_label, y_label, series));
}

}  // namespace wbc::svg
