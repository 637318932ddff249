#pragma once

#include <string>
#include <vector>

namespace wbc::svg {

struct Series {
    std::string label;
    std::string color;  // any SVG color string
    std::vector<double> x;
    std::vector<double> y;
};

/// Self-contained SVG line chart: axes, tick labels, legend, one polyline
/// per series. Returns the SVG document text.
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series);

/// line_chart + atomic file write.
void write_line_chart(const std::string& path, const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<Series>& series);

}  // namespace wbc::svg
