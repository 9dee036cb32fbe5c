#pragma once

#include <string>
#include <vector>

// Minimal dependency-free SVG charts for quick inspection of runs.

namespace sfield {

struct Series {
  std::string label;
  std::vector<double> y;
};

// Polyline chart; all series share the x axis.
void write_timeseries_svg(const std::string& path, const std::string& title,
                          const std::vector<double>& x,
                          const std::vector<Series>& series,
                          const std::string& y_label = "");

// Labeled horizontal bars (e.g. timing comparisons).
void write_bars_svg(const std::string& path, const std::string& title,
                    const std::vector<std::string>& labels,
                    const std::vector<double>& values);

}  // namespace sfield
