#include "sfield/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sfield {

namespace {

constexpr int kWidth = 960, kHeight = 480;
constexpr int kMarginL = 70, kMarginR = 150, kMarginT = 40, kMarginB = 45;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                          "#bcbd22", "#17becf"};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(5);
  os << v;
  return os.str();
}

}  // namespace

void write_timeseries_svg(const std::string& path, const std::string& title,
                          const std::vector<double>& x,
                          const std::vector<Series>& series,
                          const std::string& y_label) {
  if (x.empty() || series.empty()) throw std::invalid_argument("empty chart data");
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  for (const auto& s : series)
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (!(ymax > ymin)) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  const double xmin = x.front(), xmax = x.back() > x.front() ? x.back() : x.front() + 1.0;

  const double pw = kWidth - kMarginL - kMarginR;
  const double ph = kHeight - kMarginT - kMarginB;
  auto px = [&](double v) { return kMarginL + pw * (v - xmin) / (xmax - xmin); };
  auto py = [&](double v) { return kMarginT + ph * (1.0 - (v - ymin) / (ymax - ymin)); };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth
      << "' height='" << kHeight << "' font-family='sans-serif' font-size='12'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << kWidth / 2 << "' y='22' text-anchor='middle' font-size='15'>"
      << title << "</text>\n";

  // axes and gridlines
  for (int i = 0; i <= 5; ++i) {
    const double v = ymin + (ymax - ymin) * i / 5.0;
    const double yy = py(v);
    out << "<line x1='" << kMarginL << "' y1='" << yy << "' x2='"
        << kWidth - kMarginR << "' y2='" << yy
        << "' stroke='#ddd'/>\n<text x='" << kMarginL - 6 << "' y='" << yy + 4
        << "' text-anchor='end'>" << fmt(v) << "</text>\n";
  }
  for (int i = 0; i <= 6; ++i) {
    const double v = xmin + (xmax - xmin) * i / 6.0;
    out << "<text x='" << px(v) << "' y='" << kHeight - kMarginB + 18
        << "' text-anchor='middle'>" << fmt(v) << "</text>\n";
  }
  if (!y_label.empty())
    out << "<text x='16' y='" << kMarginT + ph / 2
        << "' transform='rotate(-90 16 " << kMarginT + ph / 2
        << ")' text-anchor='middle'>" << y_label << "</text>\n";

  const std::size_t stride = std::max<std::size_t>(1, x.size() / 2000);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % 10];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.2' points='";
    for (std::size_t i = 0; i < x.size(); i += stride)
      out << px(x[i]) << ',' << py(series[s].y[i]) << ' ';
    out << "'/>\n<text x='" << kWidth - kMarginR + 12 << "' y='"
        << kMarginT + 16 * (s + 1) << "' fill='" << color << "'>"
        << series[s].label << "</text>\n";
  }
  out << "</svg>\n";
}

void write_bars_svg(const std::string& path, const std::string& title,
                    const std::vector<std::string>& labels,
                    const std::vector<double>& values) {
  if (labels.size() != values.size() || labels.empty())
    throw std::invalid_argument("bad bar chart data");
  const double vmax = std::max(*std::max_element(values.begin(), values.end()), 1e-300);
  const int row_h = 34;
  const int height = kMarginT + row_h * static_cast<int>(labels.size()) + 20;
  const double pw = kWidth - kMarginL - kMarginR;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth
      << "' height='" << height << "' font-family='sans-serif' font-size='12'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << kWidth / 2 << "' y='22' text-anchor='middle' font-size='15'>"
      << title << "</text>\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = kMarginT + row_h * static_cast<int>(i);
    const double w = pw * values[i] / vmax;
    out << "<rect x='" << kMarginL << "' y='" << y << "' width='" << w
        << "' height='22' fill='" << kPalette[i % 10] << "'/>\n"
        << "<text x='" << kMarginL - 6 << "' y='" << y + 15
        << "' text-anchor='end'>" << labels[i] << "</text>\n"
        << "<text x='" << kMarginL + w + 6 << "' y='" << y + 15 << "'>"
        << fmt(values[i]) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace sfield
