#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace histoprism {

struct PlotSeries {
  std::string label;
  std::string color;
  std::vector<double> x, y;
};

struct PlotPanel {
  std::string title;
  std::string x_label, y_label;
  std::vector<PlotSeries> series;
  bool log_x = false;
  bool log_y = false;
};

/// Side-by-side line/marker panels as a standalone SVG document.
void write_svg_panels(std::ostream& out, const std::vector<PlotPanel>& panels);

}  // namespace histoprism
