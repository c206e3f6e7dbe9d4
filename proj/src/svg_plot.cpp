#include "histoprism/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace histoprism {

namespace {

constexpr double kPanelW = 360, kPanelH = 300;
constexpr double kMarginL = 58, kMarginR = 16, kMarginT = 34, kMarginB = 44;

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!(hi > lo)) {
      lo -= 1.0;
      hi += 1.0;
    } else {
      double m = 0.05 * (hi - lo);
      lo -= m;
      hi += m;
    }
  }
};

}  // namespace

void write_svg_panels(std::ostream& out, const std::vector<PlotPanel>& panels) {
  const double width = kPanelW * panels.size();
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << kPanelH << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << kPanelH << "\" fill=\"white\"/>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const PlotPanel& panel = panels[p];
    const double ox = p * kPanelW;
    auto tx = [&](double v) { return panel.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return panel.log_y ? std::log10(v) : v; };

    Range rx, ry;
    for (const PlotSeries& s : panel.series)
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        rx.add(tx(s.x[i]));
        ry.add(ty(s.y[i]));
      }
    if (!std::isfinite(rx.lo) || !std::isfinite(ry.lo)) {
      rx = Range{0, 1};
      ry = Range{0, 1};
    }
    rx.pad();
    ry.pad();

    const double px0 = ox + kMarginL, px1 = ox + kPanelW - kMarginR;
    const double py0 = kPanelH - kMarginB, py1 = kMarginT;
    auto sx = [&](double v) { return px0 + (tx(v) - rx.lo) / (rx.hi - rx.lo) * (px1 - px0); };
    auto sy = [&](double v) { return py0 + (ty(v) - ry.lo) / (ry.hi - ry.lo) * (py1 - py0); };

    out << "<text x=\"" << ox + kPanelW / 2 << "\" y=\"18\" text-anchor=\"middle\" "
        << "font-size=\"13\">" << panel.title << "</text>\n";
    // axes
    out << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px1 << "\" y2=\"" << py0
        << "\" stroke=\"#444\"/>\n";
    out << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px0 << "\" y2=\"" << py1
        << "\" stroke=\"#444\"/>\n";
    // ticks: 4 per axis
    for (int t = 0; t <= 3; ++t) {
      double fx = rx.lo + (rx.hi - rx.lo) * t / 3.0;
      double fy = ry.lo + (ry.hi - ry.lo) * t / 3.0;
      double vx = panel.log_x ? std::pow(10.0, fx) : fx;
      double vy = panel.log_y ? std::pow(10.0, fy) : fy;
      double gx = px0 + (px1 - px0) * t / 3.0;
      double gy = py0 + (py1 - py0) * t / 3.0;
      out << "<text x=\"" << gx << "\" y=\"" << py0 + 16 << "\" text-anchor=\"middle\">"
          << fmt(vx) << "</text>\n";
      out << "<text x=\"" << px0 - 6 << "\" y=\"" << gy + 4 << "\" text-anchor=\"end\">"
          << fmt(vy) << "</text>\n";
    }
    out << "<text x=\"" << (px0 + px1) / 2 << "\" y=\"" << kPanelH - 8
        << "\" text-anchor=\"middle\">" << panel.x_label << "</text>\n";
    out << "<text x=\"" << ox + 14 << "\" y=\"" << (py0 + py1) / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 " << ox + 14 << " "
        << (py0 + py1) / 2 << ")\">" << panel.y_label << "</text>\n";

    double legend_y = py1 + 4;
    for (const PlotSeries& s : panel.series) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        out << sx(s.x[i]) << ',' << sy(s.y[i]) << ' ';
      out << "\"/>\n";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        out << "<circle cx=\"" << sx(s.x[i]) << "\" cy=\"" << sy(s.y[i])
            << "\" r=\"2.5\" fill=\"" << s.color << "\"/>\n";
      if (!s.label.empty()) {
        out << "<rect x=\"" << px1 - 110 << "\" y=\"" << legend_y << "\" width=\"10\" height=\"3\""
            << " fill=\"" << s.color << "\"/>\n";
        out << "<text x=\"" << px1 - 96 << "\" y=\"" << legend_y + 5 << "\">" << s.label
            << "</text>\n";
        legend_y += 14;
      }
    }
  }
  out << "</svg>\n";
}

}  // namespace histoprism
