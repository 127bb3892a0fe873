#pragma once

#include <string>
#include <vector>

namespace cdiff::exp {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // optional symmetric error bars
  bool markers = true;
};

// Standalone SVG line/marker plot; log axes take base-10 ticks.
std::string svg_plot(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                     const std::string& y_label, bool log_x, bool log_y);

// Overlaid histograms of several sample sets on [lo, hi].
std::string svg_histogram(const std::vector<std::pair<std::string, std::vector<double>>>& sets, double lo,
                          double hi, int bins, const std::string& title);

std::string svg_bars(const std::vector<std::string>& labels, const std::vector<double>& values,
                     const std::vector<double>& errors, const std::string& title, const std::string& y_label);

}  // namespace cdiff::exp
