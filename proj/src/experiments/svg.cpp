#include "cdiff/experiments/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace cdiff::exp {

namespace {

constexpr double kW = 640, kH = 420, kL = 70, kR = 20, kT = 40, kB = 55;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

struct Axis {
  double lo, hi;
  bool log;
  double map(double v, double a, double b) const {
    const double u = log ? (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo)) : (v - lo) / (hi - lo);
    return a + u * (b - a);
  }
  std::vector<double> ticks() const {
    std::vector<double> t;
    if (log) {
      for (double e = std::floor(std::log10(lo)); e <= std::ceil(std::log10(hi)); e += 1.0) {
        for (double m : {1.0, 2.0, 5.0}) {
          const double v = m * std::pow(10.0, e);
          if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) t.push_back(v);
        }
      }
    } else {
      const double step = std::pow(10.0, std::floor(std::log10((hi - lo) / 5.0)));
      const double nice = (hi - lo) / step > 25 ? 5 * step : (hi - lo) / step > 10 ? 2 * step : step;
      for (double v = std::ceil(lo / nice) * nice; v <= hi + 1e-12; v += nice) t.push_back(v);
    }
    return t;
  }
};

Axis make_axis(double lo, double hi, bool log) {
  if (log) {
    lo = std::max(lo, 1e-300);
    hi = std::max(hi, lo * 1.0001);
    return {lo / 1.15, hi * 1.15, true};
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad, false};
}

void frame(std::ostringstream& os, const std::string& title, const std::string& x_label, const std::string& y_label) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  os << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  os << "<text transform=\"translate(16," << (kT + kH - kB) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
  os << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << kW - kL - kR << "\" height=\"" << kH - kT - kB
     << "\" fill=\"none\" stroke=\"black\"/>\n";
}

void ticks(std::ostringstream& os, const Axis& ax, const Axis& ay) {
  for (double v : ax.ticks()) {
    const double px = ax.map(v, kL, kW - kR);
    os << "<line x1=\"" << num(px) << "\" y1=\"" << kH - kB << "\" x2=\"" << num(px) << "\" y2=\"" << kH - kB + 5 << "\" stroke=\"black\"/>";
    os << "<text x=\"" << num(px) << "\" y=\"" << kH - kB + 18 << "\" text-anchor=\"middle\">" << num(v) << "</text>\n";
  }
  for (double v : ay.ticks()) {
    const double py = ay.map(v, kH - kB, kT);
    os << "<line x1=\"" << kL - 5 << "\" y1=\"" << num(py) << "\" x2=\"" << kL << "\" y2=\"" << num(py) << "\" stroke=\"black\"/>";
    os << "<text x=\"" << kL - 8 << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
}

void legend(std::ostringstream& os, const std::vector<std::string>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = kT + 14 + 16.0 * static_cast<double>(i);
    os << "<rect x=\"" << kW - kR - 150 << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\"" << kColors[i % 6] << "\"/>";
    os << "<text x=\"" << kW - kR - 135 << "\" y=\"" << y << "\">" << escape(labels[i]) << "</text>\n";
  }
}

}  // namespace

std::string svg_plot(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                     const std::string& y_label, bool log_x, bool log_y) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double e = i < s.err.size() ? s.err[i] : 0.0;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, log_y ? std::max(s.y[i] - e, s.y[i] * 0.5) : s.y[i] - e);
      yhi = std::max(yhi, s.y[i] + e);
    }
  }
  if (!std::isfinite(xlo)) xlo = ylo = 1.0, xhi = yhi = 2.0;
  const Axis ax = make_axis(xlo, xhi, log_x);
  const Axis ay = make_axis(ylo, yhi, log_y);
  std::ostringstream os;
  frame(os, title, x_label, y_label);
  ticks(os, ax, ay);
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % 6];
    labels.push_back(s.label);
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"" << (s.markers ? "" : " stroke-dasharray=\"5,3\"")
       << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << num(ax.map(s.x[i], kL, kW - kR)) << ',' << num(ay.map(s.y[i], kH - kB, kT)) << ' ';
    os << "\"/>\n";
    if (!s.markers) continue;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double px = ax.map(s.x[i], kL, kW - kR);
      os << "<circle cx=\"" << num(px) << "\" cy=\"" << num(ay.map(s.y[i], kH - kB, kT)) << "\" r=\"3.5\" fill=\"" << color << "\"/>";
      if (i < s.err.size() && s.err[i] > 0) {
        const double lo = log_y ? std::max(s.y[i] - s.err[i], ay.lo) : s.y[i] - s.err[i];
        os << "<line x1=\"" << num(px) << "\" x2=\"" << num(px) << "\" y1=\"" << num(ay.map(lo, kH - kB, kT)) << "\" y2=\""
           << num(ay.map(s.y[i] + s.err[i], kH - kB, kT)) << "\" stroke=\"" << color << "\"/>";
      }
      os << '\n';
    }
  }
  legend(os, labels);
  os << "</svg>\n";
  return os.str();
}

std::string svg_histogram(const std::vector<std::pair<std::string, std::vector<double>>>& sets, double lo,
                          double hi, int bins, const std::string& title) {
  bins = std::max(bins, 1);
  const double width = (hi - lo) / bins;
  std::vector<std::vector<double>> dens;
  double top = 0.0;
  for (const auto& [label, values] : sets) {
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
      if (!(v >= lo && v <= hi)) continue;
      const int b = std::min(bins - 1, static_cast<int>((v - lo) / width));
      h[static_cast<std::size_t>(b)] += 1.0;
    }
    for (double& c : h) {
      c /= std::max<double>(1.0, static_cast<double>(values.size())) * width;
      top = std::max(top, c);
    }
    dens.push_back(std::move(h));
  }
  const Axis ax{lo, hi, false};
  const Axis ay{0.0, top > 0 ? top * 1.1 : 1.0, false};
  std::ostringstream os;
  frame(os, title, "y", "density");
  ticks(os, ax, ay);
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < dens.size(); ++k) {
    labels.push_back(sets[k].first);
    os << "<polyline fill=\"none\" stroke=\"" << kColors[k % 6] << "\" stroke-width=\"1.5\" points=\"";
    for (int b = 0; b < bins; ++b) {
      const double y = ay.map(dens[k][static_cast<std::size_t>(b)], kH - kB, kT);
      os << num(ax.map(lo + b * width, kL, kW - kR)) << ',' << num(y) << ' '
         << num(ax.map(lo + (b + 1) * width, kL, kW - kR)) << ',' << num(y) << ' ';
    }
    os << "\"/>\n";
  }
  legend(os, labels);
  os << "</svg>\n";
  return os.str();
}

std::string svg_bars(const std::vector<std::string>& labels, const std::vector<double>& values,
                     const std::vector<double>& errors, const std::string& title, const std::string& y_label) {
  double top = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    top = std::max(top, values[i] + (i < errors.size() ? errors[i] : 0.0));
  const Axis ay{0.0, top > 0 ? top * 1.15 : 1.0, false};
  std::ostringstream os;
  frame(os, title, "", y_label);
  for (double v : ay.ticks()) {
    const double py = ay.map(v, kH - kB, kT);
    os << "<text x=\"" << kL - 8 << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  const double slot = (kW - kL - kR) / std::max<double>(1.0, static_cast<double>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x0 = kL + slot * (static_cast<double>(i) + 0.2);
    const double y = ay.map(values[i], kH - kB, kT);
    os << "<rect x=\"" << num(x0) << "\" y=\"" << num(y) << "\" width=\"" << num(slot * 0.6) << "\" height=\""
       << num(kH - kB - y) << "\" fill=\"" << kColors[i % 6] << "\"/>";
    if (i < errors.size() && errors[i] > 0) {
      const double cx = x0 + slot * 0.3;
      os << "<line x1=\"" << num(cx) << "\" x2=\"" << num(cx) << "\" y1=\"" << num(ay.map(values[i] - errors[i], kH - kB, kT))
         << "\" y2=\"" << num(ay.map(values[i] + errors[i], kH - kB, kT)) << "\" stroke=\"black\"/>";
    }
    os << "<text x=\"" << num(x0 + slot * 0.3) << "\" y=\"" << kH - kB + 18 << "\" text-anchor=\"middle\">"
       << escape(labels[i]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace cdiff::exp
