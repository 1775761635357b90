#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "mulopt/pareto.hpp"
#include "mulopt/run.hpp"

namespace mulopt {

struct SvgSeries {
  std::string name;
  std::vector<ParetoPoint> points;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
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

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Roughly five round tick values covering [lo, hi].
inline std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(t);
  return out;
}

}  // namespace detail

// Static scatter of one Pareto staircase per series, area on x and delay on y.
inline std::string frontier_svg(const std::vector<SvgSeries>& series) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  const double W = 640, H = 480, L = 70, R = 160, T = 20, B = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      xmin = std::min(xmin, p.area);
      xmax = std::max(xmax, p.area);
      ymin = std::min(ymin, p.delay);
      ymax = std::max(ymax, p.delay);
    }
  if (xmin > xmax) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  auto pad = [](double& lo, double& hi) {
    const double d = hi - lo > 0 ? (hi - lo) * 0.05 : std::max(1.0, std::abs(hi) * 0.05);
    lo -= d;
    hi += d;
  };
  pad(xmin, xmax);
  pad(ymin, ymax);
  auto X = [&](double v) { return L + (v - xmin) / (xmax - xmin) * (W - L - R); };
  auto Y = [&](double v) { return H - B - (v - ymin) / (ymax - ymin) * (H - T - B); };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt(W) + "\" height=\"" + detail::fmt(H) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<rect x=\"" + detail::fmt(L) + "\" y=\"" + detail::fmt(T) + "\" width=\"" + detail::fmt(W - L - R) +
       "\" height=\"" + detail::fmt(H - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : detail::ticks(xmin, xmax))
    o += "<text x=\"" + detail::fmt(X(t)) + "\" y=\"" + detail::fmt(H - B + 16) + "\" text-anchor=\"middle\">" +
         format_double(t) + "</text>\n";
  for (double t : detail::ticks(ymin, ymax))
    o += "<text x=\"" + detail::fmt(L - 6) + "\" y=\"" + detail::fmt(Y(t) + 4) + "\" text-anchor=\"end\">" +
         format_double(t) + "</text>\n";
  o += "<text x=\"" + detail::fmt(L + (W - L - R) / 2) + "\" y=\"" + detail::fmt(H - 12) +
       "\" text-anchor=\"middle\">area</text>\n";
  o += "<text x=\"16\" y=\"" + detail::fmt(T + (H - T - B) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       detail::fmt(T + (H - T - B) / 2) + ")\">delay</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = colors[k % (sizeof colors / sizeof *colors)];
    auto pts = series[k].points;
    std::sort(pts.begin(), pts.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
      return a.area != b.area ? a.area < b.area : a.delay < b.delay;
    });
    if (!pts.empty()) {
      std::string path = "M" + detail::fmt(X(pts[0].area)) + "," + detail::fmt(Y(pts[0].delay));
      for (std::size_t i = 1; i < pts.size(); ++i)
        path += " H" + detail::fmt(X(pts[i].area)) + " V" + detail::fmt(Y(pts[i].delay));
      o += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    }
    for (const auto& p : pts)
      o += "<circle cx=\"" + detail::fmt(X(p.area)) + "\" cy=\"" + detail::fmt(Y(p.delay)) + "\" r=\"3.5\" fill=\"" +
           color + "\"/>\n";
    const double ly = T + 14 + 18.0 * static_cast<double>(k);
    o += "<rect x=\"" + detail::fmt(W - R + 14) + "\" y=\"" + detail::fmt(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
         color + "\"/>\n";
    o += "<text x=\"" + detail::fmt(W - R + 30) + "\" y=\"" + detail::fmt(ly) + "\">" +
         detail::svg_escape(series[k].name) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

}  // namespace mulopt
