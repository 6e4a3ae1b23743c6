#pragma once

// Minimal static line plots written as SVG.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace fgddf {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  bool dashed = false;
};

struct PlotSpec {
  std::string title, xlabel, ylabel;
  std::vector<PlotSeries> series;
  bool log_y = false;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace detail

inline std::string render_svg(const PlotSpec& p) {
  constexpr double W = 800, H = 480, L = 70, R = 170, T = 40, B = 50;
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  auto ty = [&](double v) { return p.log_y ? std::log10(std::max(v, 1e-300)) : v; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : p.series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i])), y1 = std::max(y1, ty(s.y[i]));
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad, y1 += pad;
  auto sx = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"480\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"400\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + detail::xml_escape(p.title) + "</text>\n";
  o += "<rect x=\"" + detail::fmt(L) + "\" y=\"" + detail::fmt(T) + "\" width=\"" + detail::fmt(W - L - R) + "\" height=\"" +
       detail::fmt(H - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5.0, yv = y0 + (y1 - y0) * i / 5.0;
    const double px = sx(xv), py = H - B - (yv - y0) / (y1 - y0) * (H - T - B);
    o += "<text x=\"" + detail::fmt(px) + "\" y=\"" + detail::fmt(H - B + 16) + "\" text-anchor=\"middle\">" + detail::fmt(xv) + "</text>\n";
    o += "<text x=\"" + detail::fmt(L - 6) + "\" y=\"" + detail::fmt(py + 4) + "\" text-anchor=\"end\">" +
         detail::fmt(p.log_y ? std::pow(10.0, yv) : yv) + "</text>\n";
    o += "<line x1=\"" + detail::fmt(L) + "\" x2=\"" + detail::fmt(W - R) + "\" y1=\"" + detail::fmt(py) + "\" y2=\"" + detail::fmt(py) +
         "\" stroke=\"#ddd\"/>\n";
  }
  if (!p.log_y && y0 < 0 && y1 > 0)
    o += "<line x1=\"" + detail::fmt(L) + "\" x2=\"" + detail::fmt(W - R) + "\" y1=\"" + detail::fmt(sy(0)) + "\" y2=\"" +
         detail::fmt(sy(0)) + "\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
  o += "<text x=\"" + detail::fmt((L + W - R) / 2) + "\" y=\"" + detail::fmt(H - 12) + "\" text-anchor=\"middle\">" +
       detail::xml_escape(p.xlabel) + "</text>\n";
  o += "<text transform=\"translate(16," + detail::fmt((T + H - B) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       detail::xml_escape(p.ylabel) + "</text>\n";
  for (std::size_t k = 0; k < p.series.size(); ++k) {
    const auto& s = p.series[k];
    const std::string color = colors[k % 10];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) pts += detail::fmt(sx(s.x[i])) + "," + detail::fmt(sy(s.y[i])) + " ";
    o += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.3\"" + (s.dashed ? " stroke-dasharray=\"5,3\"" : "") +
         " points=\"" + pts + "\"/>\n";
    const double ly = T + 14 + 18 * static_cast<double>(k);
    o += "<line x1=\"" + detail::fmt(W - R + 10) + "\" x2=\"" + detail::fmt(W - R + 30) + "\" y1=\"" + detail::fmt(ly - 4) + "\" y2=\"" +
         detail::fmt(ly - 4) + "\" stroke=\"" + color + "\"" + (s.dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
    o += "<text x=\"" + detail::fmt(W - R + 35) + "\" y=\"" + detail::fmt(ly) + "\">" + detail::xml_escape(s.label) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

inline void write_svg(const std::string& path, const PlotSpec& p) {
  std::ofstream f(path, std::ios::binary);
  f << render_svg(p);
}

}  // namespace fgddf
