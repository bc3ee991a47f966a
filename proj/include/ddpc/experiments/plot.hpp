#pragma once

// Minimal self-contained SVG line charts with error bands.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ddpc/errors.hpp"

namespace ddpc::experiments {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  ///< half-width of the band, empty for none
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::optional<double> y_min;
  std::optional<double> y_max;
  int width = 640;
  int height = 400;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
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

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return colors[i % 8];
}

}  // namespace detail

/// Renders the series; y values (and bands) are clamped to the axis range.
inline std::string emit_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
  bool any = false;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const PlotSeries& s : series) {
    if (s.x.size() != s.y.size() || (!s.err.empty() && s.err.size() != s.y.size()))
      throw DimensionError("emit_plot: series '" + s.name + "' has mismatched lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      any = true;
      const double e = s.err.empty() || !std::isfinite(s.err[i]) ? 0.0 : std::abs(s.err[i]);
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      double lo = s.y[i] - e, hi = s.y[i] + e;
      if (spec.log_y && lo <= 0.0) lo = s.y[i] > 0.0 ? s.y[i] : INFINITY;
      if (std::isfinite(lo)) ymin = std::min(ymin, lo);
      ymax = std::max(ymax, hi);
    }
  }
  if (!any) throw DomainError("emit_plot: empty table");
  if (spec.y_min) ymin = *spec.y_min;
  if (spec.y_max) ymax = *spec.y_max;
  if (spec.log_y) {
    if (!(ymax > 0.0)) throw DomainError("emit_plot: log axis needs positive values");
    if (!(ymin > 0.0) || !std::isfinite(ymin)) ymin = ymax * 1e-3;
    ymin = std::pow(10.0, std::floor(std::log10(ymin)));
    ymax = std::pow(10.0, std::ceil(std::log10(ymax)));
    if (ymax <= ymin) ymax = ymin * 10.0;
  } else if (ymax <= ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  if (xmax <= xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }

  const double W = spec.width, H = spec.height;
  const double left = 70, right = 150, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  auto tx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto ty = [&](double y) {
    double f;
    if (spec.log_y) {
      y = std::clamp(y, ymin, ymax);
      f = (std::log10(y) - std::log10(ymin)) / (std::log10(ymax) - std::log10(ymin));
    } else {
      y = std::clamp(y, ymin, ymax);
      f = (y - ymin) / (ymax - ymin);
    }
    return top + (1.0 - f) * ph;
  };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
    << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    o << "<text x=\"" << detail::fmt(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << detail::xml_escape(spec.title) << "</text>\n";
  o << "<rect x=\"" << detail::fmt(left) << "\" y=\"" << detail::fmt(top) << "\" width=\"" << detail::fmt(pw)
    << "\" height=\"" << detail::fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  // ticks
  std::vector<double> yt;
  if (spec.log_y) {
    for (double d = ymin; d <= ymax * 1.0000001; d *= 10.0) yt.push_back(d);
  } else {
    for (int k = 0; k <= 4; ++k) yt.push_back(ymin + (ymax - ymin) * k / 4.0);
  }
  for (double v : yt) {
    const double y = ty(v);
    o << "<line x1=\"" << detail::fmt(left - 4) << "\" y1=\"" << detail::fmt(y) << "\" x2=\"" << detail::fmt(left)
      << "\" y2=\"" << detail::fmt(y) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << detail::fmt(left - 6) << "\" y=\"" << detail::fmt(y + 4)
      << "\" text-anchor=\"end\" font-size=\"11\">" << detail::tick_label(v) << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = xmin + (xmax - xmin) * k / 4.0;
    const double x = tx(v);
    o << "<line x1=\"" << detail::fmt(x) << "\" y1=\"" << detail::fmt(top + ph) << "\" x2=\"" << detail::fmt(x)
      << "\" y2=\"" << detail::fmt(top + ph + 4) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << detail::fmt(x) << "\" y=\"" << detail::fmt(top + ph + 18)
      << "\" text-anchor=\"middle\" font-size=\"11\">" << detail::tick_label(v) << "</text>\n";
  }
  if (!spec.x_label.empty())
    o << "<text x=\"" << detail::fmt(left + pw / 2) << "\" y=\"" << detail::fmt(H - 10)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << detail::xml_escape(spec.x_label) << "</text>\n";
  if (!spec.y_label.empty())
    o << "<text x=\"16\" y=\"" << detail::fmt(top + ph / 2) << "\" text-anchor=\"middle\" font-size=\"13\" "
      << "transform=\"rotate(-90 16 " << detail::fmt(top + ph / 2) << ")\">" << detail::xml_escape(spec.y_label)
      << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = detail::palette(si);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) idx.push_back(i);
    if (idx.empty()) continue;
    if (!s.err.empty()) {
      o << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i : idx) {
        const double e = std::isfinite(s.err[i]) ? std::abs(s.err[i]) : 0.0;
        o << detail::fmt(tx(s.x[i])) << ',' << detail::fmt(ty(s.y[i] + e)) << ' ';
      }
      for (auto it = idx.rbegin(); it != idx.rend(); ++it) {
        const double e = std::isfinite(s.err[*it]) ? std::abs(s.err[*it]) : 0.0;
        o << detail::fmt(tx(s.x[*it])) << ',' << detail::fmt(ty(s.y[*it] - e)) << ' ';
      }
      o << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < idx.size(); ++k)
      o << (k ? " " : "") << detail::fmt(tx(s.x[idx[k]])) << ',' << detail::fmt(ty(s.y[idx[k]]));
    o << "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(si);
    o << "<line x1=\"" << detail::fmt(left + pw + 10) << "\" y1=\"" << detail::fmt(ly) << "\" x2=\""
      << detail::fmt(left + pw + 30) << "\" y2=\"" << detail::fmt(ly) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>";
    o << "<text x=\"" << detail::fmt(left + pw + 35) << "\" y=\"" << detail::fmt(ly + 4) << "\" font-size=\"12\">"
      << detail::xml_escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace ddpc::experiments
