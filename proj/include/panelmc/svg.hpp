#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "panelmc/aggregate.hpp"
#include "panelmc/csv.hpp"

namespace panelmc {

/*
 * Self-contained event-study plot: one series per estimator, a dashed zero
 * reference line, a vertical marker at k = 0, and whisker bars where
 * confidence bounds are present. Pure emission, no external assets.
 */

namespace svgdetail {

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors = {
      "#1f6fb4", "#c0392b", "#27ae60", "#8e44ad", "#e67e22", "#16848d"};
  return colors;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// A short list of round tick values covering [lo, hi].
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  if (hi <= lo) hi = lo + 1.0;
  const double raw_step = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw_step)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (mag * m >= raw_step) {
      step = mag * m;
      break;
    }
  }
  std::vector<double> ticks;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step)
    ticks.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return ticks;
}

}  // namespace svgdetail

inline void write_event_study_svg(std::ostream& out,
                                  const std::vector<EventStudy>& studies,
                                  const std::string& title = "Event-study estimates") {
  const double width = 920, height = 560;
  const double ml = 70, mr = 180, mt = 46, mb = 52;
  const double pw = width - ml - mr, ph = height - mt - mb;

  int k_lo = 0, k_hi = 0;
  double y_lo = 0.0, y_hi = 0.0;
  bool any = false;
  for (const EventStudy& s : studies) {
    for (const auto& [k, e] : s.entries) {
      if (!any) {
        k_lo = k_hi = k;
        y_lo = y_hi = e.estimate;
        any = true;
      }
      k_lo = std::min(k_lo, k);
      k_hi = std::max(k_hi, k);
      y_lo = std::min({y_lo, e.estimate, e.ci_low.value_or(e.estimate)});
      y_hi = std::max({y_hi, e.estimate, e.ci_high.value_or(e.estimate)});
    }
  }
  if (!any) {
    k_lo = -1;
    k_hi = 1;
  }
  y_lo = std::min(y_lo, 0.0);
  y_hi = std::max(y_hi, 0.0);
  const double pad = 0.06 * std::max(y_hi - y_lo, 1e-12);
  y_lo -= pad;
  y_hi += pad;
  if (k_lo == k_hi) {
    --k_lo;
    ++k_hi;
  }

  auto x_of = [&](double k) { return ml + pw * (k - k_lo) / (k_hi - k_lo); };
  auto y_of = [&](double v) { return mt + ph * (1.0 - (v - y_lo) / (y_hi - y_lo)); };

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
      << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << ml << "\" y=\"26\" font-family=\"sans-serif\" font-size=\"17\">"
      << title << "</text>\n";

  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
      << "\" y2=\"" << mt + ph << "\" stroke=\"#333\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << mt + ph << "\" stroke=\"#333\"/>\n";
  for (double tick : svgdetail::nice_ticks(y_lo, y_hi)) {
    const double y = y_of(tick);
    out << "<line x1=\"" << ml - 4 << "\" y1=\"" << y << "\" x2=\"" << ml
        << "\" y2=\"" << y << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">"
        << svgdetail::fmt(tick) << "</text>\n";
  }
  const int k_step = std::max(1, (k_hi - k_lo) / 10);
  for (int k = k_lo; k <= k_hi; k += k_step) {
    const double x = x_of(k);
    out << "<line x1=\"" << x << "\" y1=\"" << mt + ph << "\" x2=\"" << x
        << "\" y2=\"" << mt + ph + 4 << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << x << "\" y=\"" << mt + ph + 18
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << k
        << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 14
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
      << "event time k (periods since adoption)</text>\n";

  // zero line and adoption marker
  out << "<line x1=\"" << ml << "\" y1=\"" << y_of(0.0) << "\" x2=\"" << ml + pw
      << "\" y2=\"" << y_of(0.0)
      << "\" stroke=\"#666\" stroke-dasharray=\"5,4\"/>\n";
  if (k_lo <= 0 && 0 <= k_hi) {
    out << "<line x1=\"" << x_of(0) << "\" y1=\"" << mt << "\" x2=\"" << x_of(0)
        << "\" y2=\"" << mt + ph
        << "\" stroke=\"#999\" stroke-dasharray=\"2,3\"/>\n";
  }

  for (std::size_t s = 0; s < studies.size(); ++s) {
    const std::string& color = svgdetail::palette()[s % svgdetail::palette().size()];
    out << "<g class=\"series\" data-tag=\"" << studies[s].estimator_tag << "\">\n";
    std::string points;
    for (const auto& [k, e] : studies[s].entries) {
      const double x = x_of(k), y = y_of(e.estimate);
      points += svgdetail::fmt(x) + "," + svgdetail::fmt(y) + " ";
      if (e.ci_low && e.ci_high) {
        out << "<line x1=\"" << x << "\" y1=\"" << y_of(*e.ci_low) << "\" x2=\"" << x
            << "\" y2=\"" << y_of(*e.ci_high) << "\" stroke=\"" << color
            << "\" stroke-opacity=\"0.45\"/>\n";
      }
      out << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"2.6\" fill=\"" << color
          << "\"/>\n";
    }
    if (!points.empty())
      out << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.6\" points=\"" << points << "\"/>\n";
    out << "</g>\n";
  }

  // legend
  double ly = mt + 8;
  for (std::size_t s = 0; s < studies.size(); ++s) {
    const std::string& color = svgdetail::palette()[s % svgdetail::palette().size()];
    out << "<line x1=\"" << ml + pw + 16 << "\" y1=\"" << ly << "\" x2=\""
        << ml + pw + 40 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << ml + pw + 46 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"13\">" << studies[s].estimator_tag
        << "</text>\n";
    ly += 22;
  }
  out << "</svg>\n";
}

}  // namespace panelmc
