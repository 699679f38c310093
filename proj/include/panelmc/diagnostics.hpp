#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "panelmc/pipeline.hpp"

namespace panelmc {

/*
 * Credibility diagnostics.
 *
 * gap_series: one unit's placebo-pre and treated estimates ordered by event
 * time, the per-unit view behind gap plots.
 *
 * in_time_placebo: backdate every eventually-treated unit's adoption by l
 * periods and re-run the estimator, scoring only horizons 0 <= k < l. Cells
 * at or past the unit's true adoption are dropped from fitting and scoring,
 * so the diagnostic never touches genuinely treated outcomes. Placebo
 * estimates far from zero indicate a violated assumption; estimates near
 * zero are necessary, not sufficient (they can also reflect over-fitting).
 */

inline std::vector<std::pair<int, double>> gap_series(const EffectGrid& grid,
                                                      const Panel& panel, int unit) {
  require(unit >= 0 && unit < panel.n_units(), ErrorKind::Config,
          "gap_series: unit index out of range");
  require(panel.ever_treated(unit), ErrorKind::NoGap, "gap_series: unit ",
          panel.unit_ids[unit], " is never treated");
  const int g = panel.adoption[unit];
  std::vector<std::pair<int, double>> series;
  for (const auto& [key, cell] : grid.cells) {
    if (key.first != unit) continue;
    series.emplace_back(key.second - g, cell.estimate);
  }
  std::sort(series.begin(), series.end());
  return series;
}

struct PlaceboItem {
  int unit = 0;
  int k = 0;               // event time relative to the shifted adoption
  double estimate = 0.0;
  int true_adoption = 0;     // 1-based positions
  int placebo_adoption = 0;
};

struct PlaceboReport {
  int shift = 0;  // l
  std::vector<PlaceboItem> items;
  std::vector<std::string> excluded_units;  // shifted adoption would fall at/before period 1
  int inestimable_cells = 0;
  double mean_abs = 0.0;
  double max_abs = 0.0;
  std::map<int, double> per_k_mean;
  std::string estimator_tag;
  // Near-zero placebos support the design but can also come from a model
  // flexible enough to fit the held-out pre-period; reported, not asserted.
  std::string caveat =
      "near-zero in-time placebo estimates may also reflect over-fitting";
};

inline PlaceboReport in_time_placebo(const Panel& panel, const EstimatorSpec& spec,
                                     int shift) {
  require(shift >= 1, ErrorKind::Config, "in_time_placebo: shift must be >= 1");
  require(is_per_cell(spec.kind), ErrorKind::Config,
          "in_time_placebo: estimator '", estimator_tag(spec.kind),
          "' has no per-unit cell estimates");

  const int n = panel.n_units();
  const int t = panel.n_periods();
  PlaceboReport report;
  report.shift = shift;
  report.estimator_tag = estimator_tag(spec.kind);

  Panel shifted = panel;
  BoolGrid available = BoolGrid::Constant(n, t, true);
  int n_scored_units = 0;
  for (int i = 0; i < n; ++i) {
    if (!panel.ever_treated(i)) continue;
    const int g_true = panel.adoption[i];
    const int g_tilde = g_true - shift;
    if (g_tilde <= 1) {
      report.excluded_units.push_back(panel.unit_ids[i]);
      continue;  // keeps its true adoption; participates as data, not scored
    }
    shifted.adoption[i] = g_tilde;
    // Truncate at the true adoption: genuinely treated outcomes must not be
    // fitted or scored.
    for (int tj = g_true; tj <= t; ++tj) available(i, tj - 1) = false;
    ++n_scored_units;
  }
  require(n_scored_units > 0, ErrorKind::EmptyPlacebo,
          "in_time_placebo: shift ", shift, " leaves no unit with a pre-period");

  const TreatmentMask shifted_mask = build_mask(shifted);
  const EffectGrid grid = compute_effect_grid(shifted, shifted_mask, spec, &available);

  double acc_abs = 0.0;
  std::map<int, std::pair<double, int>> per_k;
  for (int i = 0; i < n; ++i) {
    if (!panel.ever_treated(i)) continue;
    const int g_true = panel.adoption[i];
    const int g_tilde = shifted.adoption[i];
    if (g_tilde == g_true) continue;  // excluded unit
    for (int k = 0; k < shift; ++k) {
      const int tj = g_tilde + k;
      require(tj < g_true, ErrorKind::Numerical,
              "in_time_placebo: scored cell reaches a genuinely treated period");
      const EffectCell* cell = grid.find(i, tj);
      if (cell == nullptr || cell->kind != CellKind::Treated) {
        ++report.inestimable_cells;
        continue;
      }
      PlaceboItem item;
      item.unit = i;
      item.k = k;
      item.estimate = cell->estimate;
      item.true_adoption = g_true;
      item.placebo_adoption = g_tilde;
      report.items.push_back(item);
      acc_abs += std::abs(cell->estimate);
      report.max_abs = std::max(report.max_abs, std::abs(cell->estimate));
      auto& [sum, cnt] = per_k[k];
      sum += cell->estimate;
      ++cnt;
    }
  }
  if (!report.items.empty())
    report.mean_abs = acc_abs / static_cast<double>(report.items.size());
  for (const auto& [k, sc] : per_k) report.per_k_mean[k] = sc.first / sc.second;
  return report;
}

// (max |estimate|, mean |estimate|) over the k < 0 entries of an event study.
inline std::pair<double, double> pretrend_summary(const EventStudy& study) {
  double max_abs = 0.0;
  double acc = 0.0;
  int cnt = 0;
  for (const auto& [k, entry] : study.entries) {
    if (k >= 0) continue;
    max_abs = std::max(max_abs, std::abs(entry.estimate));
    acc += std::abs(entry.estimate);
    ++cnt;
  }
  require(cnt > 0, ErrorKind::EmptyAggregate,
          "pretrend_summary: event study has no k < 0 entries");
  return {max_abs, acc / cnt};
}

inline void write_placebo_csv(std::ostream& out, const PlaceboReport& report,
                              const Panel& panel) {
  out << "unit,k,estimate,true_adoption,placebo_adoption\n";
  for (const PlaceboItem& item : report.items) {
    out << csv_escape(panel.unit_ids[item.unit]) << "," << item.k << ","
        << format_double(item.estimate) << ","
        << panel.period_labels[item.true_adoption - 1] << ","
        << panel.period_labels[item.placebo_adoption - 1] << "\n";
  }
}

}  // namespace panelmc
