#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>

#include "panelmc/effect_grid.hpp"
#include "panelmc/panel.hpp"

namespace panelmc {

/*
 * Aggregation of per-cell effects.
 *
 * Calendar time: tau-cal(t0) averages treated-cell estimates down column t0
 * (units at very different points of their treatment process).
 *
 * Event time: tau-event(k) averages estimates across units at the same
 * distance k = t - G_i from adoption; k < 0 entries are placebo checks and
 * come from placebo-pre cells.
 *
 * Units are always accumulated in ascending row order, so a single-cohort
 * panel gives bitwise-equal calendar and event aggregates.
 */

struct EventStudyEntry {
  double estimate = 0.0;
  int n_units = 0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
};

struct EventStudy {
  std::map<int, EventStudyEntry> entries;  // key: event time k
  std::string estimator_tag;
};

struct CalendarATT {
  int period = 0;  // t0, 1-based
  double estimate = 0.0;
  int n_treated = 0;
  int n_inestimable = 0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
};

inline CalendarATT aggregate_calendar(const EffectGrid& grid, int t0) {
  require(t0 >= 1, ErrorKind::Config, "aggregate_calendar: t0 must be >= 1");
  CalendarATT att;
  att.period = t0;
  double acc = 0.0;
  for (const auto& [key, cell] : grid.cells) {
    if (key.second != t0 || cell.kind != CellKind::Treated) continue;
    acc += cell.estimate;
    ++att.n_treated;
  }
  for (const auto& bad : grid.inestimable)
    if (bad.period == t0) ++att.n_inestimable;
  require(att.n_treated > 0, ErrorKind::EmptyAggregate,
          "aggregate_calendar: no estimable treated cells at t0=", t0);
  att.estimate = acc / att.n_treated;
  return att;
}

inline EventStudy aggregate_event(const EffectGrid& grid, const Panel& panel,
                                  int k_min, int k_max) {
  require(k_min <= k_max, ErrorKind::Config, "aggregate_event: k_min > k_max");
  EventStudy study;
  study.estimator_tag = grid.estimator_tag;
  const int t = panel.n_periods();
  for (int k = k_min; k <= k_max; ++k) {
    double acc = 0.0;
    int cnt = 0;
    for (int i = 0; i < panel.n_units(); ++i) {
      if (!panel.ever_treated(i)) continue;
      const int tj = panel.adoption[i] + k;
      if (tj < 1 || tj > t) continue;
      const EffectCell* cell = grid.find(i, tj);
      if (cell == nullptr) continue;
      const CellKind want = k >= 0 ? CellKind::Treated : CellKind::PlaceboPre;
      if (cell->kind != want) continue;
      acc += cell->estimate;
      ++cnt;
    }
    if (cnt == 0) continue;  // entries with zero contributors are omitted
    study.entries[k] = EventStudyEntry{acc / cnt, cnt, std::nullopt, std::nullopt};
  }
  return study;
}

// Unweighted mean over k >= 0 entries (each event time counts once);
// weight_by_n switches to an N_k-weighted mean.
inline double mean_post_effect(const EventStudy& study, bool weight_by_n = false) {
  double acc = 0.0;
  double w = 0.0;
  for (const auto& [k, entry] : study.entries) {
    if (k < 0) continue;
    const double wk = weight_by_n ? static_cast<double>(entry.n_units) : 1.0;
    acc += wk * entry.estimate;
    w += wk;
  }
  require(w > 0.0, ErrorKind::EmptyAggregate,
          "mean_post_effect: no post-treatment (k >= 0) entries");
  return acc / w;
}

inline void write_event_study_csv(std::ostream& out, const EventStudy& study) {
  out << "k,estimate,n_units,ci_low,ci_high,estimator_tag\n";
  for (const auto& [k, entry] : study.entries) {
    out << k << "," << format_double(entry.estimate) << "," << entry.n_units << ",";
    if (entry.ci_low) out << format_double(*entry.ci_low);
    out << ",";
    if (entry.ci_high) out << format_double(*entry.ci_high);
    out << "," << csv_escape(study.estimator_tag) << "\n";
  }
}

}  // namespace panelmc
