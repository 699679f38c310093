#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "panelmc/csv.hpp"
#include "panelmc/panel.hpp"

namespace panelmc {

/*
 * Sparse per-cell effect estimates: tau-hat(i,t) = observed outcome minus
 * imputed counterfactual. Treated entries live on treated cells; placebo-pre
 * entries live on pre-treatment cells of eventually-treated units and feed
 * the k < 0 side of event studies and gap plots. Cells an estimator cannot
 * serve are recorded, never silently dropped.
 */

enum class CellKind { Treated, PlaceboPre };

inline const char* cell_kind_name(CellKind kind) {
  return kind == CellKind::Treated ? "treated" : "placebo-pre";
}

struct EffectCell {
  double estimate = 0.0;
  CellKind kind = CellKind::Treated;
};

struct InestimableCell {
  int unit = 0;
  int period = 0;  // 1-based position
  std::string reason;
};

struct EffectGrid {
  // key: (unit row index, 1-based period position)
  std::map<std::pair<int, int>, EffectCell> cells;
  std::vector<InestimableCell> inestimable;
  std::string estimator_tag;
  std::optional<double> lambda_used;

  bool empty() const { return cells.empty(); }

  const EffectCell* find(int unit, int t) const {
    auto it = cells.find({unit, t});
    return it == cells.end() ? nullptr : &it->second;
  }

  void add(int unit, int t, double estimate, CellKind kind) {
    cells[{unit, t}] = EffectCell{estimate, kind};
  }

  void mark_inestimable(int unit, int t, std::string reason) {
    inestimable.push_back({unit, t, std::move(reason)});
  }
};

inline void write_effects_csv(std::ostream& out, const EffectGrid& grid,
                              const Panel& panel) {
  out << "unit,period,event_time,cell_kind,estimate,estimator_tag\n";
  for (const auto& [key, cell] : grid.cells) {
    const auto [unit, t] = key;
    const int g = panel.adoption[unit];
    const int event_time = g == kNeverTreated ? 0 : t - g;
    out << csv_escape(panel.unit_ids[unit]) << "," << panel.period_labels[t - 1]
        << "," << event_time << "," << cell_kind_name(cell.kind) << ","
        << format_double(cell.estimate) << "," << csv_escape(grid.estimator_tag)
        << "\n";
  }
}

}  // namespace panelmc
