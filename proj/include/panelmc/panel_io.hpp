#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "panelmc/csv.hpp"
#include "panelmc/panel.hpp"

namespace panelmc {

/*
 * Long-format CSV ingestion: one row per (unit, period), columns for unit id,
 * calendar period, outcome, and adoption period. The adoption field carries
 * the calendar label of the first treated period; blank or the literal `Inf`
 * means never treated. The raw panel must be balanced: every (unit, period)
 * pair present exactly once.
 */

struct CsvSchema {
  std::string unit = "unit";
  std::string period = "period";
  std::string outcome = "outcome";
  std::string adoption = "adoption";
};

namespace detail {
inline int column_index(const CsvTable& table, const std::string& name) {
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (trim(table.header[i]) == name) return static_cast<int>(i);
  }
  fail(ErrorKind::Parse, "csv: missing required column '", name, "'");
}

inline bool is_never_marker(const std::string& raw) {
  const std::string s = trim(raw);
  return s.empty() || s == "Inf" || s == "inf" || s == "INF";
}
}  // namespace detail

inline Panel load_panel(std::istream& in, const CsvSchema& schema = {}) {
  const CsvTable table = read_csv(in);
  const int c_unit = detail::column_index(table, schema.unit);
  const int c_period = detail::column_index(table, schema.period);
  const int c_outcome = detail::column_index(table, schema.outcome);
  const int c_adoption = detail::column_index(table, schema.adoption);

  struct RawRow {
    std::string unit;
    int period;
    double outcome;
    std::string adoption;
    int line;
  };
  std::vector<RawRow> raw;
  raw.reserve(table.rows.size());
  std::vector<std::string> units;
  std::vector<int> labels;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int line = static_cast<int>(r) + 2;  // header is line 1
    require(static_cast<int>(row.size()) >
                std::max({c_unit, c_period, c_outcome, c_adoption}),
            ErrorKind::Parse, "csv line ", line, ": too few fields");
    RawRow item;
    item.unit = trim(row[c_unit]);
    require(!item.unit.empty(), ErrorKind::Parse, "csv line ", line, ": empty unit id");
    const auto period = parse_int(row[c_period]);
    require(period.has_value(), ErrorKind::Parse, "csv line ", line,
            ": period '", row[c_period], "' is not an integer");
    item.period = static_cast<int>(*period);
    const auto outcome = parse_double(row[c_outcome]);
    require(outcome.has_value(), ErrorKind::Parse, "csv line ", line,
            ": outcome '", row[c_outcome], "' is not numeric");
    item.outcome = *outcome;
    item.adoption = row[c_adoption];
    item.line = line;
    raw.push_back(item);
    units.push_back(item.unit);
    labels.push_back(item.period);
  }
  require(!raw.empty(), ErrorKind::EmptyPanel, "csv has no data rows");

  std::sort(units.begin(), units.end());
  units.erase(std::unique(units.begin(), units.end()), units.end());
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());

  std::map<std::string, int> unit_index;
  for (std::size_t i = 0; i < units.size(); ++i) unit_index[units[i]] = static_cast<int>(i);
  std::map<int, int> period_index;  // label -> 1-based position
  for (std::size_t j = 0; j < labels.size(); ++j) period_index[labels[j]] = static_cast<int>(j) + 1;

  Panel panel;
  panel.unit_ids = units;
  panel.period_labels = labels;
  const int n = panel.n_units();
  const int t = panel.n_periods();
  panel.outcomes.setZero(n, t);
  panel.adoption.assign(n, kNeverTreated);

  BoolGrid seen = BoolGrid::Constant(n, t, false);
  std::vector<bool> adoption_set(n, false);
  for (const RawRow& row : raw) {
    const int i = unit_index[row.unit];
    const int tj = period_index[row.period];
    require(!seen(i, tj - 1), ErrorKind::UnbalancedPanel, "duplicate cell (",
            row.unit, ", ", row.period, ") at csv line ", row.line);
    seen(i, tj - 1) = true;
    panel.outcomes(i, tj - 1) = row.outcome;

    int adopt = kNeverTreated;
    if (!detail::is_never_marker(row.adoption)) {
      const auto label = parse_int(row.adoption);
      require(label.has_value(), ErrorKind::InvalidAdoption, "csv line ", row.line,
              ": adoption '", row.adoption, "' is neither a period label nor Inf/blank");
      auto it = period_index.find(static_cast<int>(*label));
      require(it != period_index.end(), ErrorKind::InvalidAdoption, "csv line ",
              row.line, ": adoption period ", *label,
              " is outside the panel's period labels");
      adopt = it->second;
    }
    if (adoption_set[i]) {
      require(panel.adoption[i] == adopt, ErrorKind::InvalidAdoption, "unit ",
              row.unit, ": conflicting adoption values across rows");
    } else {
      panel.adoption[i] = adopt;
      adoption_set[i] = true;
    }
  }

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < t; ++j) {
      require(seen(i, j), ErrorKind::UnbalancedPanel, "unbalanced panel: missing cell (",
              panel.unit_ids[i], ", ", panel.period_labels[j], ")");
    }
  }
  panel.validate();
  return panel;
}

inline void write_panel(std::ostream& out, const Panel& panel, const CsvSchema& schema = {}) {
  out << schema.unit << "," << schema.period << "," << schema.outcome << ","
      << schema.adoption << "\n";
  for (int i = 0; i < panel.n_units(); ++i) {
    const bool never = !panel.ever_treated(i);
    const std::string adoption =
        never ? "Inf" : std::to_string(panel.period_labels[panel.adoption[i] - 1]);
    for (int j = 0; j < panel.n_periods(); ++j) {
      out << csv_escape(panel.unit_ids[i]) << "," << panel.period_labels[j] << ","
          << format_double(panel.outcomes(i, j)) << "," << adoption << "\n";
    }
  }
}

}  // namespace panelmc
