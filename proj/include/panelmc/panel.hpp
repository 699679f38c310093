#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "panelmc/errors.hpp"

namespace panelmc {

/*
 * Balanced-panel data model for staggered treatment adoption.
 *
 * Conventions used throughout the library:
 *   - unit indices are 0-based row indices into `outcomes`;
 *   - period positions are 1-based (t = 1..T), so `adoption[i]` is the
 *     1-based position of the first treated period and matrix access is
 *     `outcomes(i, t - 1)`;
 *   - `kNeverTreated` is the sentinel for units that never adopt;
 *   - event time is k = t - adoption[i].
 *
 * "Missingness" downstream always means counterfactual missingness (the
 * untreated outcome of a treated cell); the raw outcome grid is fully
 * populated.
 */

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr int kNeverTreated = std::numeric_limits<int>::max();

struct Panel {
  std::vector<std::string> unit_ids;  // length N
  std::vector<int> period_labels;    // length T, strictly increasing calendar labels
  Eigen::MatrixXd outcomes;          // N x T
  std::vector<int> adoption;         // per unit: 1-based period position or kNeverTreated

  int n_units() const { return static_cast<int>(unit_ids.size()); }
  int n_periods() const { return static_cast<int>(period_labels.size()); }

  bool ever_treated(int unit) const { return adoption[unit] != kNeverTreated; }

  void validate() const {
    const int n = n_units();
    const int t = n_periods();
    require(n >= 1 && t >= 1, ErrorKind::EmptyPanel, "panel has no units or no periods");
    require(outcomes.rows() == n && outcomes.cols() == t, ErrorKind::Dimension,
            "outcome grid is ", outcomes.rows(), "x", outcomes.cols(),
            ", expected ", n, "x", t);
    require(static_cast<int>(adoption.size()) == n, ErrorKind::Dimension,
            "adoption vector length ", adoption.size(), " != N=", n);
    for (int j = 1; j < t; ++j) {
      require(period_labels[j] > period_labels[j - 1], ErrorKind::InvalidAdoption,
              "period labels must be strictly increasing; label[", j, "]=",
              period_labels[j], " follows ", period_labels[j - 1]);
    }
    for (int i = 0; i < n; ++i) {
      require(adoption[i] == kNeverTreated || (adoption[i] >= 1 && adoption[i] <= t),
              ErrorKind::InvalidAdoption, "unit ", unit_ids[i],
              ": adoption position ", adoption[i], " outside 1..", t);
      for (int j = 0; j < t; ++j) {
        require(std::isfinite(outcomes(i, j)), ErrorKind::Parse, "unit ", unit_ids[i],
                ", period ", period_labels[j], ": non-finite outcome");
      }
    }
  }
};

// D_it = 1{t >= G_i}: absorbing treatment, never-treated rows stay all-false.
struct TreatmentMask {
  BoolGrid treated;  // N x T

  bool at(int unit, int t) const { return treated(unit, t - 1); }
};

inline TreatmentMask build_mask(const Panel& panel) {
  const int n = panel.n_units();
  const int t = panel.n_periods();
  TreatmentMask mask;
  mask.treated = BoolGrid::Constant(n, t, false);
  for (int i = 0; i < n; ++i) {
    if (!panel.ever_treated(i)) continue;
    for (int j = panel.adoption[i]; j <= t; ++j) mask.treated(i, j - 1) = true;
  }
  return mask;
}

struct FilterResult {
  Panel panel;
  std::vector<std::string> excluded_units;
};

// Keeps units that are never treated or have at least `min_pre` pre-treatment
// periods (adoption position - 1 >= min_pre). Retained rows are untouched.
inline FilterResult filter_min_pretreatment(const Panel& panel, int min_pre) {
  require(min_pre >= 1, ErrorKind::Config, "min_pre must be >= 1, got ", min_pre);
  FilterResult result;
  std::vector<int> keep;
  for (int i = 0; i < panel.n_units(); ++i) {
    if (!panel.ever_treated(i) || panel.adoption[i] - 1 >= min_pre) {
      keep.push_back(i);
    } else {
      result.excluded_units.push_back(panel.unit_ids[i]);
    }
  }
  require(!keep.empty(), ErrorKind::EmptyPanel,
          "min_pre=", min_pre, " filter removed every unit");
  Panel& out = result.panel;
  out.period_labels = panel.period_labels;
  out.outcomes.resize(static_cast<int>(keep.size()), panel.n_periods());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.unit_ids.push_back(panel.unit_ids[keep[r]]);
    out.adoption.push_back(panel.adoption[keep[r]]);
    out.outcomes.row(static_cast<int>(r)) = panel.outcomes.row(keep[r]);
  }
  return result;
}

/*
 * Two-way fixed effects fitted on untreated (observed-control) cells only,
 * by alternating row/column demeaning. Exact on balanced grids; on the
 * unbalanced untreated-cell grid it converges to the least-squares solution
 * whenever the observation graph is connected. Treated-cell outcomes are
 * never used: they contain treatment effects.
 */
struct FixedEffects {
  std::vector<double> unit_effects;  // alpha_i, sums to zero
  std::vector<double> time_effects;  // eta_t, sums to zero
  double grand_mean = 0.0;

  double surface(int unit, int t) const {
    return grand_mean + unit_effects[unit] + time_effects[t - 1];
  }
};

struct FixedEffectsOptions {
  double tol = 1e-10;   // max absolute effect change per sweep
  int max_sweeps = 10000;
};

inline FixedEffects fit_fixed_effects(const Panel& panel, const TreatmentMask& mask,
                                      const FixedEffectsOptions& opts = {}) {
  const int n = panel.n_units();
  const int t = panel.n_periods();
  require(mask.treated.rows() == n && mask.treated.cols() == t, ErrorKind::Dimension,
          "mask dimensions do not match panel");

  std::vector<int> row_count(n, 0), col_count(t, 0);
  double total = 0.0;
  long n_untreated = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < t; ++j) {
      if (mask.treated(i, j)) continue;
      ++row_count[i];
      ++col_count[j];
      total += panel.outcomes(i, j);
      ++n_untreated;
    }
  }
  for (int i = 0; i < n; ++i) {
    require(row_count[i] > 0, ErrorKind::InestimableEffect,
            "unit ", panel.unit_ids[i], " has no untreated cells");
  }
  for (int j = 0; j < t; ++j) {
    require(col_count[j] > 0, ErrorKind::InestimableEffect,
            "period ", panel.period_labels[j], " has no untreated cells");
  }

  FixedEffects fe;
  fe.grand_mean = total / static_cast<double>(n_untreated);
  fe.unit_effects.assign(n, 0.0);
  fe.time_effects.assign(t, 0.0);

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double delta = 0.0;
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < t; ++j) {
        if (mask.treated(i, j)) continue;
        acc += panel.outcomes(i, j) - fe.grand_mean - fe.time_effects[j];
      }
      const double next = acc / row_count[i];
      delta = std::max(delta, std::abs(next - fe.unit_effects[i]));
      fe.unit_effects[i] = next;
    }
    for (int j = 0; j < t; ++j) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        if (mask.treated(i, j)) continue;
        acc += panel.outcomes(i, j) - fe.grand_mean - fe.unit_effects[i];
      }
      const double next = acc / col_count[j];
      delta = std::max(delta, std::abs(next - fe.time_effects[j]));
      fe.time_effects[j] = next;
    }
    if (delta < opts.tol) break;
  }

  // Sum-to-zero normalization; shifts are absorbed into the grand mean, so
  // fitted surfaces are unchanged.
  double a_bar = 0.0, e_bar = 0.0;
  for (double a : fe.unit_effects) a_bar += a;
  for (double e : fe.time_effects) e_bar += e;
  a_bar /= n;
  e_bar /= t;
  for (double& a : fe.unit_effects) a -= a_bar;
  for (double& e : fe.time_effects) e -= e_bar;
  fe.grand_mean += a_bar + e_bar;
  return fe;
}

// Subtracts the fixed-effect surface from every cell, treated or not, so
// effect estimates on residualized data stay comparable with levels-data
// estimates shifted by the same surface.
inline Panel residualize(const Panel& panel, const FixedEffects& fe) {
  require(static_cast<int>(fe.unit_effects.size()) == panel.n_units() &&
              static_cast<int>(fe.time_effects.size()) == panel.n_periods(),
          ErrorKind::Dimension, "fixed-effect dimensions do not match panel");
  Panel out = panel;
  for (int i = 0; i < panel.n_units(); ++i) {
    for (int j = 0; j < panel.n_periods(); ++j) {
      out.outcomes(i, j) = panel.outcomes(i, j) - fe.surface(i, j + 1);
    }
  }
  return out;
}

}  // namespace panelmc
