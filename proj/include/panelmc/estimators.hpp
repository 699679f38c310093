#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <vector>

#include "panelmc/effect_grid.hpp"
#include "panelmc/panel.hpp"
#include "panelmc/soft_impute.hpp"

namespace panelmc {

/*
 * Causal effect estimators. All of them produce per-cell effects
 * tau-hat(i,t) = observed - imputed counterfactual; they differ in how the
 * counterfactual is imputed:
 *
 *   full_mc_estimate   one nuclear-norm completion of the whole panel, with
 *                      treated cells as the missing set.
 *   cy_estimate        split-apply-combine completion: one small completion
 *                      per (cohort, focal period) with block missingness.
 *   combine_apply      like a CY split, but the cohort is averaged into a
 *                      single row before completing (targets the cohort ATT
 *                      directly).
 *   did_estimate       split-apply-combine difference-in-differences against
 *                      not-yet-treated units, baseline g-1.
 *   fit_twfe_pooled    the single-coefficient two-way fixed effects
 *                      regression; kept for contrast. Under effect
 *                      heterogeneity its tau need not estimate a coherent
 *                      average of effects.
 *
 * The optional `available` grid marks cells usable at all (the in-time
 * placebo truncates genuinely treated cells this way); a null pointer means
 * everything is available.
 */

namespace detail {
inline bool cell_available(const BoolGrid* available, int i, int j) {
  return available == nullptr || (*available)(i, j);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Full-matrix completion

inline EffectGrid full_mc_estimate(const Panel& panel, const TreatmentMask& mask,
                                   double lambda, const SoftImputeOptions& opts = {},
                                   const BoolGrid* available = nullptr,
                                   MCFit* fit_out = nullptr) {
  const int n = panel.n_units();
  const int t = panel.n_periods();
  EffectGrid grid;
  grid.estimator_tag = "full-mc";
  grid.lambda_used = lambda;

  bool any_treated = false;
  BoolGrid observed(n, t);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < t; ++j) {
      observed(i, j) = !mask.treated(i, j) && detail::cell_available(available, i, j);
      any_treated |= mask.treated(i, j);
    }
  if (!any_treated) return grid;  // nothing to impute

  const MCFit fit = soft_impute(panel.outcomes, observed, lambda, opts);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < t; ++j) {
      if (!detail::cell_available(available, i, j)) continue;
      const int tj = j + 1;
      if (mask.treated(i, j)) {
        grid.add(i, tj, panel.outcomes(i, j) - fit.completed(i, j), CellKind::Treated);
      } else if (panel.ever_treated(i) && tj < panel.adoption[i]) {
        grid.add(i, tj, panel.outcomes(i, j) - fit.completed(i, j), CellKind::PlaceboPre);
      }
    }
  }
  if (fit_out != nullptr) *fit_out = fit;
  return grid;
}

// ---------------------------------------------------------------------------
// CY split-apply-combine

// One split: cohort g at focal period(s) starting at t0. Columns are the
// cohort's own pre-period 1..g-1 plus the focal column(s); control rows are
// the not-yet-treated at the last focal period (never-treated included).
// Missing cells are exactly treated_rows x focal columns: block missingness.
struct CYSplit {
  int cohort = 0;                  // g, 1-based
  int focal_start = 0;             // t0, 1-based
  std::vector<int> treated_rows;   // unit indices with G_i = g
  std::vector<int> control_rows;   // unit indices with G_j > last focal
  std::vector<int> columns;        // 1-based positions: 1..g-1 then focal block
  int n_focal = 1;                 // focal columns at the tail of `columns`
};

inline CYSplit cy_split(const Panel& panel, const TreatmentMask& mask, int t0, int g,
                        int group_size = 1, const BoolGrid* available = nullptr) {
  const int t = panel.n_periods();
  require(g >= 1 && g <= t && t0 >= g && t0 <= t, ErrorKind::Config,
          "cy_split: need 1 <= g <= t0 <= T, got g=", g, ", t0=", t0);
  require(group_size >= 1, ErrorKind::Config, "cy_split: group_size must be >= 1");

  CYSplit split;
  split.cohort = g;
  split.focal_start = t0;
  split.n_focal = std::min(group_size, t - t0 + 1);
  const int last_focal = t0 + split.n_focal - 1;

  for (int tj = 1; tj < g; ++tj) split.columns.push_back(tj);
  for (int tj = t0; tj <= last_focal; ++tj) split.columns.push_back(tj);

  for (int i = 0; i < panel.n_units(); ++i) {
    if (panel.adoption[i] == g) {
      bool ok = true;
      if (available != nullptr)
        for (int tj : split.columns) ok = ok && (*available)(i, tj - 1);
      if (ok) split.treated_rows.push_back(i);
    } else if (panel.adoption[i] > last_focal) {
      bool ok = true;
      if (available != nullptr)
        for (int tj : split.columns) ok = ok && (*available)(i, tj - 1);
      if (ok) split.control_rows.push_back(i);
    }
  }
  require(!split.treated_rows.empty(), ErrorKind::EmptySplit,
          "cy_split: no units adopt at g=", g);
  require(!split.control_rows.empty(), ErrorKind::EmptySplit,
          "cy_split: no not-yet-treated controls past t0=", last_focal);

  // Invariant check: treated rows are treated at every focal column and
  // untreated before g; control rows untreated everywhere selected.
  for (int i : split.treated_rows)
    for (int tj : split.columns) {
      const bool should_be_treated = tj >= t0;
      require(mask.at(i, tj) == should_be_treated, ErrorKind::Numerical,
              "cy_split: mask does not match adoption bookkeeping");
    }
  for (int j : split.control_rows)
    for (int tj : split.columns)
      require(!mask.at(j, tj), ErrorKind::Numerical,
              "cy_split: control row treated inside the split");
  return split;
}

namespace detail {

struct SplitMatrices {
  Eigen::MatrixXd data;   // (treated + control rows) x columns
  BoolGrid observed;      // false exactly on treated rows x focal columns
};

inline SplitMatrices extract_split(const Panel& panel, const CYSplit& split) {
  const int rows = static_cast<int>(split.treated_rows.size() + split.control_rows.size());
  const int cols = static_cast<int>(split.columns.size());
  SplitMatrices m;
  m.data.resize(rows, cols);
  m.observed = BoolGrid::Constant(rows, cols, true);
  int r = 0;
  for (int i : split.treated_rows) {
    for (int c = 0; c < cols; ++c) m.data(r, c) = panel.outcomes(i, split.columns[c] - 1);
    ++r;
  }
  for (int j : split.control_rows) {
    for (int c = 0; c < cols; ++c) m.data(r, c) = panel.outcomes(j, split.columns[c] - 1);
    ++r;
  }
  const int n_pre = cols - split.n_focal;
  for (int tr = 0; tr < static_cast<int>(split.treated_rows.size()); ++tr)
    for (int c = n_pre; c < cols; ++c) m.observed(tr, c) = false;
  return m;
}

}  // namespace detail

struct CyOptions {
  int group_size = 1;
  bool placebos = true;  // also run pre-period placebo splits for gap plots
  SoftImputeOptions mc{};
};

/*
 * The CY estimator. For every cohort g (a distinct finite adoption time) and
 * focal period t0 >= g, complete the submatrix of [cohort rows + not-yet-
 * treated rows] x [pre-period columns + focal column] with the cohort's
 * focal cells missing, and take observed - imputed. With group_size = 1 each
 * treated cell belongs to exactly one split, so the splits partition the
 * estimable treated cells.
 *
 * Placebo splits reuse the machinery inside the cohort's own pre-period:
 * for each placebo column p < g the cohort's column-p cells are masked and
 * imputed from the remaining pre-period columns, keeping the scored cell out
 * of the fit.
 */
inline EffectGrid cy_estimate(const Panel& panel, const TreatmentMask& mask,
                              double lambda, const CyOptions& opts = {},
                              const BoolGrid* available = nullptr) {
  require(lambda >= 0.0, ErrorKind::Config, "cy_estimate: lambda must be >= 0");
  require(opts.group_size >= 1, ErrorKind::Config, "cy_estimate: group_size >= 1");
  const int t = panel.n_periods();
  EffectGrid grid;
  grid.estimator_tag = "cy";
  grid.lambda_used = lambda;

  std::vector<int> cohorts;
  for (int i = 0; i < panel.n_units(); ++i)
    if (panel.ever_treated(i)) cohorts.push_back(panel.adoption[i]);
  std::sort(cohorts.begin(), cohorts.end());
  cohorts.erase(std::unique(cohorts.begin(), cohorts.end()), cohorts.end());

  for (int g : cohorts) {
    std::vector<int> cohort_rows;
    for (int i = 0; i < panel.n_units(); ++i)
      if (panel.adoption[i] == g) cohort_rows.push_back(i);

    if (g == 1) {
      for (int i : cohort_rows)
        for (int tj = g; tj <= t; ++tj)
          grid.mark_inestimable(i, tj, "cohort adopts at the first period: no pre-treatment columns");
      continue;
    }

    for (int t0 = g; t0 <= t; t0 += opts.group_size) {
      CYSplit split;
      try {
        split = cy_split(panel, mask, t0, g, opts.group_size, available);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptySplit) throw;
        const int last = std::min(t, t0 + opts.group_size - 1);
        for (int i : cohort_rows)
          for (int tj = t0; tj <= last; ++tj)
            grid.mark_inestimable(i, tj, e.what());
        continue;
      }
      const auto m = detail::extract_split(panel, split);
      const MCFit fit = soft_impute(m.data, m.observed, lambda, opts.mc);
      const int n_pre = static_cast<int>(split.columns.size()) - split.n_focal;
      for (std::size_t r = 0; r < split.treated_rows.size(); ++r)
        for (int c = 0; c < split.n_focal; ++c) {
          const int tj = split.columns[n_pre + c];
          const int i = split.treated_rows[r];
          grid.add(i, tj, m.data(static_cast<int>(r), n_pre + c) -
                              fit.completed(static_cast<int>(r), n_pre + c),
                   CellKind::Treated);
        }
    }

    if (!opts.placebos) continue;
    // Placebo splits: controls must be untreated across the whole pre-period
    // block, i.e. G_j > g-1 (the cohort itself is the treated side).
    std::vector<int> placebo_controls;
    for (int j = 0; j < panel.n_units(); ++j) {
      if (panel.adoption[j] <= g) continue;  // cohort or earlier adopters
      bool ok = true;
      if (available != nullptr)
        for (int tj = 1; tj <= g - 1; ++tj) ok = ok && (*available)(j, tj - 1);
      if (ok) placebo_controls.push_back(j);
    }
    for (int p = 1; p <= g - 1; ++p) {
      if (g - 1 < 2) {
        for (int i : cohort_rows)
          grid.mark_inestimable(i, p, "placebo needs at least two pre-treatment columns");
        continue;
      }
      if (placebo_controls.empty()) {
        for (int i : cohort_rows)
          grid.mark_inestimable(i, p, "no not-yet-treated controls for the placebo split");
        continue;
      }
      std::vector<int> rows = cohort_rows;
      rows.insert(rows.end(), placebo_controls.begin(), placebo_controls.end());
      const int n_rows = static_cast<int>(rows.size());
      const int n_cols = g - 1;
      Eigen::MatrixXd data(n_rows, n_cols);
      BoolGrid observed = BoolGrid::Constant(n_rows, n_cols, true);
      for (int r = 0; r < n_rows; ++r)
        for (int c = 0; c < n_cols; ++c) data(r, c) = panel.outcomes(rows[r], c);
      for (std::size_t r = 0; r < cohort_rows.size(); ++r)
        observed(static_cast<int>(r), p - 1) = false;
      const MCFit fit = soft_impute(data, observed, lambda, opts.mc);
      for (std::size_t r = 0; r < cohort_rows.size(); ++r) {
        const int i = cohort_rows[r];
        grid.add(i, p, data(static_cast<int>(r), p - 1) -
                           fit.completed(static_cast<int>(r), p - 1),
                 CellKind::PlaceboPre);
      }
    }
  }
  return grid;
}

// Combine-apply variant: average the cohort rows into a single row before
// completing, and read off the cohort ATT at the focal period.
inline double combine_apply_estimate(const Panel& panel, const TreatmentMask& mask,
                                     double lambda, int t0, int g,
                                     const SoftImputeOptions& mc = {},
                                     const BoolGrid* available = nullptr) {
  const CYSplit split = cy_split(panel, mask, t0, g, 1, available);
  require(g >= 2, ErrorKind::EmptySplit,
          "combine_apply: cohort adopts at the first period, no pre-treatment columns");
  const auto m = detail::extract_split(panel, split);
  const int n_treated = static_cast<int>(split.treated_rows.size());
  const int n_controls = static_cast<int>(split.control_rows.size());
  const int cols = static_cast<int>(split.columns.size());

  Eigen::MatrixXd reduced(1 + n_controls, cols);
  reduced.row(0) = m.data.topRows(n_treated).colwise().mean();
  reduced.bottomRows(n_controls) = m.data.bottomRows(n_controls);
  BoolGrid observed = BoolGrid::Constant(1 + n_controls, cols, true);
  observed(0, cols - 1) = false;

  const MCFit fit = soft_impute(reduced, observed, lambda, mc);
  return reduced(0, cols - 1) - fit.completed(0, cols - 1);
}

// ---------------------------------------------------------------------------
// Difference in differences

/*
 * Split-apply-combine DiD with not-yet-treated comparisons, baseline g-1:
 *
 *   tau-hat(i,t) = [Y_it - Y_i,g-1] - mean_{j: G_j > t} [Y_jt - Y_j,g-1]
 *
 * for treated cells t >= g. Placebo-pre cells t < g-1 use the same contrast
 * with comparison units G_j > g-1, so neither column of the comparison
 * difference is treated (avoiding forbidden comparisons with already treated
 * units). t = g-1 is the baseline itself and is not scored.
 */
inline EffectGrid did_estimate(const Panel& panel, const TreatmentMask& mask,
                               const BoolGrid* available = nullptr) {
  const int t = panel.n_periods();
  EffectGrid grid;
  grid.estimator_tag = "did";

  for (int i = 0; i < panel.n_units(); ++i) {
    if (!panel.ever_treated(i)) continue;
    const int g = panel.adoption[i];
    if (g < 2) {
      for (int tj = g; tj <= t; ++tj)
        grid.mark_inestimable(i, tj, "unit adopts at the first period: no baseline");
      continue;
    }
    if (!detail::cell_available(available, i, g - 2)) continue;  // baseline cell
    for (int tj = 1; tj <= t; ++tj) {
      if (tj == g - 1) continue;
      if (!detail::cell_available(available, i, tj - 1)) continue;
      const bool treated_cell = tj >= g;
      const int min_control_adoption = treated_cell ? tj : g - 1;
      double acc = 0.0;
      int cnt = 0;
      for (int j = 0; j < panel.n_units(); ++j) {
        if (j == i || panel.adoption[j] <= min_control_adoption) continue;
        if (!detail::cell_available(available, j, tj - 1) ||
            !detail::cell_available(available, j, g - 2))
          continue;
        acc += panel.outcomes(j, tj - 1) - panel.outcomes(j, g - 2);
        ++cnt;
      }
      if (cnt == 0) {
        grid.mark_inestimable(i, tj, "no not-yet-treated comparison units");
        continue;
      }
      const double own = panel.outcomes(i, tj - 1) - panel.outcomes(i, g - 2);
      grid.add(i, tj, own - acc / cnt,
               treated_cell ? CellKind::Treated : CellKind::PlaceboPre);
    }
  }
  (void)mask;
  return grid;
}

// ---------------------------------------------------------------------------
// Pooled two-way fixed effects

// Y_it = alpha_i + eta_t + tau * D_it + eps: on a balanced grid the within
// estimator is exact two-way demeaning, tau = <D~, Y~> / <D~, D~>.
inline double fit_twfe_pooled(const Panel& panel, const TreatmentMask& mask) {
  const int n = panel.n_units();
  const int t = panel.n_periods();
  Eigen::MatrixXd d(n, t);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < t; ++j) d(i, j) = mask.treated(i, j) ? 1.0 : 0.0;

  auto demean = [n, t](Eigen::MatrixXd m) {
    const Eigen::VectorXd row_means = m.rowwise().mean();
    const Eigen::RowVectorXd col_means = m.colwise().mean();
    const double grand = m.mean();
    m.colwise() -= row_means;
    m.rowwise() -= col_means;
    m.array() += grand;
    return m;
  };
  const Eigen::MatrixXd d_tilde = demean(d);
  const Eigen::MatrixXd y_tilde = demean(panel.outcomes);
  const double denom = d_tilde.squaredNorm();
  require(denom > 1e-12 * n * t, ErrorKind::InestimableEffect,
          "fit_twfe_pooled: treatment indicator is collinear with the fixed effects");
  return (d_tilde.array() * y_tilde.array()).sum() / denom;
}

}  // namespace panelmc
