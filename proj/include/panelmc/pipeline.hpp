#pragma once

#include <optional>
#include <string>
#include <vector>

#include "panelmc/aggregate.hpp"
#include "panelmc/estimators.hpp"

namespace panelmc {

/*
 * A fully pinned estimation recipe: which estimator, at which regularization
 * level, with which solver settings. Bootstrap replicates and in-time
 * placebos re-run the same spec on perturbed panels, never re-tuning lambda.
 */

enum class EstimatorKind { FullMc, Cy, CombineApply, Did, TwfePooled };

inline std::string estimator_tag(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::FullMc: return "full-mc";
    case EstimatorKind::Cy: return "cy";
    case EstimatorKind::CombineApply: return "combine-apply";
    case EstimatorKind::Did: return "did";
    case EstimatorKind::TwfePooled: return "twfe-pooled";
  }
  return "?";
}

inline EstimatorKind estimator_from_tag(const std::string& tag) {
  if (tag == "full-mc") return EstimatorKind::FullMc;
  if (tag == "cy") return EstimatorKind::Cy;
  if (tag == "combine-apply") return EstimatorKind::CombineApply;
  if (tag == "did") return EstimatorKind::Did;
  if (tag == "twfe-pooled") return EstimatorKind::TwfePooled;
  fail(ErrorKind::Config, "unknown estimator '", tag,
       "' (expected full-mc, cy, combine-apply, did, or twfe-pooled)");
}

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::FullMc;
  double lambda = 0.0;      // ignored by did / twfe-pooled
  int group_size = 1;       // cy only
  SoftImputeOptions mc{};
};

inline bool is_per_cell(EstimatorKind kind) {
  return kind == EstimatorKind::FullMc || kind == EstimatorKind::Cy ||
         kind == EstimatorKind::Did;
}

inline EffectGrid compute_effect_grid(const Panel& panel, const TreatmentMask& mask,
                                      const EstimatorSpec& spec,
                                      const BoolGrid* available = nullptr) {
  switch (spec.kind) {
    case EstimatorKind::FullMc:
      return full_mc_estimate(panel, mask, spec.lambda, spec.mc, available);
    case EstimatorKind::Cy: {
      CyOptions opts;
      opts.group_size = spec.group_size;
      opts.mc = spec.mc;
      return cy_estimate(panel, mask, spec.lambda, opts, available);
    }
    case EstimatorKind::Did:
      return did_estimate(panel, mask, available);
    default:
      fail(ErrorKind::Config, "estimator '", estimator_tag(spec.kind),
           "' does not produce per-cell effects");
  }
}

// Combine-apply has no per-cell grid: the event study is built from cohort
// ATTs directly, weighting each cohort by its size so the k-entry estimates
// the mean over treated units at that horizon.
inline EventStudy combine_apply_event_study(const Panel& panel, const TreatmentMask& mask,
                                            const EstimatorSpec& spec, int k_min, int k_max,
                                            const BoolGrid* available = nullptr) {
  const int t = panel.n_periods();
  std::vector<int> cohorts;
  for (int i = 0; i < panel.n_units(); ++i)
    if (panel.ever_treated(i)) cohorts.push_back(panel.adoption[i]);
  std::sort(cohorts.begin(), cohorts.end());
  cohorts.erase(std::unique(cohorts.begin(), cohorts.end()), cohorts.end());

  struct Acc {
    double weighted_sum = 0.0;
    int n_units = 0;
  };
  std::map<int, Acc> by_k;

  for (int g : cohorts) {
    if (g < 2) continue;  // no pre-treatment columns
    int cohort_size = 0;
    for (int i = 0; i < panel.n_units(); ++i)
      if (panel.adoption[i] == g) ++cohort_size;

    for (int k = std::max(k_min, 0); k <= k_max; ++k) {
      const int t0 = g + k;
      if (t0 > t) break;
      try {
        const double att =
            combine_apply_estimate(panel, mask, spec.lambda, t0, g, spec.mc, available);
        by_k[k].weighted_sum += att * cohort_size;
        by_k[k].n_units += cohort_size;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptySplit && e.kind() != ErrorKind::RankDeficient)
          throw;
      }
    }

    // Placebo side: average the cohort into one row over its pre-period and
    // impute each placebo column from the others, mirroring cy_estimate.
    if (g - 1 < 2) continue;
    std::vector<int> controls;
    for (int j = 0; j < panel.n_units(); ++j) {
      if (panel.adoption[j] <= g) continue;
      bool ok = true;
      if (available != nullptr)
        for (int tj = 1; tj <= g - 1; ++tj) ok = ok && (*available)(j, tj - 1);
      if (ok) controls.push_back(j);
    }
    if (controls.empty()) continue;
    std::vector<int> cohort_rows;
    for (int i = 0; i < panel.n_units(); ++i) {
      if (panel.adoption[i] != g) continue;
      bool ok = true;
      if (available != nullptr)
        for (int tj = 1; tj <= g - 1; ++tj) ok = ok && (*available)(i, tj - 1);
      if (ok) cohort_rows.push_back(i);
    }
    if (cohort_rows.empty()) continue;

    const int n_cols = g - 1;
    Eigen::MatrixXd data(1 + static_cast<int>(controls.size()), n_cols);
    for (int c = 0; c < n_cols; ++c) {
      double acc = 0.0;
      for (int i : cohort_rows) acc += panel.outcomes(i, c);
      data(0, c) = acc / static_cast<double>(cohort_rows.size());
    }
    for (std::size_t r = 0; r < controls.size(); ++r)
      for (int c = 0; c < n_cols; ++c)
        data(1 + static_cast<int>(r), c) = panel.outcomes(controls[r], c);

    for (int p = 1; p <= g - 1; ++p) {
      const int k = p - g;
      if (k < k_min || k > k_max) continue;
      BoolGrid observed = BoolGrid::Constant(data.rows(), n_cols, true);
      observed(0, p - 1) = false;
      try {
        const MCFit fit = soft_impute(data, observed, spec.lambda, spec.mc);
        by_k[k].weighted_sum += (data(0, p - 1) - fit.completed(0, p - 1)) * cohort_size;
        by_k[k].n_units += cohort_size;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::RankDeficient) throw;
      }
    }
  }

  EventStudy study;
  study.estimator_tag = estimator_tag(EstimatorKind::CombineApply);
  for (const auto& [k, acc] : by_k) {
    if (acc.n_units == 0) continue;
    study.entries[k] =
        EventStudyEntry{acc.weighted_sum / acc.n_units, acc.n_units, std::nullopt, std::nullopt};
  }
  return study;
}

// TWFE gives a single pooled coefficient; as an event study it is a flat
// line over the post-treatment horizons actually present in the panel.
inline EventStudy twfe_event_study(const Panel& panel, const TreatmentMask& mask,
                                   int k_min, int k_max) {
  const double tau = fit_twfe_pooled(panel, mask);
  EventStudy study;
  study.estimator_tag = estimator_tag(EstimatorKind::TwfePooled);
  const int t = panel.n_periods();
  for (int k = std::max(0, k_min); k <= k_max; ++k) {
    int n = 0;
    for (int i = 0; i < panel.n_units(); ++i) {
      if (!panel.ever_treated(i)) continue;
      const int tj = panel.adoption[i] + k;
      if (tj >= 1 && tj <= t) ++n;
    }
    if (n == 0) continue;
    study.entries[k] = EventStudyEntry{tau, n, std::nullopt, std::nullopt};
  }
  return study;
}

inline EventStudy compute_event_study(const Panel& panel, const TreatmentMask& mask,
                                      const EstimatorSpec& spec, int k_min, int k_max,
                                      const BoolGrid* available = nullptr) {
  switch (spec.kind) {
    case EstimatorKind::CombineApply:
      return combine_apply_event_study(panel, mask, spec, k_min, k_max, available);
    case EstimatorKind::TwfePooled:
      require(available == nullptr, ErrorKind::Config,
              "twfe-pooled does not support availability masks");
      return twfe_event_study(panel, mask, k_min, k_max);
    default: {
      const EffectGrid grid = compute_effect_grid(panel, mask, spec, available);
      return aggregate_event(grid, panel, k_min, k_max);
    }
  }
}

}  // namespace panelmc
