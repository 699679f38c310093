#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "panelmc/pipeline.hpp"
#include "panelmc/rng.hpp"

namespace panelmc {

/*
 * Unit-level bootstrap for event-study confidence intervals. Units are
 * resampled with replacement keeping their full time series and adoption
 * time, which respects within-unit serial dependence and arbitrary
 * heteroskedasticity across units. Intervals are percentile intervals; no
 * asymptotic variance is claimed.
 *
 * Per-replicate randomness derives from (seed, replicate index), so results
 * do not depend on execution order. Lambda is part of the estimator spec and
 * is never re-tuned inside a replicate.
 */

struct BootstrapOptions {
  int replicates = 200;  // B
  double level = 0.95;
  std::uint64_t seed = 0;
  int k_min = 0;
  int k_max = 0;
};

struct BootstrapResult {
  EventStudy study;                     // point estimates with CI bounds attached
  std::map<int, int> valid_replicates;  // per event time
  std::vector<int> suppressed_k;        // CIs withheld: too few valid replicates
  int widened_intervals = 0;  // percentile bounds nudged to contain the estimate
};

// Linear-interpolation quantile on a sorted sample; monotone in p.
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline Panel resample_units(const Panel& panel, std::mt19937_64& engine) {
  const int n = panel.n_units();
  std::uniform_int_distribution<int> pick(0, n - 1);
  Panel out;
  out.period_labels = panel.period_labels;
  out.outcomes.resize(n, panel.n_periods());
  for (int r = 0; r < n; ++r) {
    const int i = pick(engine);
    out.unit_ids.push_back(panel.unit_ids[i]);
    out.adoption.push_back(panel.adoption[i]);
    out.outcomes.row(r) = panel.outcomes.row(i);
  }
  return out;
}

inline BootstrapResult bootstrap_ci(const Panel& panel, const EstimatorSpec& spec,
                                    const BootstrapOptions& opts) {
  require(opts.replicates >= 2, ErrorKind::Config,
          "bootstrap: need at least 2 replicates, got ", opts.replicates);
  require(opts.level > 0.0 && opts.level < 1.0, ErrorKind::Config,
          "bootstrap: level must be in (0,1)");

  const TreatmentMask mask = build_mask(panel);
  BootstrapResult result;
  result.study = compute_event_study(panel, mask, spec, opts.k_min, opts.k_max);

  std::map<int, std::vector<double>> draws;
  for (int b = 0; b < opts.replicates; ++b) {
    std::mt19937_64 engine = make_engine(opts.seed, static_cast<std::uint64_t>(b));
    const Panel resampled = resample_units(panel, engine);
    EventStudy replicate;
    try {
      const TreatmentMask rmask = build_mask(resampled);
      replicate = compute_event_study(resampled, rmask, spec, opts.k_min, opts.k_max);
    } catch (const Error&) {
      continue;  // replicate estimable nowhere; contributes to no event time
    }
    for (const auto& [k, entry] : replicate.entries) draws[k].push_back(entry.estimate);
  }

  // The suppression rule targets replicates that failed to produce an event
  // time, not small B itself: with B below 20 a full set of valid replicates
  // still yields an interval.
  const int b_over_10 = (opts.replicates + 9) / 10;
  const int threshold = std::min(opts.replicates, std::max(20, b_over_10));
  const double alpha = (1.0 - opts.level) / 2.0;

  for (auto& [k, entry] : result.study.entries) {
    auto it = draws.find(k);
    const int valid = it == draws.end() ? 0 : static_cast<int>(it->second.size());
    result.valid_replicates[k] = valid;
    if (valid < threshold) {
      result.suppressed_k.push_back(k);
      continue;
    }
    std::vector<double>& v = it->second;
    std::sort(v.begin(), v.end());
    double lo = sorted_quantile(v, alpha);
    double hi = sorted_quantile(v, 1.0 - alpha);
    if (lo > entry.estimate || hi < entry.estimate) {
      ++result.widened_intervals;
      lo = std::min(lo, entry.estimate);
      hi = std::max(hi, entry.estimate);
    }
    entry.ci_low = lo;
    entry.ci_high = hi;
  }
  return result;
}

}  // namespace panelmc
