#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "panelmc/panel.hpp"
#include "panelmc/rng.hpp"

namespace panelmc {

/*
 * Synthetic panel generator: a low-rank factor structure U V^T plus i.i.d.
 * noise, with staggered adoption and known treatment effects injected on
 * treated cells. Serves as the oracle test-bed: the true effect grid is
 * returned alongside the panel.
 *
 * U (N x rank) and V (T x rank) have i.i.d. standard-normal entries, each
 * multiplied by factor_scale, so the outcome scale is roughly
 * factor_scale^2 * sqrt(rank). Same seed, same output, bit for bit.
 */

enum class AdoptionMechanism { RandomStaggered, FactorSelected };
enum class EffectShape { Constant, Ramp };

struct SimConfig {
  int n_units = 20;
  int n_periods = 20;
  int rank = 2;
  double factor_scale = 1.0;
  double noise_scale = 0.0;
  AdoptionMechanism adoption_mechanism = AdoptionMechanism::RandomStaggered;
  double never_fraction = 0.3;   // random-staggered: P(never treated)
  int min_adoption_period = 2;   // earliest adoption position (1-based)
  EffectShape effect_shape = EffectShape::Constant;
  double effect_base = 0.0;      // tau(k) = effect_base + effect_slope * k
  double effect_slope = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(n_units >= 1 && n_periods >= 1, ErrorKind::Config,
            "simulate: n_units and n_periods must be positive");
    require(rank >= 1 && rank <= std::min(n_units, n_periods), ErrorKind::Config,
            "simulate: rank must be in 1..min(N,T), got ", rank);
    require(factor_scale >= 0.0 && noise_scale >= 0.0, ErrorKind::Config,
            "simulate: scales must be nonnegative");
    require(never_fraction >= 0.0 && never_fraction <= 1.0, ErrorKind::Config,
            "simulate: never_fraction must be in [0,1]");
    require(min_adoption_period >= 1 && min_adoption_period <= n_periods,
            ErrorKind::Config, "simulate: min_adoption_period outside 1..T");
  }
};

struct SimResult {
  Panel panel;
  Eigen::MatrixXd true_effects;  // N x T, zero on untreated cells
};

inline SimResult simulate_panel(const SimConfig& config) {
  config.validate();
  const int n = config.n_units;
  const int t = config.n_periods;
  std::mt19937_64 engine = make_engine(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  // Draw order is fixed: U row-major, V row-major, noise row-major, then
  // per-unit adoption draws. Changing it would silently break seeds.
  Eigen::MatrixXd factors_u(n, config.rank), factors_v(t, config.rank);
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < config.rank; ++r) factors_u(i, r) = config.factor_scale * normal(engine);
  for (int j = 0; j < t; ++j)
    for (int r = 0; r < config.rank; ++r) factors_v(j, r) = config.factor_scale * normal(engine);

  SimResult result;
  Panel& panel = result.panel;
  panel.outcomes = factors_u * factors_v.transpose();
  if (config.noise_scale > 0.0) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < t; ++j) panel.outcomes(i, j) += config.noise_scale * normal(engine);
  }

  panel.unit_ids.reserve(n);
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "u%04d", i + 1);
    panel.unit_ids.emplace_back(buf);
  }
  panel.period_labels.resize(t);
  for (int j = 0; j < t; ++j) panel.period_labels[j] = j + 1;

  panel.adoption.assign(n, kNeverTreated);
  std::uniform_int_distribution<int> adopt_period(config.min_adoption_period, t);
  for (int i = 0; i < n; ++i) {
    bool treated = false;
    if (config.adoption_mechanism == AdoptionMechanism::RandomStaggered) {
      treated = uniform(engine) >= config.never_fraction;
    } else {
      // Factor-selected: adoption probability rises with the unit's first
      // factor loading, producing selection on the latent structure (MNAR).
      const double z = config.factor_scale > 0.0
                           ? factors_u(i, 0) / config.factor_scale
                           : 0.0;
      treated = uniform(engine) < 1.0 / (1.0 + std::exp(-z));
    }
    if (treated) panel.adoption[i] = adopt_period(engine);
  }

  result.true_effects = Eigen::MatrixXd::Zero(n, t);
  for (int i = 0; i < n; ++i) {
    if (!panel.ever_treated(i)) continue;
    for (int tj = panel.adoption[i]; tj <= t; ++tj) {
      const int k = tj - panel.adoption[i];
      double tau = config.effect_base;
      if (config.effect_shape == EffectShape::Ramp) tau += config.effect_slope * k;
      result.true_effects(i, tj - 1) = tau;
      panel.outcomes(i, tj - 1) += tau;
    }
  }
  panel.validate();
  return result;
}

}  // namespace panelmc
