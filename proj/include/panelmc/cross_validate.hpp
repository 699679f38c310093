#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "panelmc/rng.hpp"
#include "panelmc/soft_impute.hpp"

namespace panelmc {

/*
 * Hyper-parameter selection for the regularization level. Three schemes:
 *
 *   observed-kfold      k-fold over the observed (untreated) cells; each fold
 *                       is additionally masked, the completion is scored by
 *                       squared error on the held-out cells.
 *   missing-fraction    repeatedly hold out a random observed subset sized so
 *                       the held-out fraction of observed data equals the
 *                       matrix's overall missing fraction.
 *   pre-period-holdout  for eventually-treated rows, mask the last h columns
 *                       before their first missing cell and score there.
 *
 * Scoring always runs on cells with a ground-truth untreated outcome; the
 * chosen lambda minimizes mean held-out error, ties broken toward more
 * regularization.
 */

enum class CvScheme { ObservedKfold, MissingFraction, PrePeriodHoldout };

inline std::string cv_scheme_name(CvScheme scheme) {
  switch (scheme) {
    case CvScheme::ObservedKfold: return "observed-kfold";
    case CvScheme::MissingFraction: return "missing-fraction";
    case CvScheme::PrePeriodHoldout: return "pre-period-holdout";
  }
  return "?";
}

inline CvScheme cv_scheme_from_name(const std::string& name) {
  if (name == "observed-kfold") return CvScheme::ObservedKfold;
  if (name == "missing-fraction") return CvScheme::MissingFraction;
  if (name == "pre-period-holdout") return CvScheme::PrePeriodHoldout;
  fail(ErrorKind::Config, "unknown cv scheme '", name,
       "' (expected observed-kfold, missing-fraction, or pre-period-holdout)");
}

struct CvOptions {
  CvScheme scheme = CvScheme::ObservedKfold;
  int folds = 5;             // repetitions for missing-fraction
  int holdout_periods = 3;   // h for pre-period-holdout
  std::uint64_t seed = 0;
  SoftImputeOptions mc{};
};

struct CVReport {
  std::vector<double> lambda_grid;               // descending
  std::vector<std::vector<double>> fold_errors;  // [lambda][fold]
  std::vector<double> mean_errors;               // [lambda]
  double chosen_lambda = 0.0;
  CvScheme scheme = CvScheme::ObservedKfold;
  std::uint64_t seed = 0;
};

// Lambda above the largest singular value of the zero-filled observed matrix
// shrinks the solution to zero; the default grid spans down four decades.
inline double lambda_max(const Eigen::MatrixXd& data, const BoolGrid& observed) {
  Eigen::MatrixXd filled = Eigen::MatrixXd::Zero(data.rows(), data.cols());
  for (int i = 0; i < data.rows(); ++i)
    for (int j = 0; j < data.cols(); ++j)
      if (observed(i, j)) filled(i, j) = data(i, j);
  return singular_values(filled)[0];
}

inline std::vector<double> default_lambda_grid(const Eigen::MatrixXd& data,
                                               const BoolGrid& observed,
                                               int count = 20, double min_ratio = 1e-4) {
  require(count >= 1, ErrorKind::Config, "lambda grid needs at least one point");
  require(min_ratio > 0.0 && min_ratio <= 1.0, ErrorKind::Config,
          "lambda grid min_ratio must be in (0,1]");
  const double top = lambda_max(data, observed);
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = top;
    return grid;
  }
  const double log_top = std::log(std::max(top, 1e-300));
  const double log_bot = std::log(std::max(top * min_ratio, 1e-300));
  for (int i = 0; i < count; ++i) {
    const double f = static_cast<double>(i) / (count - 1);
    grid[i] = std::exp(log_top + f * (log_bot - log_top));
  }
  return grid;
}

namespace detail {

struct Holdout {
  std::vector<std::pair<int, int>> cells;
};

// True when masking `held` still leaves every row and column of the matrix
// with at least one observed cell.
inline bool holdout_keeps_coverage(const BoolGrid& observed,
                                   const std::vector<std::pair<int, int>>& held) {
  BoolGrid train = observed;
  for (const auto& [i, j] : held) train(i, j) = false;
  for (int i = 0; i < train.rows(); ++i) {
    bool any = false;
    for (int j = 0; j < train.cols(); ++j) any |= train(i, j);
    if (!any) return false;
  }
  for (int j = 0; j < train.cols(); ++j) {
    bool any = false;
    for (int i = 0; i < train.rows(); ++i) any |= train(i, j);
    if (!any) return false;
  }
  return true;
}

inline std::vector<std::pair<int, int>> observed_cells(const BoolGrid& observed) {
  std::vector<std::pair<int, int>> cells;
  for (int i = 0; i < observed.rows(); ++i)
    for (int j = 0; j < observed.cols(); ++j)
      if (observed(i, j)) cells.emplace_back(i, j);
  return cells;
}

inline std::vector<Holdout> make_kfold_holdouts(const BoolGrid& observed, int folds,
                                                std::mt19937_64& engine) {
  auto cells = observed_cells(observed);
  require(static_cast<int>(cells.size()) >= folds, ErrorKind::RankDeficient,
          "observed-kfold: fewer observed cells than folds");
  for (int attempt = 0; attempt < 10; ++attempt) {
    std::shuffle(cells.begin(), cells.end(), engine);
    std::vector<Holdout> holdouts(folds);
    for (std::size_t c = 0; c < cells.size(); ++c)
      holdouts[c % folds].cells.push_back(cells[c]);
    bool ok = true;
    for (const Holdout& h : holdouts) ok = ok && holdout_keeps_coverage(observed, h.cells);
    if (ok) return holdouts;
  }
  fail(ErrorKind::RankDeficient,
       "observed-kfold: could not draw folds keeping every row/column covered "
       "after 10 attempts");
}

inline std::vector<Holdout> make_missing_fraction_holdouts(const BoolGrid& observed,
                                                           int reps,
                                                           std::mt19937_64& engine) {
  auto cells = observed_cells(observed);
  const long total = static_cast<long>(observed.rows()) * observed.cols();
  const long n_missing = total - static_cast<long>(cells.size());
  require(n_missing > 0, ErrorKind::EmptyAggregate,
          "missing-fraction: the matrix has no missing cells to mimic");
  const double missing_fraction = static_cast<double>(n_missing) / total;
  const long n_hold = std::max<long>(
      1, std::lround(missing_fraction * static_cast<double>(cells.size())));
  std::vector<Holdout> holdouts;
  for (int rep = 0; rep < reps; ++rep) {
    bool placed = false;
    for (int attempt = 0; attempt < 10 && !placed; ++attempt) {
      std::shuffle(cells.begin(), cells.end(), engine);
      Holdout h;
      h.cells.assign(cells.begin(), cells.begin() + n_hold);
      if (holdout_keeps_coverage(observed, h.cells)) {
        holdouts.push_back(std::move(h));
        placed = true;
      }
    }
    require(placed, ErrorKind::RankDeficient,
            "missing-fraction: could not draw a holdout keeping coverage after "
            "10 attempts");
  }
  return holdouts;
}

// Eventually-treated rows are recognized by their first missing cell (the
// treatment mask makes missingness an absorbing suffix).
inline std::vector<Holdout> make_pre_period_holdout(const BoolGrid& observed, int h) {
  require(h >= 1, ErrorKind::Config, "pre-period-holdout: h must be >= 1");
  Holdout holdout;
  for (int i = 0; i < observed.rows(); ++i) {
    int first_missing = -1;
    for (int j = 0; j < observed.cols(); ++j)
      if (!observed(i, j)) {
        first_missing = j;
        break;
      }
    if (first_missing <= 0) continue;  // never treated, or no pre period at all
    const int take = std::min(h, first_missing - 1);  // keep >= 1 pre column observed
    for (int j = first_missing - take; j < first_missing; ++j)
      holdout.cells.emplace_back(i, j);
  }
  require(!holdout.cells.empty(), ErrorKind::EmptyAggregate,
          "pre-period-holdout: no eligible treated rows with enough pre periods");
  require(holdout_keeps_coverage(observed, holdout.cells), ErrorKind::RankDeficient,
          "pre-period-holdout: masking the holdout empties a row or column");
  return {holdout};
}

}  // namespace detail

inline CVReport cross_validate(const Eigen::MatrixXd& data, const BoolGrid& observed,
                               std::vector<double> lambda_grid, const CvOptions& opts) {
  require(!lambda_grid.empty(), ErrorKind::Config, "cross_validate: empty lambda grid");
  if (opts.scheme == CvScheme::ObservedKfold)
    require(opts.folds >= 2, ErrorKind::Config,
            "observed-kfold needs folds >= 2, got ", opts.folds);
  if (opts.scheme == CvScheme::MissingFraction)
    require(opts.folds >= 1, ErrorKind::Config,
            "missing-fraction needs folds >= 1, got ", opts.folds);

  std::sort(lambda_grid.begin(), lambda_grid.end(), std::greater<double>());
  std::mt19937_64 engine = make_engine(opts.seed);

  std::vector<detail::Holdout> holdouts;
  switch (opts.scheme) {
    case CvScheme::ObservedKfold:
      holdouts = detail::make_kfold_holdouts(observed, opts.folds, engine);
      break;
    case CvScheme::MissingFraction:
      holdouts = detail::make_missing_fraction_holdouts(observed, opts.folds, engine);
      break;
    case CvScheme::PrePeriodHoldout:
      holdouts = detail::make_pre_period_holdout(observed, opts.holdout_periods);
      break;
  }

  CVReport report;
  report.lambda_grid = lambda_grid;
  report.scheme = opts.scheme;
  report.seed = opts.seed;
  report.fold_errors.assign(lambda_grid.size(),
                            std::vector<double>(holdouts.size(), 0.0));

  for (std::size_t f = 0; f < holdouts.size(); ++f) {
    BoolGrid train = observed;
    for (const auto& [i, j] : holdouts[f].cells) train(i, j) = false;

    // Descending lambda path with warm starts: standard soft-impute practice.
    Eigen::MatrixXd warm;
    SoftImputeOptions mc = opts.mc;
    for (std::size_t l = 0; l < lambda_grid.size(); ++l) {
      mc.warm_start = (l == 0) ? nullptr : &warm;
      mc.record_objective = false;
      const MCFit fit = soft_impute(data, train, lambda_grid[l], mc);
      double sse = 0.0;
      for (const auto& [i, j] : holdouts[f].cells) {
        const double d = fit.completed(i, j) - data(i, j);
        sse += d * d;
      }
      report.fold_errors[l][f] = sse / static_cast<double>(holdouts[f].cells.size());
      warm = fit.completed;
    }
  }

  report.mean_errors.resize(lambda_grid.size());
  for (std::size_t l = 0; l < lambda_grid.size(); ++l) {
    const auto& errs = report.fold_errors[l];
    report.mean_errors[l] =
        std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size());
  }

  // Grid is descending, so scanning from the front and keeping strict "<"
  // breaks ties toward the larger lambda.
  std::size_t best = 0;
  for (std::size_t l = 1; l < lambda_grid.size(); ++l)
    if (report.mean_errors[l] < report.mean_errors[best]) best = l;
  report.chosen_lambda = lambda_grid[best];
  return report;
}

}  // namespace panelmc
