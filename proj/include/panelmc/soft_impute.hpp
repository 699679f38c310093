#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "panelmc/panel.hpp"
#include "panelmc/svt.hpp"

namespace panelmc {

/*
 * Soft-impute: nuclear-norm regularized matrix completion over an arbitrary
 * observed-cell set. Iterates
 *
 *     X <- svt( P_obs(data) + P_miss(X), lambda )
 *
 * which is a majorize-minimize scheme for
 *
 *     0.5 * || P_obs(X - data) ||_F^2 + lambda * ||X||_*
 *
 * so the objective is non-increasing across iterations. The regularized
 * solution may differ from the data on observed cells; that is the point,
 * not a bug.
 */

struct MCFit {
  Eigen::MatrixXd completed;        // the fitted low-rank matrix L-hat
  Eigen::VectorXd singular_values;  // of the final thresholded iterate
  double lambda = 0.0;
  int iterations = 0;
  double final_delta = 0.0;  // last relative Frobenius change
  bool converged = false;
  std::vector<double> objective_history;

  int rank() const {
    int r = 0;
    for (int i = 0; i < singular_values.size(); ++i)
      if (singular_values[i] > 0.0) ++r;
    return r;
  }
};

enum class InitFill {
  Zeros,        // missing cells start at 0 (residualized data)
  ColumnMeans,  // missing cells start at observed-cell column means (levels data)
};

struct SoftImputeOptions {
  double tol = 1e-7;    // relative Frobenius change
  int max_iter = 2000;
  InitFill init = InitFill::Zeros;
  const Eigen::MatrixXd* warm_start = nullptr;  // overrides init when set
  bool record_objective = true;
};

inline double soft_impute_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& data,
                                    const BoolGrid& observed, double lambda) {
  double sse = 0.0;
  for (int i = 0; i < data.rows(); ++i)
    for (int j = 0; j < data.cols(); ++j)
      if (observed(i, j)) {
        const double d = x(i, j) - data(i, j);
        sse += d * d;
      }
  return 0.5 * sse + lambda * nuclear_norm(x);
}

inline MCFit soft_impute(const Eigen::MatrixXd& data, const BoolGrid& observed,
                         double lambda, const SoftImputeOptions& opts = {}) {
  const int n = static_cast<int>(data.rows());
  const int t = static_cast<int>(data.cols());
  require(observed.rows() == n && observed.cols() == t, ErrorKind::Dimension,
          "soft_impute: observed grid is ", observed.rows(), "x", observed.cols(),
          ", data is ", n, "x", t);
  require(lambda >= 0.0, ErrorKind::Config, "soft_impute: lambda must be >= 0");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < t; ++j)
      require(!observed(i, j) || std::isfinite(data(i, j)), ErrorKind::Numerical,
              "soft_impute: non-finite observed entry at (", i, ",", j, ")");

  for (int i = 0; i < n; ++i) {
    bool any = false;
    for (int j = 0; j < t; ++j) any |= observed(i, j);
    require(any, ErrorKind::RankDeficient, "soft_impute: row ", i, " has no observed cells");
  }
  for (int j = 0; j < t; ++j) {
    bool any = false;
    for (int i = 0; i < n; ++i) any |= observed(i, j);
    require(any, ErrorKind::RankDeficient, "soft_impute: column ", j, " has no observed cells");
  }

  Eigen::MatrixXd x(n, t);
  if (opts.warm_start != nullptr) {
    require(opts.warm_start->rows() == n && opts.warm_start->cols() == t,
            ErrorKind::Dimension, "soft_impute: warm start has wrong shape");
    x = *opts.warm_start;
  } else {
    x.setZero();
    if (opts.init == InitFill::ColumnMeans) {
      for (int j = 0; j < t; ++j) {
        double acc = 0.0;
        int cnt = 0;
        for (int i = 0; i < n; ++i)
          if (observed(i, j)) {
            acc += data(i, j);
            ++cnt;
          }
        const double mean = acc / cnt;  // cnt > 0 by the coverage check
        for (int i = 0; i < n; ++i)
          if (!observed(i, j)) x(i, j) = mean;
      }
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < t; ++j)
        if (observed(i, j)) x(i, j) = data(i, j);
  }

  MCFit fit;
  fit.lambda = lambda;
  Eigen::MatrixXd z(n, t);
  Eigen::VectorXd sigma;
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    // Fill observed cells with data, keep current imputations elsewhere.
    z = x;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < t; ++j)
        if (observed(i, j)) z(i, j) = data(i, j);

    SvtResult step = svt_full(z, lambda);
    sigma = std::move(step.thresholded_singular_values);
    const double x_norm = x.norm();
    const double delta = (step.value - x).norm() / std::max(x_norm, 1e-12);
    x = std::move(step.value);

    fit.iterations = iter;
    fit.final_delta = delta;
    if (opts.record_objective) {
      double sse = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < t; ++j)
          if (observed(i, j)) {
            const double d = x(i, j) - data(i, j);
            sse += d * d;
          }
      fit.objective_history.push_back(0.5 * sse + lambda * sigma.sum());
    }
    if (delta < opts.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.completed = std::move(x);
  fit.singular_values = std::move(sigma);
  return fit;
}

// Largest singular value over smallest singular value still above
// `threshold`; the threshold guards against dividing by values the
// soft-thresholding shrank to (numerical) zero.
inline double condition_report(const MCFit& fit, double threshold) {
  double largest = 0.0;
  double smallest = 0.0;
  bool any = false;
  for (int i = 0; i < fit.singular_values.size(); ++i) {
    const double s = fit.singular_values[i];
    if (s > threshold) {
      if (!any) largest = s;
      smallest = s;  // values are non-increasing
      any = true;
    }
  }
  require(any, ErrorKind::DegenerateFit,
          "condition_report: no singular value above threshold ", threshold);
  return largest / smallest;
}

inline double default_condition_threshold(const MCFit& fit) {
  return fit.singular_values.size() > 0 ? 1e-8 * fit.singular_values[0] : 0.0;
}

}  // namespace panelmc
