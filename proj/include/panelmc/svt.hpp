#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "panelmc/errors.hpp"

namespace panelmc {

/*
 * Singular value soft-thresholding: the proximal operator of lambda times the
 * nuclear norm. svt(M, lambda) is the unique minimizer of
 *
 *     0.5 * ||X - M||_F^2 + lambda * ||X||_*
 *
 * computed by a dense SVD with each singular value shrunk by lambda and
 * clipped at zero. Dense SVD is deliberate: the panels this library targets
 * are at most a few hundred rows/columns.
 */

inline Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
  return Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues();
}

inline double nuclear_norm(const Eigen::MatrixXd& m) {
  return singular_values(m).sum();
}

// 0.5*||X - M||_F^2 + lambda*||X||_*, the objective svt minimizes.
inline double prox_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& m,
                             double lambda) {
  return 0.5 * (x - m).squaredNorm() + lambda * nuclear_norm(x);
}

struct SvtResult {
  Eigen::MatrixXd value;
  Eigen::VectorXd thresholded_singular_values;  // non-increasing, zeros kept
};

inline SvtResult svt_full(const Eigen::MatrixXd& m, double lambda) {
  require(lambda >= 0.0, ErrorKind::Config, "svt: lambda must be >= 0, got ", lambda);
  require(m.allFinite(), ErrorKind::Numerical, "svt: input has non-finite entries");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd sigma = svd.singularValues();
  for (int i = 0; i < sigma.size(); ++i) sigma[i] = std::max(sigma[i] - lambda, 0.0);
  SvtResult out;
  out.thresholded_singular_values = sigma;
  out.value = svd.matrixU() * sigma.asDiagonal() * svd.matrixV().transpose();
  return out;
}

inline Eigen::MatrixXd svt(const Eigen::MatrixXd& m, double lambda) {
  return svt_full(m, lambda).value;
}

}  // namespace panelmc
