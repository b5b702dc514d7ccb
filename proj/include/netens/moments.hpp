#pragma once

#include <Eigen/Dense>

namespace netens {

struct MomentEstimates {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  bool conditional = false;
  Eigen::VectorXd mcse;        // per-coordinate MC standard error of mu; zero when exact
  double log_normalizer = 0.0; // log sum of exp<theta,g> over the enumerated space; NaN for MCMC
  int draws = 0;               // 0 when exact
  bool exact = true;
};

} // namespace netens
