#pragma once

#include <Eigen/Dense>

#include "netens/ensemble.hpp"
#include "netens/mcmc.hpp"

namespace netens {

enum class InfoMode {
  Complete, // Sum_s Z' Sigma_s(theta) Z      (no missingness adjustment)
  Observed, // Sum_s Z' [Sigma_s(theta) - Sigma_s(theta|y_obs)] Z
  Fisher,   // Sum_s Z' Var[mu_s(theta | obs(Y))] Z
};

struct InfoOptions {
  ComputeOptions compute;
  int sim_outer = 500; // outer draws for the simulated Fisher path
  int threads = 1;
  uint64_t seed = 0;
};

// k x k information of the reduced parameter vector. Per-network pieces are
// exact whenever the relevant space is enumerable, otherwise simulated.
// Singular results are returned as-is (the identifiability checker reports
// on them); nothing is raised here.
Eigen::MatrixXd ensemble_information(const Ensemble& ens, const ParamMatrix& B, InfoMode mode,
                                     const InfoOptions& opts = {});

// Per-network p x p matrix M_s for the chosen mode (exact or simulated).
Eigen::MatrixXd network_information(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                                    InfoMode mode, const InfoOptions& opts, uint64_t stream);

} // namespace netens
