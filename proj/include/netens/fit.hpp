#pragma once

#include <string>
#include <vector>

#include "netens/ensemble.hpp"
#include "netens/information.hpp"
#include "netens/likelihood.hpp"
#include "netens/mcmc.hpp"

namespace netens {

struct NewtonOptions {
  int max_iter = 60;
  double tol = 1e-6;      // exact path: ||score||_inf threshold
  double mcse_mult = 4.0; // MC path: per-coordinate |score_k| <= max(tol, mult * mcse_k)
  double trust_radius = 1.0;
  int max_halvings = 12;
};

struct FitOptions {
  ComputeOptions compute;
  BridgeOptions bridge;
  NewtonOptions newton;
  uint64_t seed = 0;
  int threads = 1;
  bool init_mple = true;     // warm-start from the pseudo-likelihood fit when B0 is all zero
  bool check_boundary = true;
  int boundary_fills = 500;  // random completions probing the attainable hull
  int info_sim_outer = 500;  // outer draws for a simulated Fisher information
  bool skip_loglik = false;  // leave loglik NaN (meta-simulations that only need point estimates)
};

struct FitResult {
  ParamMatrix B_hat;
  Eigen::VectorXd vec_B_hat; // free entries, column-major
  std::vector<std::string> coord_names;
  Eigen::MatrixXd info; // Fisher-mode ensemble information at the optimum
  Eigen::VectorXd se;   // sqrt(diag(info^-1)); NaN when info is singular
  double loglik = 0;
  double loglik_mcse = 0;
  int iterations = 0;
  bool converged = false;
  bool exact_path = false; // every network enumerable: exact Newton was used
  uint64_t seed = 0;

  double aic() const { return aic_of(loglik, static_cast<int>(vec_B_hat.size())); }
  double bic(int n_networks) const { return bic_of(loglik, static_cast<int>(vec_B_hat.size()), n_networks); }
};

// Maximum-likelihood fit of the free entries of B by Newton iteration on
// the face-value score. Throws boundary_error, convergence_error,
// config_error.
FitResult fit_mle(const Ensemble& ens, const ParamMatrix& B0, const FitOptions& opts = {});

// Pseudo-likelihood initializer: logistic IRLS on the observed dyads'
// change statistics, fitting only coordinates of dyad-independent terms
// (others keep their B0 values, which also act as fixed offsets).
ParamMatrix mple_init(const Ensemble& ens, const ParamMatrix& B0);

// Advisory pre-fit boundary scan. Returns the names of reduced coordinates
// whose observed aggregate is pinned to the attainable extreme (the face-
// value MLE diverges along them). Exact under the cap, sampled otherwise.
std::vector<std::string> boundary_scan(const Ensemble& ens, const ParamMatrix& B, int fills, int cap, uint64_t seed);

} // namespace netens
