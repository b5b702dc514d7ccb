#pragma once

#include "netens/ensemble.hpp"
#include "netens/mcmc.hpp"

namespace netens {

struct LogLik {
  double value = 0;
  double mcse = 0;  // 0 when every network took the exact path
  bool exact = true;
};

// Thermodynamic-integration settings for the non-enumerable path:
// log Z(theta) - log Z(0) = integral over t of theta . mu(t theta) dt,
// trapezoid on `grid` panels with `draws` chain samples per grid point.
struct BridgeOptions {
  int grid = 20;
  int draws = 500;
};

// Face-value ensemble log-likelihood
//   sum_s [ log sum over completions exp<theta_s, g> - log kappa_s(theta_s) ].
// Exact per network when enumerable; otherwise path-sampled from the
// uniform (theta=0) reference whose log normalizer is known in closed form.
// The reported MCSE covers chain noise, not trapezoid bias.
LogLik loglik_at(const Ensemble& ens, const ParamMatrix& B, const ComputeOptions& copts = {},
                 const BridgeOptions& bridge = {}, uint64_t seed = 0, int threads = 1);

inline double aic_of(double loglik, int k) { return -2.0 * loglik + 2.0 * k; }
// sample-size convention: number of networks in the ensemble
inline double bic_of(double loglik, int k, int n_networks) {
  return -2.0 * loglik + k * std::log(static_cast<double>(n_networks));
}

} // namespace netens
