#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "netens/ensemble.hpp"
#include "netens/enumeration.hpp"
#include "netens/moments.hpp"
#include "netens/network.hpp"
#include "netens/rng.hpp"
#include "netens/stats.hpp"

namespace netens {

struct McmcOptions {
  int burnin_mult = 10;  // burn-in = burnin_mult * (#variable dyads)
  int interval_mult = 1; // steps between retained draws = interval_mult * (#variable dyads)
};

// How moment/sampling requests choose between enumeration and the chain.
struct ComputeOptions {
  int enum_cap = default_enum_cap;
  bool force_mcmc = false;
  int draws = 1000; // MCMC draws when sampling
  McmcOptions mcmc;
};

using GraphVisitor = std::function<void(const Network&, const Eigen::VectorXd&)>;

// Single-dyad-toggle Metropolis over the variable dyads (missing ones in
// conditional mode, all dyads otherwise), started from `start`'s current
// adjacency. Calls visit R times at `interval` spacing after burn-in.
void sample_graphs(const Network& start, const BoundStats& bound, const Eigen::VectorXd& theta, bool conditional,
                   int R, const McmcOptions& opts, Rng& rng, const GraphVisitor& visit);

// Exact (inverse-CDF) draws when the variable-dyad count is under the cap,
// otherwise the Metropolis chain.
void draw_graphs(const Network& start, const BoundStats& bound, const Eigen::VectorXd& theta, bool conditional,
                 int R, const ComputeOptions& opts, Rng& rng, const GraphVisitor& visit);

// Statistic vectors of R chain draws (deterministic given seed).
std::vector<Eigen::VectorXd> mcmc_sample(const Network& net, const StatisticSpec& spec, const Eigen::VectorXd& theta,
                                         bool conditional, int R, uint64_t seed, const McmcOptions& opts = {});

// Moments from chain draws; MCSE by batch means.
MomentEstimates mcmc_moments(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                             bool conditional, int R, const McmcOptions& opts, Rng& rng);

// Exact moments under the cap, chain moments above it (or when forced).
MomentEstimates moments(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta, bool conditional,
                        const ComputeOptions& opts, Rng& rng);

// R independent draws per network under theta_s = (x_s B)^T. Streams are
// keyed by (seed, net_id, network index), so results do not depend on the
// thread count. visit may be called concurrently for different networks;
// within one network, replicates arrive in order r = 0..R-1.
void ensemble_draws(const Ensemble& ens, const ParamMatrix& B, bool conditional, int R, const ComputeOptions& opts,
                    uint64_t seed, int threads,
                    const std::function<void(int s, int r, const Network&, const Eigen::VectorXd&)>& visit);

// One materialized draw per network, returned as fully observed copies
// (masks rewritten to match the drawn adjacency). rep indexes independent
// replicate draws under the same seed.
std::vector<Network> simulate_ensemble(const Ensemble& ens, const ParamMatrix& B, bool conditional,
                                       const ComputeOptions& opts, uint64_t seed, int threads, int rep = 0);

} // namespace netens
