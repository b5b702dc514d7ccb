#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "netens/moments.hpp"
#include "netens/network.hpp"
#include "netens/rng.hpp"
#include "netens/stats.hpp"

namespace netens {

inline constexpr int default_enum_cap = 20;

// Dyads a sampler/enumerator may vary: the missing ones in conditional
// mode, all of them otherwise.
std::vector<Dyad> variable_dyads(const Network& net, bool conditional);
bool enumerable(const Network& net, bool conditional, int cap = default_enum_cap);

// Walks all 2^m joint states of `dyads` in Gray-code order (one toggle per
// step), keeping `work` and the running statistic vector in sync. `work`
// enters with every listed dyad absent and leaves that way. visit receives
// the state bit pattern (bit b = dyads[b] present) and the exact statistics.
void enumerate_states(Network& work, const BoundStats& bound, const std::vector<Dyad>& dyads,
                      const std::function<void(uint32_t bits, const Eigen::VectorXd& g, const Network& net)>& visit);

// Exact moments of g under weights exp<theta,g> over the full space
// (conditional=false) or the completions of the observed part
// (conditional=true). Throws config_error above the cap.
MomentEstimates enumerate_moments(const Network& net, const StatisticSpec& spec, const Eigen::VectorXd& theta,
                                  bool conditional, int cap = default_enum_cap);
MomentEstimates enumerate_moments(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                                  bool conditional, int cap = default_enum_cap);

// Full-space enumeration listing every state with its statistics; row r of
// stats corresponds to states[r] (bit b = dyads[b] present). States appear
// in increasing integer order.
struct EnumerationTable {
  std::vector<Dyad> dyads;
  std::vector<uint32_t> states;
  Eigen::MatrixXd stats;
  Eigen::VectorXd log_weight; // <theta, g> per state, shifted by nothing
};
EnumerationTable enumeration_table(const Network& net, const StatisticSpec& spec, const Eigen::VectorXd& theta,
                                   bool conditional, int cap = default_enum_cap);

// Exact decomposition over the observation pattern of `net`: enumerates the
// full space, grouping states by the value of the observed dyads, and
// returns the pieces of the two information identities
//   observed:  Sigma(theta) - Sigma(theta | y_obs)
//   expected:  Sigma(theta) - E[Sigma(theta | obs(Y))]  =  Var[mu(theta | obs(Y))]
struct ConditionalDecomposition {
  Eigen::VectorXd mu;              // unconditional mean
  Eigen::MatrixXd sigma;           // unconditional covariance
  Eigen::MatrixXd mean_cond_sigma; // E over obs(Y) of conditional covariance
  Eigen::MatrixXd var_cond_mu;     // Var over obs(Y) of conditional mean
  double log_normalizer = 0.0;
};
ConditionalDecomposition conditional_decomposition(const Network& net, const BoundStats& bound,
                                                   const Eigen::VectorXd& theta, int cap = default_enum_cap);

// Scalar analogue for an arbitrary per-state functional t(y): exact
// E[t], Var[t], E[Var(t|obs(Y))] and Var[E(t|obs(Y))].
struct TargetDecomposition {
  double mean = 0, var = 0, mean_cond_var = 0, var_cond_mean = 0;
};
TargetDecomposition target_decomposition(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                                         const std::function<double(const Network&)>& value,
                                         int cap = default_enum_cap);

// Conditional mean/variance of t(y) over completions of the observed part.
struct TargetMoments {
  double mean = 0, var = 0;
};
TargetMoments conditional_target_moments(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                                         const std::function<double(const Network&)>& value,
                                         int cap = default_enum_cap);

// log sum over the enumerated space of exp<theta,g> (single streaming walk).
double enumeration_log_normalizer(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                                  bool conditional, int cap = default_enum_cap);

// Exact per-coordinate extremes of g over the enumerated space.
struct StatExtremes {
  Eigen::VectorXd min, max;
};
StatExtremes stat_extremes(const Network& net, const BoundStats& bound, bool conditional,
                           int cap = default_enum_cap);

// R independent exact draws (inverse-CDF over the enumerated space).
// visit receives the materialized network and its statistics; `work` is
// reused across draws.
void enumerate_draws(Network& work, const BoundStats& bound, const std::vector<Dyad>& dyads,
                     const Eigen::VectorXd& theta, int R, Rng& rng,
                     const std::function<void(const Network&, const Eigen::VectorXd&)>& visit);

} // namespace netens
