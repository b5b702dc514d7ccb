#include "netens/information.hpp"

#include "netens/util.hpp"

namespace netens {

// Var over obs(Y) of the conditional mean, simulated: draw full networks,
// expose each through this network's observation pattern, and take the
// spread of the resulting conditional means. The inner conditional moments
// reuse the enumeration path whenever the missing-dyad count allows it.
static Eigen::MatrixXd simulated_fisher(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                                        const InfoOptions& opts, uint64_t stream) {
  const int p = bound.dim();
  const int R = std::max(2, opts.sim_outer);
  Rng outer_rng(derive_seed(stream, "fisher-outer"));

  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(p, p);
  int r = 0;
  draw_graphs(net, bound, theta, false, R, opts.compute, outer_rng, [&](const Network& drawn, const Eigen::VectorXd&) {
    // impose the data's observation pattern on the drawn network
    Network masked = net;
    for (const Dyad& d : net.observed_dyads()) {
      const bool present = drawn.has_edge(d);
      masked.set_edge(d, present);
      masked.set_mask(d, present ? MaskState::ObservedPresent : MaskState::ObservedAbsent);
    }
    for (const Dyad& d : net.missing_dyads()) masked.set_edge(d, false);

    Eigen::VectorXd cmu;
    if (!opts.compute.force_mcmc && enumerable(masked, true, opts.compute.enum_cap)) {
      cmu = enumerate_moments(masked, bound, theta, true, opts.compute.enum_cap).mu;
    } else {
      Rng inner(derive_seed(stream, "fisher-inner", static_cast<uint64_t>(r)));
      cmu = mcmc_moments(masked, bound, theta, true, opts.compute.draws, opts.compute.mcmc, inner).mu;
    }
    m1 += cmu;
    m2.noalias() += cmu * cmu.transpose();
    ++r;
  });

  const Eigen::VectorXd mean = m1 / R;
  Eigen::MatrixXd var = (m2 / R - mean * mean.transpose()) * (static_cast<double>(R) / (R - 1));
  return 0.5 * (var + var.transpose());
}

Eigen::MatrixXd network_information(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                                    InfoMode mode, const InfoOptions& opts, uint64_t stream) {
  const bool full_enum = !opts.compute.force_mcmc && enumerable(net, false, opts.compute.enum_cap);

  // fully observed: all three modes coincide with the unconditional covariance
  if (net.fully_observed() || mode == InfoMode::Complete) {
    if (full_enum) return enumerate_moments(net, bound, theta, false, opts.compute.enum_cap).sigma;
    Rng rng(derive_seed(stream, "info-unc"));
    return mcmc_moments(net, bound, theta, false, opts.compute.draws, opts.compute.mcmc, rng).sigma;
  }

  if (mode == InfoMode::Observed) {
    Eigen::MatrixXd unc, cond;
    if (full_enum) {
      unc = enumerate_moments(net, bound, theta, false, opts.compute.enum_cap).sigma;
    } else {
      Rng rng(derive_seed(stream, "info-unc"));
      unc = mcmc_moments(net, bound, theta, false, opts.compute.draws, opts.compute.mcmc, rng).sigma;
    }
    if (!opts.compute.force_mcmc && enumerable(net, true, opts.compute.enum_cap)) {
      cond = enumerate_moments(net, bound, theta, true, opts.compute.enum_cap).sigma;
    } else {
      Rng rng(derive_seed(stream, "info-cond"));
      cond = mcmc_moments(net, bound, theta, true, opts.compute.draws, opts.compute.mcmc, rng).sigma;
    }
    return unc - cond;
  }

  // Fisher: exact via the observation-pattern decomposition when the whole
  // space enumerates, else simulated.
  if (full_enum) return conditional_decomposition(net, bound, theta, opts.compute.enum_cap).var_cond_mu;
  return simulated_fisher(net, bound, theta, opts, stream);
}

Eigen::MatrixXd ensemble_information(const Ensemble& ens, const ParamMatrix& B, InfoMode mode,
                                     const InfoOptions& opts) {
  const int S = ens.size();
  const int k = B.free_count();
  std::vector<Eigen::MatrixXd> parts(static_cast<std::size_t>(S));
  parallel_for(S, opts.threads, [&](int s) {
    const Network& net = ens.networks[s];
    const BoundStats bound(ens.spec, net);
    const Eigen::VectorXd theta = theta_for(B, ens.x_row(s));
    const Eigen::MatrixXd Z = reduced_design(B, ens.x_row(s));
    const uint64_t stream = derive_seed(opts.seed, "info", fnv1a(net.id()), static_cast<uint64_t>(s));
    const Eigen::MatrixXd M = network_information(net, bound, theta, mode, opts, stream);
    parts[static_cast<std::size_t>(s)] = Z.transpose() * M * Z;
  });
  Eigen::MatrixXd info = pairwise_sum(std::move(parts), Eigen::MatrixXd::Zero(k, k).eval());
  return 0.5 * (info + info.transpose());
}

} // namespace netens
