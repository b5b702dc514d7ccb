#include "netens/likelihood.hpp"

#include <cmath>

#include "netens/util.hpp"

namespace netens {

namespace {

// chain estimate of theta . mu(theta_t) with a batch-means MCSE
struct ScalarMoment {
  double mean = 0, mcse = 0;
};

ScalarMoment chain_dot_moment(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta_t,
                              const Eigen::VectorXd& weight_vec, bool conditional, int draws,
                              const McmcOptions& mopts, Rng& rng) {
  const int batch = std::max(1, static_cast<int>(std::llround(std::sqrt(static_cast<double>(draws)))));
  double sum = 0, bacc = 0, b1 = 0, b2 = 0;
  int in_batch = 0, batches = 0, n = 0;
  sample_graphs(net, bound, theta_t, conditional, draws, mopts, rng, [&](const Network&, const Eigen::VectorXd& g) {
    const double h = weight_vec.dot(g);
    sum += h;
    bacc += h;
    ++n;
    if (++in_batch == batch) {
      const double bm = bacc / batch;
      b1 += bm;
      b2 += bm * bm;
      bacc = 0;
      in_batch = 0;
      ++batches;
    }
  });
  ScalarMoment out;
  out.mean = sum / n;
  if (batches > 1) {
    const double bm = b1 / batches;
    const double bv = std::max(0.0, b2 / batches - bm * bm) * (static_cast<double>(batches) / (batches - 1));
    out.mcse = std::sqrt(bv / batches);
  }
  return out;
}

// log Z(theta) - log Z(0) by trapezoid thermodynamic integration
ScalarMoment path_log_ratio(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                            bool conditional, const ComputeOptions& copts, const BridgeOptions& bridge,
                            uint64_t stream) {
  const int G = std::max(1, bridge.grid);
  double value = 0, var = 0;
  for (int i = 0; i <= G; ++i) {
    const double t = static_cast<double>(i) / G;
    const double w = (i == 0 || i == G ? 0.5 : 1.0) / G;
    Rng rng(derive_seed(stream, "path-grid", static_cast<uint64_t>(i)));
    const ScalarMoment m =
        chain_dot_moment(net, bound, (t * theta).eval(), theta, conditional, bridge.draws, copts.mcmc, rng);
    value += w * m.mean;
    var += w * w * m.mcse * m.mcse;
  }
  return {value, std::sqrt(var)};
}

} // namespace

LogLik loglik_at(const Ensemble& ens, const ParamMatrix& B, const ComputeOptions& copts, const BridgeOptions& bridge,
                 uint64_t seed, int threads) {
  const int S = ens.size();
  std::vector<double> values(static_cast<std::size_t>(S), 0.0);
  std::vector<double> variances(static_cast<std::size_t>(S), 0.0);
  std::vector<char> exact(static_cast<std::size_t>(S), 1);

  parallel_for(S, threads, [&](int s) {
    const Network& net = ens.networks[s];
    const BoundStats bound(ens.spec, net);
    const Eigen::VectorXd theta = theta_for(B, ens.x_row(s));
    const uint64_t stream = derive_seed(seed, "loglik", fnv1a(net.id()), static_cast<uint64_t>(s));
    const double D = net.dyad_count();
    const double F = static_cast<double>(net.missing_count());

    double log_zc, log_zu, var = 0;
    bool ex = true;
    if (!copts.force_mcmc && enumerable(net, true, copts.enum_cap)) {
      log_zc = enumeration_log_normalizer(net, bound, theta, true, copts.enum_cap);
    } else {
      const ScalarMoment m = path_log_ratio(net, bound, theta, true, copts, bridge, derive_seed(stream, "cond"));
      log_zc = m.mean + F * std::log(2.0);
      var += m.mcse * m.mcse;
      ex = false;
    }
    if (!copts.force_mcmc && enumerable(net, false, copts.enum_cap)) {
      log_zu = enumeration_log_normalizer(net, bound, theta, false, copts.enum_cap);
    } else {
      const ScalarMoment m = path_log_ratio(net, bound, theta, false, copts, bridge, derive_seed(stream, "unc"));
      log_zu = m.mean + D * std::log(2.0);
      var += m.mcse * m.mcse;
      ex = false;
    }
    values[static_cast<std::size_t>(s)] = log_zc - log_zu;
    variances[static_cast<std::size_t>(s)] = var;
    exact[static_cast<std::size_t>(s)] = ex ? 1 : 0;
  });

  LogLik out;
  out.value = pairwise_sum(std::move(values), 0.0);
  double tot_var = 0;
  for (double v : variances) tot_var += v;
  out.mcse = std::sqrt(tot_var);
  out.exact = std::all_of(exact.begin(), exact.end(), [](char c) { return c == 1; });
  return out;
}

} // namespace netens
