#include "netens/mcmc.hpp"

#include <cmath>
#include <limits>

#include "netens/util.hpp"

namespace netens {

void sample_graphs(const Network& start, const BoundStats& bound, const Eigen::VectorXd& theta, bool conditional,
                   int R, const McmcOptions& opts, Rng& rng, const GraphVisitor& visit) {
  if (R < 1) throw config_error("sample_graphs: R must be >= 1");
  const std::vector<Dyad> pool = variable_dyads(start, conditional);
  Network work = start;
  Eigen::VectorXd g = bound.eval(work);

  if (pool.empty()) { // fully observed in conditional mode: a point mass
    for (int r = 0; r < R; ++r) visit(work, g);
    return;
  }

  Eigen::VectorXd delta(bound.dim());
  const int D = static_cast<int>(pool.size());
  const long long burnin = static_cast<long long>(opts.burnin_mult) * D;
  const long long interval = std::max<long long>(1, static_cast<long long>(opts.interval_mult) * D);

  auto step = [&]() {
    const Dyad& d = pool[rng.below(static_cast<uint64_t>(D))];
    bound.change(work, d, delta.data());
    const double logr = theta.dot(delta);
    if (logr >= 0.0 || rng.u01() < std::exp(logr)) {
      work.toggle(d);
      g += delta;
    }
  };

  for (long long s = 0; s < burnin; ++s) step();
  visit(work, g);
  for (int r = 1; r < R; ++r) {
    for (long long s = 0; s < interval; ++s) step();
    visit(work, g);
  }
}

void draw_graphs(const Network& start, const BoundStats& bound, const Eigen::VectorXd& theta, bool conditional,
                 int R, const ComputeOptions& opts, Rng& rng, const GraphVisitor& visit) {
  if (!opts.force_mcmc && enumerable(start, conditional, opts.enum_cap)) {
    Network work = start;
    const std::vector<Dyad> dyads = variable_dyads(start, conditional);
    enumerate_draws(work, bound, dyads, theta, R, rng, visit);
    // exact draws leave the variable dyads absent in `work`; nothing to restore on `start`
    return;
  }
  sample_graphs(start, bound, theta, conditional, R, opts.mcmc, rng, visit);
}

std::vector<Eigen::VectorXd> mcmc_sample(const Network& net, const StatisticSpec& spec, const Eigen::VectorXd& theta,
                                         bool conditional, int R, uint64_t seed, const McmcOptions& opts) {
  const BoundStats bound(spec, net);
  Rng rng(derive_seed(seed, "mcmc_sample", fnv1a(net.id())));
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(R));
  sample_graphs(net, bound, theta, conditional, R, opts, rng,
                [&](const Network&, const Eigen::VectorXd& g) { out.push_back(g); });
  return out;
}

MomentEstimates mcmc_moments(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                             bool conditional, int R, const McmcOptions& opts, Rng& rng) {
  const int p = bound.dim();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(p, p);

  // batch means for the MCSE of the chain average
  const int batch = std::max(1, static_cast<int>(std::llround(std::sqrt(static_cast<double>(R)))));
  Eigen::VectorXd batch_acc = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd bm1 = Eigen::VectorXd::Zero(p), bm2 = Eigen::VectorXd::Zero(p);
  int in_batch = 0, batches = 0;

  int r = 0;
  sample_graphs(net, bound, theta, conditional, R, opts, rng, [&](const Network&, const Eigen::VectorXd& g) {
    m1 += g;
    m2.noalias() += g * g.transpose();
    batch_acc += g;
    if (++in_batch == batch) {
      const Eigen::VectorXd bmean = batch_acc / batch;
      bm1 += bmean;
      bm2 += bmean.cwiseProduct(bmean);
      batch_acc.setZero();
      in_batch = 0;
      ++batches;
    }
    ++r;
  });

  MomentEstimates out;
  out.conditional = conditional;
  out.exact = false;
  out.draws = R;
  out.mu = m1 / R;
  out.sigma = (m2 / R - out.mu * out.mu.transpose()).eval();
  if (R > 1) out.sigma *= static_cast<double>(R) / (R - 1);
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();
  out.log_normalizer = std::numeric_limits<double>::quiet_NaN();
  if (batches > 1) {
    const Eigen::VectorXd bmean = bm1 / batches;
    Eigen::VectorXd bvar = bm2 / batches - bmean.cwiseProduct(bmean);
    bvar = bvar.cwiseMax(0.0) * (static_cast<double>(batches) / (batches - 1));
    out.mcse = (bvar / batches).cwiseSqrt();
  } else {
    // too few draws for batching; fall back on the iid formula
    out.mcse = (out.sigma.diagonal().cwiseMax(0.0) / std::max(1, R)).cwiseSqrt();
  }
  return out;
}

MomentEstimates moments(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta, bool conditional,
                        const ComputeOptions& opts, Rng& rng) {
  if (!opts.force_mcmc && enumerable(net, conditional, opts.enum_cap))
    return enumerate_moments(net, bound, theta, conditional, opts.enum_cap);
  return mcmc_moments(net, bound, theta, conditional, opts.draws, opts.mcmc, rng);
}

void ensemble_draws(const Ensemble& ens, const ParamMatrix& B, bool conditional, int R, const ComputeOptions& opts,
                    uint64_t seed, int threads,
                    const std::function<void(int, int, const Network&, const Eigen::VectorXd&)>& visit) {
  parallel_for(ens.size(), threads, [&](int s) {
    const Network& net = ens.networks[s];
    const BoundStats bound(ens.spec, net);
    const Eigen::VectorXd theta = theta_for(B, ens.x_row(s));
    Rng rng(derive_seed(seed, "ensemble-draws", fnv1a(net.id()), static_cast<uint64_t>(s)));
    int r = 0;
    draw_graphs(net, bound, theta, conditional, R, opts, rng,
                [&](const Network& drawn, const Eigen::VectorXd& g) { visit(s, r++, drawn, g); });
  });
}

std::vector<Network> simulate_ensemble(const Ensemble& ens, const ParamMatrix& B, bool conditional,
                                       const ComputeOptions& opts, uint64_t seed, int threads, int rep) {
  std::vector<Network> out(static_cast<std::size_t>(ens.size()));
  parallel_for(ens.size(), threads, [&](int s) {
    const Network& net = ens.networks[s];
    const BoundStats bound(ens.spec, net);
    const Eigen::VectorXd theta = theta_for(B, ens.x_row(s));
    Rng rng(derive_seed(seed, "simulate", fnv1a(net.id()), static_cast<uint64_t>(s) << 20 | static_cast<uint64_t>(rep)));
    draw_graphs(net, bound, theta, conditional, 1, opts, rng, [&](const Network& drawn, const Eigen::VectorXd&) {
      Network copy = drawn;
      for (int idx = 0; idx < copy.dyad_count(); ++idx) {
        const Dyad d = copy.dyad_at(idx);
        copy.set_mask(d, copy.has_edge(d) ? MaskState::ObservedPresent : MaskState::ObservedAbsent);
      }
      out[static_cast<std::size_t>(s)] = std::move(copy);
    });
  });
  return out;
}

} // namespace netens
