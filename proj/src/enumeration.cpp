#include "netens/enumeration.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "netens/util.hpp"

namespace netens {

std::vector<Dyad> variable_dyads(const Network& net, bool conditional) {
  if (conditional) return net.missing_dyads();
  std::vector<Dyad> all;
  all.reserve(static_cast<std::size_t>(net.dyad_count()));
  for (int idx = 0; idx < net.dyad_count(); ++idx) all.push_back(net.dyad_at(idx));
  return all;
}

bool enumerable(const Network& net, bool conditional, int cap) {
  return static_cast<int>(variable_dyads(net, conditional).size()) <= cap;
}

static void check_cap(std::size_t m, int cap) {
  if (static_cast<int>(m) > cap)
    throw config_error(strf("enumeration over %zu dyads exceeds cap %d; use the sampling path", m, cap));
  if (m > 25) throw config_error(strf("enumeration over %zu dyads is unsupported", m));
}

void enumerate_states(Network& work, const BoundStats& bound, const std::vector<Dyad>& dyads,
                      const std::function<void(uint32_t, const Eigen::VectorXd&, const Network&)>& visit) {
  const std::size_t m = dyads.size();
  for (const Dyad& d : dyads) work.set_edge(d, false);
  Eigen::VectorXd g = bound.eval(work);
  Eigen::VectorXd delta(bound.dim());
  visit(0, g, work);
  const uint64_t total = uint64_t{1} << m;
  uint32_t bits = 0;
  for (uint64_t s = 1; s < total; ++s) {
    const int b = std::countr_zero(s);
    bound.change(work, dyads[b], delta.data());
    g += delta;
    work.toggle(dyads[b]);
    bits ^= uint32_t{1} << b;
    visit(bits, g, work);
  }
  // walk ends at the last Gray code; restore the all-absent entry state
  for (std::size_t b = 0; b < m; ++b)
    if ((bits >> b) & 1u) work.set_edge(dyads[b], false);
}

namespace {

// One pass recording <theta,g> per state (visit order), returning the max.
double log_weight_pass(Network& work, const BoundStats& bound, const std::vector<Dyad>& dyads,
                       const Eigen::VectorXd& theta, std::vector<double>& logw) {
  const uint64_t total = uint64_t{1} << dyads.size();
  logw.resize(total);
  double mx = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  enumerate_states(work, bound, dyads, [&](uint32_t, const Eigen::VectorXd& g, const Network&) {
    const double lw = theta.dot(g);
    logw[i++] = lw;
    mx = std::max(mx, lw);
  });
  return mx;
}

} // namespace

MomentEstimates enumerate_moments(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                                  bool conditional, int cap) {
  const std::vector<Dyad> dyads = variable_dyads(net, conditional);
  check_cap(dyads.size(), cap);
  const int p = bound.dim();
  Network work = net;

  std::vector<double> logw;
  const double shift = log_weight_pass(work, bound, dyads, theta, logw);

  double W = 0;
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(p, p);
  std::size_t i = 0;
  enumerate_states(work, bound, dyads, [&](uint32_t, const Eigen::VectorXd& g, const Network&) {
    const double w = std::exp(logw[i++] - shift);
    W += w;
    m1 += w * g;
    m2.noalias() += w * (g * g.transpose());
  });

  MomentEstimates out;
  out.conditional = conditional;
  out.exact = true;
  out.draws = 0;
  out.mu = m1 / W;
  out.sigma = m2 / W - out.mu * out.mu.transpose();
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();
  out.mcse = Eigen::VectorXd::Zero(p);
  out.log_normalizer = shift + std::log(W);
  return out;
}

MomentEstimates enumerate_moments(const Network& net, const StatisticSpec& spec, const Eigen::VectorXd& theta,
                                  bool conditional, int cap) {
  return enumerate_moments(net, BoundStats(spec, net), theta, conditional, cap);
}

EnumerationTable enumeration_table(const Network& net, const StatisticSpec& spec, const Eigen::VectorXd& theta,
                                   bool conditional, int cap) {
  const BoundStats bound(spec, net);
  const std::vector<Dyad> dyads = variable_dyads(net, conditional);
  check_cap(dyads.size(), cap);
  const uint64_t total = uint64_t{1} << dyads.size();

  EnumerationTable tab;
  tab.dyads = dyads;
  tab.states.resize(total);
  tab.stats.resize(static_cast<Eigen::Index>(total), spec.dim());
  tab.log_weight.resize(static_cast<Eigen::Index>(total));
  Network work = net;
  enumerate_states(work, bound, dyads, [&](uint32_t bits, const Eigen::VectorXd& g, const Network&) {
    tab.states[bits] = bits;
    tab.stats.row(bits) = g.transpose();
    tab.log_weight[bits] = theta.dot(g);
  });
  return tab;
}

ConditionalDecomposition conditional_decomposition(const Network& net, const BoundStats& bound,
                                                   const Eigen::VectorXd& theta, int cap) {
  // missing dyads in the low Gray bits: states sharing an observed pattern
  // form contiguous blocks, so per-pattern conditional moments stream in
  // O(p^2) memory.
  std::vector<Dyad> dyads = net.missing_dyads();
  const std::size_t m_low = dyads.size();
  for (const Dyad& d : net.observed_dyads()) dyads.push_back(d);
  check_cap(dyads.size(), cap);
  const int p = bound.dim();
  Network work = net;

  std::vector<double> logw;
  const double shift = log_weight_pass(work, bound, dyads, theta, logw);

  const uint64_t block = uint64_t{1} << m_low;
  double W = 0;
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd cm2 = Eigen::MatrixXd::Zero(p, p); // sum_k W_k mu_k mu_k'
  Eigen::MatrixXd es = Eigen::MatrixXd::Zero(p, p);  // sum_k W_k Sigma_k

  double bw = 0;
  Eigen::VectorXd bm1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd bm2 = Eigen::MatrixXd::Zero(p, p);
  auto close_block = [&]() {
    if (bw > 0) {
      W += bw;
      m1 += bm1;
      m2 += bm2;
      const Eigen::MatrixXd outer = bm1 * bm1.transpose() / bw;
      cm2 += outer;
      es += bm2 - outer;
    }
    bw = 0;
    bm1.setZero();
    bm2.setZero();
  };

  std::size_t i = 0;
  enumerate_states(work, bound, dyads, [&](uint32_t, const Eigen::VectorXd& g, const Network&) {
    if (i % block == 0 && i > 0) close_block();
    const double w = std::exp(logw[i++] - shift);
    bw += w;
    bm1 += w * g;
    bm2.noalias() += w * (g * g.transpose());
  });
  close_block();

  ConditionalDecomposition out;
  out.mu = m1 / W;
  out.sigma = (m2 / W - out.mu * out.mu.transpose()).eval();
  out.var_cond_mu = (cm2 / W - out.mu * out.mu.transpose()).eval();
  out.mean_cond_sigma = es / W;
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();
  out.var_cond_mu = 0.5 * (out.var_cond_mu + out.var_cond_mu.transpose()).eval();
  out.mean_cond_sigma = 0.5 * (out.mean_cond_sigma + out.mean_cond_sigma.transpose()).eval();
  out.log_normalizer = shift + std::log(W);
  return out;
}

TargetDecomposition target_decomposition(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                                         const std::function<double(const Network&)>& value, int cap) {
  std::vector<Dyad> dyads = net.missing_dyads();
  const std::size_t m_low = dyads.size();
  for (const Dyad& d : net.observed_dyads()) dyads.push_back(d);
  check_cap(dyads.size(), cap);
  Network work = net;

  std::vector<double> logw;
  const double shift = log_weight_pass(work, bound, dyads, theta, logw);

  const uint64_t block = uint64_t{1} << m_low;
  double W = 0, t1 = 0, t2 = 0, ct2 = 0, ev = 0;
  double bw = 0, ba = 0, bb = 0;
  auto close_block = [&]() {
    if (bw > 0) {
      W += bw;
      t1 += ba;
      t2 += bb;
      ct2 += ba * ba / bw;
      ev += bb - ba * ba / bw;
    }
    bw = ba = bb = 0;
  };

  std::size_t i = 0;
  enumerate_states(work, bound, dyads, [&](uint32_t, const Eigen::VectorXd&, const Network& state) {
    if (i % block == 0 && i > 0) close_block();
    const double w = std::exp(logw[i++] - shift);
    const double t = value(state);
    bw += w;
    ba += w * t;
    bb += w * t * t;
  });
  close_block();

  TargetDecomposition out;
  out.mean = t1 / W;
  out.var = t2 / W - out.mean * out.mean;
  out.var_cond_mean = ct2 / W - out.mean * out.mean;
  out.mean_cond_var = ev / W;
  return out;
}

TargetMoments conditional_target_moments(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                                         const std::function<double(const Network&)>& value, int cap) {
  const std::vector<Dyad> dyads = net.missing_dyads();
  check_cap(dyads.size(), cap);
  Network work = net;

  std::vector<double> logw;
  const double shift = log_weight_pass(work, bound, dyads, theta, logw);

  double W = 0, t1 = 0, t2 = 0;
  std::size_t i = 0;
  enumerate_states(work, bound, dyads, [&](uint32_t, const Eigen::VectorXd&, const Network& state) {
    const double w = std::exp(logw[i++] - shift);
    const double t = value(state);
    W += w;
    t1 += w * t;
    t2 += w * t * t;
  });

  TargetMoments out;
  out.mean = t1 / W;
  out.var = t2 / W - out.mean * out.mean;
  return out;
}

double enumeration_log_normalizer(const Network& net, const BoundStats& bound, const Eigen::VectorXd& theta,
                                  bool conditional, int cap) {
  const std::vector<Dyad> dyads = variable_dyads(net, conditional);
  check_cap(dyads.size(), cap);
  Network work = net;
  // streaming log-sum-exp with a running max
  double M = -std::numeric_limits<double>::infinity();
  double S = 0;
  enumerate_states(work, bound, dyads, [&](uint32_t, const Eigen::VectorXd& g, const Network&) {
    const double lw = theta.dot(g);
    if (lw <= M) {
      S += std::exp(lw - M);
    } else {
      S = S * std::exp(M - lw) + 1.0;
      M = lw;
    }
  });
  return M + std::log(S);
}

StatExtremes stat_extremes(const Network& net, const BoundStats& bound, bool conditional, int cap) {
  const std::vector<Dyad> dyads = variable_dyads(net, conditional);
  check_cap(dyads.size(), cap);
  const int p = bound.dim();
  StatExtremes out;
  out.min = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::infinity());
  out.max = Eigen::VectorXd::Constant(p, -std::numeric_limits<double>::infinity());
  Network work = net;
  enumerate_states(work, bound, dyads, [&](uint32_t, const Eigen::VectorXd& g, const Network&) {
    out.min = out.min.cwiseMin(g);
    out.max = out.max.cwiseMax(g);
  });
  return out;
}

void enumerate_draws(Network& work, const BoundStats& bound, const std::vector<Dyad>& dyads,
                     const Eigen::VectorXd& theta, int R, Rng& rng,
                     const std::function<void(const Network&, const Eigen::VectorXd&)>& visit) {
  check_cap(dyads.size(), 25);
  const uint64_t total = uint64_t{1} << dyads.size();

  std::vector<double> logw;
  const double shift = log_weight_pass(work, bound, dyads, theta, logw);

  // cumulative weights follow visit (Gray) order; cum[i] covers visits 0..i
  std::vector<double> cum(total);
  double acc = 0;
  for (uint64_t i = 0; i < total; ++i) {
    acc += std::exp(logw[i] - shift);
    cum[i] = acc;
  }

  uint32_t cur = 0; // current state bits of `work` over dyads
  for (const Dyad& d : dyads) work.set_edge(d, false);
  for (int r = 0; r < R; ++r) {
    const double u = rng.u01() * acc;
    const auto it = std::lower_bound(cum.begin(), cum.end(), u);
    const uint64_t visit_idx = static_cast<uint64_t>(it - cum.begin());
    const uint32_t bits = static_cast<uint32_t>(visit_idx ^ (visit_idx >> 1)); // Gray code of the visit index
    uint32_t diff = cur ^ bits;
    while (diff) {
      const int b = std::countr_zero(diff);
      diff &= diff - 1;
      work.toggle(dyads[b]);
    }
    cur = bits;
    visit(work, bound.eval(work));
  }
  // restore the all-absent entry state
  for (std::size_t b = 0; b < dyads.size(); ++b)
    if ((cur >> b) & 1u) work.set_edge(dyads[b], false);
}

} // namespace netens
