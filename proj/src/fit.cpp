#include "netens/fit.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "netens/mathx.hpp"
#include "netens/util.hpp"

namespace netens {

namespace {

struct Range {
  Eigen::VectorXd min, max;
  void init(int p) {
    min = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::infinity());
    max = Eigen::VectorXd::Constant(p, -std::numeric_limits<double>::infinity());
  }
  void take(const Eigen::VectorXd& g) {
    min = min.cwiseMin(g);
    max = max.cwiseMax(g);
  }
};

// attainable statistic ranges: over all graphs, and over completions of the
// observed part
struct NetRanges {
  Range global, cond;
};

NetRanges net_ranges(const Network& net, const BoundStats& bound, int fills, int cap, uint64_t stream) {
  NetRanges out;
  const int p = bound.dim();
  Rng rng(derive_seed(stream, "boundary"));

  if (enumerable(net, false, cap)) {
    const StatExtremes ex = stat_extremes(net, bound, false, cap);
    out.global = {ex.min, ex.max};
  } else {
    out.global.init(p);
    Network work = net;
    const std::vector<Dyad> all = variable_dyads(net, false);
    for (const Dyad& d : all) work.set_edge(d, false);
    out.global.take(bound.eval(work)); // empty graph
    for (const Dyad& d : all) work.set_edge(d, true);
    out.global.take(bound.eval(work)); // complete graph
    for (int f = 0; f < fills; ++f) {
      for (const Dyad& d : all) work.set_edge(d, rng.bernoulli(0.5));
      out.global.take(bound.eval(work));
    }
  }

  if (net.fully_observed()) {
    const Eigen::VectorXd g = bound.eval(net);
    out.cond = {g, g};
  } else if (enumerable(net, true, cap)) {
    const StatExtremes ex = stat_extremes(net, bound, true, cap);
    out.cond = {ex.min, ex.max};
  } else {
    out.cond.init(p);
    Network work = net;
    const std::vector<Dyad>& miss = net.missing_dyads();
    for (const Dyad& d : miss) work.set_edge(d, false);
    out.cond.take(bound.eval(work));
    for (const Dyad& d : miss) work.set_edge(d, true);
    out.cond.take(bound.eval(work));
    for (int f = 0; f < fills; ++f) {
      for (const Dyad& d : miss) work.set_edge(d, rng.bernoulli(0.5));
      out.cond.take(bound.eval(work));
    }
  }
  return out;
}

} // namespace

std::vector<std::string> boundary_scan(const Ensemble& ens, const ParamMatrix& B, int fills, int cap, uint64_t seed) {
  const auto idx = B.free_entries();
  const int k = static_cast<int>(idx.size());
  Eigen::VectorXd cond_min = Eigen::VectorXd::Zero(k), cond_max = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd glob_min = Eigen::VectorXd::Zero(k), glob_max = Eigen::VectorXd::Zero(k);

  for (int s = 0; s < ens.size(); ++s) {
    const Network& net = ens.networks[s];
    const BoundStats bound(ens.spec, net);
    const NetRanges r =
        net_ranges(net, bound, fills, cap, derive_seed(seed, "boundary-net", fnv1a(net.id()), (uint64_t)s));
    for (int j = 0; j < k; ++j) {
      const double w = ens.X(s, idx[j].first);
      const int c = idx[j].second;
      cond_min[j] += w >= 0 ? w * r.cond.min[c] : w * r.cond.max[c];
      cond_max[j] += w >= 0 ? w * r.cond.max[c] : w * r.cond.min[c];
      glob_min[j] += w >= 0 ? w * r.global.min[c] : w * r.global.max[c];
      glob_max[j] += w >= 0 ? w * r.global.max[c] : w * r.global.min[c];
    }
  }

  const auto names = coordinate_names(B, ens.covariate_names, ens.spec);
  std::vector<std::string> flagged;
  for (int j = 0; j < k; ++j) {
    const double scale = std::max({1.0, std::fabs(glob_max[j]), std::fabs(glob_min[j])});
    const double tol = 1e-9 * scale;
    if (glob_max[j] - glob_min[j] <= tol) continue; // constant coordinate: identifiability's problem
    if (cond_min[j] >= glob_max[j] - tol || cond_max[j] <= glob_min[j] + tol) flagged.push_back(names[j]);
  }
  return flagged;
}

ParamMatrix mple_init(const Ensemble& ens, const ParamMatrix& B0) {
  const auto idx = B0.free_entries();
  std::vector<int> fit_coords;
  for (std::size_t j = 0; j < idx.size(); ++j)
    if (ens.spec.terms[idx[j].second].dyad_independent()) fit_coords.push_back(static_cast<int>(j));
  if (fit_coords.empty()) return B0;
  const int m = static_cast<int>(fit_coords.size());

  // coordinates not being fitted stay at their B0 values and enter the
  // linear predictor as a fixed offset
  ParamMatrix frozen = B0;
  for (int j : fit_coords) frozen.values(idx[j].first, idx[j].second) = 0.0;

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> resp, offs;
  for (int s = 0; s < ens.size(); ++s) {
    const Network& net = ens.networks[s];
    const BoundStats bound(ens.spec, net);
    const Eigen::VectorXd theta_fixed = theta_for(frozen, ens.x_row(s));
    Network work = net;
    for (const Dyad& d : net.observed_dyads()) {
      const bool present = net.has_edge(d);
      work.set_edge(d, false);
      const Eigen::VectorXd delta = bound.change(work, d); // g(d present) - g(d absent)
      work.set_edge(d, present);
      Eigen::VectorXd row(m);
      for (int j = 0; j < m; ++j)
        row[j] = ens.X(s, idx[fit_coords[j]].first) * delta[idx[fit_coords[j]].second];
      rows.push_back(std::move(row));
      resp.push_back(present ? 1.0 : 0.0);
      offs.push_back(delta.dot(theta_fixed));
    }
  }
  const int N = static_cast<int>(rows.size());
  if (N == 0) return B0;

  Eigen::MatrixXd Xm(N, m);
  for (int i = 0; i < N; ++i) Xm.row(i) = rows[i].transpose();
  Eigen::Map<const Eigen::VectorXd> y(resp.data(), N);
  Eigen::Map<const Eigen::VectorXd> off(offs.data(), N);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
  for (int it = 0; it < 30; ++it) {
    const Eigen::VectorXd eta = Xm * beta + off;
    Eigen::VectorXd mu(N), w(N);
    for (int i = 0; i < N; ++i) {
      mu[i] = ilogit(eta[i]);
      w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-10);
    }
    const Eigen::VectorXd z = eta - off + (y - mu).cwiseQuotient(w);
    Eigen::MatrixXd XtWX = Xm.transpose() * w.asDiagonal() * Xm;
    XtWX.diagonal().array() += 1e-10;
    const Eigen::VectorXd next = XtWX.ldlt().solve(Xm.transpose() * (w.asDiagonal() * z));
    const double move = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    if (move < 1e-10) break;
  }
  // the initializer only needs to be sane, not unbounded under separation
  beta = beta.cwiseMax(-10.0).cwiseMin(10.0);

  ParamMatrix out = B0;
  Eigen::VectorXd full = B0.free_values();
  for (int j = 0; j < m; ++j) full[fit_coords[j]] = beta[j];
  out.set_free_values(full);
  return out;
}

namespace {

// per-network context reused across Newton iterations
struct NetCtx {
  const Network* net = nullptr;
  std::unique_ptr<BoundStats> bound;
  Eigen::RowVectorXd x;
  Eigen::MatrixXd Z;
  bool enum_unc = false, enum_cond = false;
  // iteration products
  Eigen::VectorXd mu_c, mu_u, mcse_c, mcse_u;
  Eigen::MatrixXd sig_c, sig_u;
  double logz_c = 0, logz_u = 0;     // exact sides only
  Eigen::MatrixXd dr_c, dr_u;        // R x p draws for the sampled sides
};

struct DrawMoments {
  Eigen::VectorXd mu, mcse;
  Eigen::MatrixXd sigma;
};

DrawMoments draw_moments(const Eigen::MatrixXd& draws) {
  const int R = static_cast<int>(draws.rows());
  const int p = static_cast<int>(draws.cols());
  DrawMoments out;
  out.mu = draws.colwise().mean().transpose();
  Eigen::MatrixXd centered = draws.rowwise() - out.mu.transpose();
  out.sigma = centered.transpose() * centered / std::max(1, R - 1);
  const int batch = std::max(1, static_cast<int>(std::llround(std::sqrt(static_cast<double>(R)))));
  const int nb = R / batch;
  out.mcse = Eigen::VectorXd::Zero(p);
  if (nb > 1) {
    Eigen::MatrixXd bm(nb, p);
    for (int b = 0; b < nb; ++b) bm.row(b) = draws.middleRows(b * batch, batch).colwise().mean();
    const Eigen::RowVectorXd gm = bm.colwise().mean();
    const Eigen::RowVectorXd bv =
        (bm.rowwise() - gm).array().square().colwise().sum() / std::max(1, nb - 1);
    out.mcse = (bv.transpose() / nb).cwiseSqrt();
  } else {
    out.mcse = (out.sigma.diagonal().cwiseMax(0.0) / std::max(1, R)).cwiseSqrt();
  }
  return out;
}

double log_mean_exp_rows(const Eigen::MatrixXd& draws, const Eigen::VectorXd& dtheta) {
  const Eigen::VectorXd h = draws * dtheta;
  return log_sum_exp(h.data(), h.size()) - std::log(static_cast<double>(h.size()));
}

} // namespace

FitResult fit_mle(const Ensemble& ens, const ParamMatrix& B0, const FitOptions& opts) {
  ens.validate();
  B0.validate();
  if (B0.q() != ens.q() || B0.p() != ens.p())
    throw config_error(strf("parameter matrix is %dx%d but ensemble needs %dx%d", B0.q(), B0.p(), ens.q(), ens.p()));
  const int k = B0.free_count();
  if (k == 0) throw config_error("mask leaves no free coordinates to estimate");

  if (opts.check_boundary) {
    const auto flagged = boundary_scan(ens, B0, opts.boundary_fills, opts.compute.enum_cap, opts.seed);
    if (!flagged.empty()) {
      std::string msg = "infinite MLE direction: observed aggregate on the attainable boundary for";
      for (const auto& n : flagged) msg += " " + n;
      throw boundary_error(msg, flagged);
    }
  }

  const int S = ens.size();
  std::vector<NetCtx> ctx(static_cast<std::size_t>(S));
  bool exact_path = !opts.compute.force_mcmc;
  for (int s = 0; s < S; ++s) {
    NetCtx& c = ctx[static_cast<std::size_t>(s)];
    c.net = &ens.networks[s];
    c.bound = std::make_unique<BoundStats>(ens.spec, *c.net);
    c.x = ens.x_row(s);
    c.Z = reduced_design(B0, c.x);
    c.enum_unc = !opts.compute.force_mcmc && enumerable(*c.net, false, opts.compute.enum_cap);
    c.enum_cond = !opts.compute.force_mcmc && enumerable(*c.net, true, opts.compute.enum_cap);
    exact_path = exact_path && c.enum_unc && c.enum_cond;
  }

  ParamMatrix B = B0;
  if (opts.init_mple && B0.free_values().isZero(0.0)) B = mple_init(ens, B0);
  Eigen::VectorXd beta = B.free_values();

  const NewtonOptions& nw = opts.newton;
  bool converged = false;
  int iterations = 0;

  for (int iter = 1; iter <= nw.max_iter; ++iter) {
    iterations = iter;

    parallel_for(S, opts.threads, [&](int s) {
      NetCtx& c = ctx[static_cast<std::size_t>(s)];
      const Eigen::VectorXd theta = theta_for(B, c.x);
      if (c.enum_cond) {
        const MomentEstimates m = enumerate_moments(*c.net, *c.bound, theta, true, opts.compute.enum_cap);
        c.mu_c = m.mu;
        c.sig_c = m.sigma;
        c.mcse_c = m.mcse;
        c.logz_c = m.log_normalizer;
      } else {
        const int R = opts.compute.draws;
        c.dr_c.resize(R, ens.p());
        Rng rng(derive_seed(opts.seed, "fit-cond", fnv1a(c.net->id()) ^ static_cast<uint64_t>(iter),
                            static_cast<uint64_t>(s)));
        int r = 0;
        sample_graphs(*c.net, *c.bound, theta, true, R, opts.compute.mcmc, rng,
                      [&](const Network&, const Eigen::VectorXd& g) { c.dr_c.row(r++) = g.transpose(); });
        const DrawMoments m = draw_moments(c.dr_c);
        c.mu_c = m.mu;
        c.sig_c = m.sigma;
        c.mcse_c = m.mcse;
      }
      if (c.enum_unc) {
        const MomentEstimates m = enumerate_moments(*c.net, *c.bound, theta, false, opts.compute.enum_cap);
        c.mu_u = m.mu;
        c.sig_u = m.sigma;
        c.mcse_u = m.mcse;
        c.logz_u = m.log_normalizer;
      } else {
        const int R = opts.compute.draws;
        c.dr_u.resize(R, ens.p());
        Rng rng(derive_seed(opts.seed, "fit-unc", fnv1a(c.net->id()) ^ static_cast<uint64_t>(iter),
                            static_cast<uint64_t>(s)));
        int r = 0;
        sample_graphs(*c.net, *c.bound, theta, false, R, opts.compute.mcmc, rng,
                      [&](const Network&, const Eigen::VectorXd& g) { c.dr_u.row(r++) = g.transpose(); });
        const DrawMoments m = draw_moments(c.dr_u);
        c.mu_u = m.mu;
        c.sig_u = m.sigma;
        c.mcse_u = m.mcse;
      }
    });

    std::vector<Eigen::VectorXd> score_parts(static_cast<std::size_t>(S));
    std::vector<Eigen::MatrixXd> hess_parts(static_cast<std::size_t>(S));
    Eigen::VectorXd score_var = Eigen::VectorXd::Zero(k);
    for (int s = 0; s < S; ++s) {
      const NetCtx& c = ctx[static_cast<std::size_t>(s)];
      score_parts[static_cast<std::size_t>(s)] = c.Z.transpose() * (c.mu_c - c.mu_u);
      hess_parts[static_cast<std::size_t>(s)] = c.Z.transpose() * (c.sig_u - c.sig_c) * c.Z;
      const Eigen::VectorXd v = c.mcse_c.array().square() + c.mcse_u.array().square();
      score_var += (c.Z.transpose().array().square().matrix() * v).eval();
    }
    const Eigen::VectorXd score = pairwise_sum(std::move(score_parts), Eigen::VectorXd::Zero(k).eval());
    Eigen::MatrixXd H = pairwise_sum(std::move(hess_parts), Eigen::MatrixXd::Zero(k, k).eval());
    H = 0.5 * (H + H.transpose()).eval();
    const Eigen::VectorXd score_mcse = score_var.cwiseSqrt();

    bool ok = true;
    for (int j = 0; j < k; ++j) {
      const double gate = exact_path ? nw.tol : std::max(nw.tol, nw.mcse_mult * score_mcse[j]);
      if (std::fabs(score[j]) > gate) ok = false;
    }
    if (ok) {
      converged = true;
      break;
    }

    // damped Newton direction
    Eigen::VectorXd delta;
    double lambda = 0.0;
    const double dmax = std::max(1e-12, H.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 10; ++attempt) {
      Eigen::MatrixXd Hreg = H;
      Hreg.diagonal().array() += lambda;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(Hreg);
      bool good = ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all();
      if (good) {
        delta = ldlt.solve(score);
        good = delta.allFinite() && delta.dot(score) > 0.0;
      }
      if (good) break;
      lambda = lambda == 0.0 ? 1e-6 * dmax : lambda * 10.0;
      delta.resize(0);
    }
    if (delta.size() == 0) delta = score / dmax; // last resort: scaled ascent

    const double dn = delta.cwiseAbs().maxCoeff();
    if (dn > nw.trust_radius) delta *= nw.trust_radius / dn;

    // step-halve on the estimated log-likelihood change
    const double slack = exact_path ? 1e-9 : 0.05;
    Eigen::VectorXd accepted = beta + delta; // fallback: smallest tried step
    for (int h = 0; h <= nw.max_halvings; ++h) {
      const Eigen::VectorXd cand = beta + delta / std::pow(2.0, h);
      ParamMatrix Bc = B;
      Bc.set_free_values(cand);
      double dll = 0;
      for (int s = 0; s < S; ++s) {
        const NetCtx& c = ctx[static_cast<std::size_t>(s)];
        const Eigen::VectorXd th_new = theta_for(Bc, c.x);
        const Eigen::VectorXd th_old = theta_for(B, c.x);
        const Eigen::VectorXd dth = th_new - th_old;
        double dc, du;
        if (c.enum_cond)
          dc = enumeration_log_normalizer(*c.net, *c.bound, th_new, true, opts.compute.enum_cap) - c.logz_c;
        else
          dc = log_mean_exp_rows(c.dr_c, dth);
        if (c.enum_unc)
          du = enumeration_log_normalizer(*c.net, *c.bound, th_new, false, opts.compute.enum_cap) - c.logz_u;
        else
          du = log_mean_exp_rows(c.dr_u, dth);
        dll += dc - du;
      }
      accepted = cand;
      if (dll >= -slack) break;
    }
    beta = accepted;
    B.set_free_values(beta);
  }

  if (!converged) {
    std::vector<double> last(beta.data(), beta.data() + beta.size());
    throw convergence_error(strf("no convergence after %d iterations", iterations), last, iterations);
  }

  FitResult res;
  res.B_hat = B;
  res.vec_B_hat = beta;
  res.coord_names = coordinate_names(B, ens.covariate_names, ens.spec);
  res.iterations = iterations;
  res.converged = true;
  res.exact_path = exact_path;
  res.seed = opts.seed;

  InfoOptions io;
  io.compute = opts.compute;
  io.sim_outer = opts.info_sim_outer;
  io.threads = opts.threads;
  io.seed = derive_seed(opts.seed, "post-info");
  res.info = ensemble_information(ens, B, InfoMode::Fisher, io);

  res.se = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::quiet_NaN());
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(res.info);
  if (lu.isInvertible()) {
    const Eigen::MatrixXd inv = lu.inverse();
    res.se = inv.diagonal().cwiseMax(0.0).cwiseSqrt();
  }

  if (opts.skip_loglik) {
    res.loglik = std::numeric_limits<double>::quiet_NaN();
    res.loglik_mcse = std::numeric_limits<double>::quiet_NaN();
  } else {
    const LogLik ll =
        loglik_at(ens, B, opts.compute, opts.bridge, derive_seed(opts.seed, "loglik-final"), opts.threads);
    res.loglik = ll.value;
    res.loglik_mcse = ll.mcse;
  }
  return res;
}

} // namespace netens
