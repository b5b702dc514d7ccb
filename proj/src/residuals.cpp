#include "netens/residuals.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "netens/util.hpp"

namespace netens {

TargetStatistic TargetStatistic::of_term(Term t, std::string tag) {
  TargetStatistic out;
  out.name = t.name;
  out.term = std::move(t);
  out.tag_filter = std::move(tag);
  if (!out.tag_filter.empty()) out.name += "[" + out.tag_filter + "]";
  return out;
}

TargetStatistic TargetStatistic::density_of(std::string tag) {
  TargetStatistic out = of_term(Term::edges(), std::move(tag));
  out.density = true;
  out.name = "density" + out.name.substr(std::string("edges").size());
  return out;
}

TargetStatistic TargetStatistic::cumulative(Term t, std::string tag) {
  TargetStatistic out = of_term(std::move(t), std::move(tag));
  out.scope = Scope::Cumulative;
  return out;
}

TargetStatistic TargetStatistic::cumulative_density(std::string tag) {
  TargetStatistic out = density_of(std::move(tag));
  out.scope = Scope::Cumulative;
  return out;
}

bool TargetStatistic::selects(const Ensemble& ens, int s) const {
  return tag_filter.empty() || ens.has_tag(s, tag_filter);
}

TargetEval::TargetEval(const TargetStatistic& t, const Network& net)
    : spec_(std::make_unique<StatisticSpec>(StatisticSpec{{t.term}})),
      bound_(std::make_unique<BoundStats>(*spec_, net)),
      denom_(t.density ? static_cast<double>(net.dyad_count()) : 1.0) {}

namespace {

double sample_variance(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  if (n < 2) return 0.0;
  double mean = 0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / (n - 1);
}

double mean_of(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  return v.empty() ? 0.0 : m / static_cast<double>(v.size());
}

} // namespace

double variance_direct(const Eigen::MatrixXd& T) {
  if (T.rows() < 2) throw config_error("variance_direct needs at least 2 outer replicates");
  const Eigen::VectorXd tau = T.rowwise().mean();
  return (tau.array() - tau.mean()).square().sum() / (T.rows() - 1);
}

double variance_direct_adjusted(const Eigen::MatrixXd& T) {
  if (T.cols() < 2) throw config_error("variance_direct_adjusted needs at least 2 inner replicates");
  const double direct = variance_direct(T);
  const Eigen::VectorXd tau = T.rowwise().mean();
  const double mean_s2 = (T.colwise() - tau).array().square().sum() / (T.cols() - 1) / T.rows();
  return direct - mean_s2 / T.cols();
}

double variance_total(const Eigen::MatrixXd& T) {
  if (T.rows() < 2) throw config_error("variance_total needs at least 2 outer replicates");
  if (T.cols() < 2) throw config_error("variance_total needs at least 2 inner replicates");
  const double grand = T.mean();
  const double pooled = (T.array() - grand).square().sum() / (T.size() - 1);
  const Eigen::VectorXd tau = T.rowwise().mean();
  const double mean_s2 = (T.colwise() - tau).array().square().sum() / (T.cols() - 1) / T.rows();
  return pooled - mean_s2;
}

Eigen::MatrixXd nested_target_draws(const Network& net, const BoundStats& model_bound, const Eigen::VectorXd& theta,
                                    const TargetEval& ev, int R1, int R2, const McmcOptions& mcmc, uint64_t seed) {
  Eigen::MatrixXd T(R1, R2);
  Rng outer_rng(derive_seed(seed, "nested-outer"));
  int r1 = 0;
  sample_graphs(net, model_bound, theta, false, R1, mcmc, outer_rng, [&](const Network& outer, const Eigen::VectorXd&) {
    Rng inner_rng(derive_seed(seed, "nested-inner", static_cast<uint64_t>(r1)));
    int r2 = 0;
    sample_graphs(outer, model_bound, theta, true, R2, mcmc, inner_rng,
                  [&](const Network& state, const Eigen::VectorXd&) { T(r1, r2++) = ev(state); });
    ++r1;
  });
  return T;
}

namespace {

struct Pieces {
  double point = 0, expectation = 0, variance = 0;
  bool exact = false;
};

Pieces compute_pieces(const Network& net, const BoundStats& mb, const Eigen::VectorXd& theta, const TargetEval& ev,
                      const NestedSimPlan& plan, uint64_t stream) {
  const bool force = plan.compute.force_mcmc;
  const int cap = plan.compute.enum_cap;
  const bool full = net.fully_observed();
  const bool e_unc = !force && enumerable(net, false, cap);
  const bool e_cond = !force && enumerable(net, true, cap);
  const auto value = [&](const Network& s) { return ev(s); };
  Pieces out;

  if (full) {
    out.point = ev(net);
  } else if (e_cond) {
    out.point = conditional_target_moments(net, mb, theta, value, cap).mean;
  } else {
    Rng rng(derive_seed(stream, "point"));
    double acc = 0;
    sample_graphs(net, mb, theta, true, plan.R1, plan.compute.mcmc, rng,
                  [&](const Network& s, const Eigen::VectorXd&) { acc += ev(s); });
    out.point = acc / plan.R1;
  }

  if (e_unc) {
    const TargetDecomposition td = target_decomposition(net, mb, theta, value, cap);
    out.expectation = td.mean;
    out.variance = full ? td.var : td.var_cond_mean;
    out.exact = true;
    return out;
  }

  // Simulated path: one chain of R1 complete draws. Each draw is a toggled
  // copy of the data network, so it carries the data's masks — its observed
  // part is exactly obs() of the simulated network.
  if (plan.R1 < 2) throw config_error("nested simulation needs R1 >= 2");
  std::vector<double> outer_vals(static_cast<std::size_t>(plan.R1));
  std::vector<double> tau, s2, pooled;
  const bool inner_exact = e_cond; // force_mcmc turns this off too
  if (!full) {
    tau.resize(static_cast<std::size_t>(plan.R1));
    s2.resize(static_cast<std::size_t>(plan.R1));
    if (!inner_exact) {
      if (plan.R2 < 2) throw config_error("nested simulation needs R2 >= 2 when inner moments are sampled");
      pooled.reserve(static_cast<std::size_t>(plan.R1) * static_cast<std::size_t>(plan.R2));
    }
  }

  Rng outer_rng(derive_seed(stream, "outer"));
  int r = 0;
  sample_graphs(net, mb, theta, false, plan.R1, plan.compute.mcmc, outer_rng,
                [&](const Network& outer, const Eigen::VectorXd&) {
                  outer_vals[static_cast<std::size_t>(r)] = ev(outer);
                  if (!full) {
                    if (inner_exact) {
                      const TargetMoments tm = conditional_target_moments(outer, mb, theta, value, cap);
                      tau[static_cast<std::size_t>(r)] = tm.mean;
                      s2[static_cast<std::size_t>(r)] = tm.var;
                    } else {
                      Rng inner_rng(derive_seed(stream, "inner", static_cast<uint64_t>(r)));
                      std::vector<double> vals;
                      vals.reserve(static_cast<std::size_t>(plan.R2));
                      sample_graphs(outer, mb, theta, true, plan.R2, plan.compute.mcmc, inner_rng,
                                    [&](const Network& state, const Eigen::VectorXd&) { vals.push_back(ev(state)); });
                      tau[static_cast<std::size_t>(r)] = mean_of(vals);
                      s2[static_cast<std::size_t>(r)] = sample_variance(vals);
                      pooled.insert(pooled.end(), vals.begin(), vals.end());
                    }
                  }
                  ++r;
                });

  out.expectation = mean_of(outer_vals);
  if (full) {
    out.variance = sample_variance(outer_vals);
    return out;
  }
  if (inner_exact) {
    // inner means carry no simulation noise: every estimator reduces to the
    // sample variance of the exact conditional expectations
    out.variance = sample_variance(tau);
    return out;
  }
  switch (plan.estimator) {
    case NestedSimPlan::Estimator::Direct:
      out.variance = sample_variance(tau);
      break;
    case NestedSimPlan::Estimator::DirectAdjusted:
      out.variance = sample_variance(tau) - mean_of(s2) / plan.R2;
      break;
    case NestedSimPlan::Estimator::TotalVariance:
      out.variance = sample_variance(pooled) - mean_of(s2);
      break;
  }
  return out;
}

ResidualRecord make_record(const Ensemble& ens, int s, const TargetStatistic& target, const Pieces& pc) {
  ResidualRecord rec;
  rec.net_id = ens.networks[s].id();
  rec.target = target.name;
  rec.point = pc.point;
  rec.expectation = pc.expectation;
  rec.variance_hat = pc.variance;
  rec.exact = pc.exact;
  rec.n = ens.networks[s].node_count();
  rec.tags = ens.tags[s];
  const double scale = std::max({1.0, pc.point * pc.point, pc.expectation * pc.expectation});
  rec.degenerate = !(pc.variance > 1e-12 * scale);
  rec.residual = rec.degenerate ? std::numeric_limits<double>::quiet_NaN()
                                : (pc.point - pc.expectation) / std::sqrt(pc.variance);
  return rec;
}

} // namespace

std::vector<ResidualRecord> pearson_residuals(const Ensemble& ens, const ParamMatrix& B,
                                              const TargetStatistic& target, const NestedSimPlan& plan) {
  if (target.scope != TargetStatistic::Scope::PerNetwork)
    throw config_error("pearson_residuals needs a per-network target");
  ens.validate();
  B.validate();

  std::vector<int> sel;
  for (int s = 0; s < ens.size(); ++s)
    if (target.selects(ens, s)) sel.push_back(s);

  std::vector<ResidualRecord> records(sel.size());
  parallel_for(static_cast<int>(sel.size()), plan.threads, [&](int i) {
    const int s = sel[static_cast<std::size_t>(i)];
    const Network& net = ens.networks[s];
    const BoundStats mb(ens.spec, net);
    const TargetEval ev(target, net);
    const Eigen::VectorXd theta = theta_for(B, ens.x_row(s));
    const uint64_t stream =
        derive_seed(plan.seed, "pearson", fnv1a(net.id()) ^ fnv1a(target.name), static_cast<uint64_t>(s));
    records[static_cast<std::size_t>(i)] = make_record(ens, s, target, compute_pieces(net, mb, theta, ev, plan, stream));
  });
  return records;
}

std::vector<ResidualRecord> pearson_residuals(const Ensemble& ens, const ParamMatrix& B,
                                              const std::vector<TargetStatistic>& targets,
                                              const NestedSimPlan& plan) {
  std::vector<ResidualRecord> all;
  for (const TargetStatistic& t : targets) {
    std::vector<ResidualRecord> part = pearson_residuals(ens, B, t, plan);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return all;
}

std::vector<DensityErrorCell> density_error_summary(const Ensemble& ens, const ParamMatrix& B,
                                                    const NestedSimPlan& plan) {
  ens.validate();
  B.validate();
  const TargetStatistic target = TargetStatistic::density_of();

  std::vector<double> errors(static_cast<std::size_t>(ens.size()));
  parallel_for(ens.size(), plan.threads, [&](int s) {
    const Network& net = ens.networks[s];
    const BoundStats mb(ens.spec, net);
    const TargetEval ev(target, net);
    const Eigen::VectorXd theta = theta_for(B, ens.x_row(s));
    const uint64_t stream = derive_seed(plan.seed, "density-error", fnv1a(net.id()), static_cast<uint64_t>(s));
    const Pieces pc = compute_pieces(net, mb, theta, ev, plan, stream);
    errors[static_cast<std::size_t>(s)] = pc.point - pc.expectation;
  });

  std::map<std::pair<int, std::string>, std::vector<double>> cells;
  for (int s = 0; s < ens.size(); ++s) {
    std::string group;
    for (const std::string& t : ens.tags[s]) group += group.empty() ? t : "+" + t;
    cells[{ens.networks[s].node_count(), group}].push_back(errors[static_cast<std::size_t>(s)]);
  }

  std::vector<DensityErrorCell> out;
  for (const auto& [key, vals] : cells) {
    DensityErrorCell cell;
    cell.n = key.first;
    cell.group = key.second;
    cell.count = static_cast<int>(vals.size());
    cell.mean_error = mean_of(vals);
    cell.se = cell.count > 1 ? std::sqrt(sample_variance(vals) / cell.count) : 0.0;
    out.push_back(std::move(cell));
  }
  return out;
}

std::vector<SdRow> heterogeneity_sd(const std::vector<ResidualRecord>& records,
                                    const std::vector<std::string>& groups) {
  const auto row_for = [&](const std::string& name, const std::vector<double>& vals) {
    SdRow row;
    row.group = name;
    row.count = static_cast<int>(vals.size());
    if (row.count < 2) {
      row.sd = std::numeric_limits<double>::quiet_NaN();
      row.note = "skipped: fewer than 2 usable records";
    } else {
      row.sd = std::sqrt(sample_variance(vals));
    }
    return row;
  };

  std::vector<double> all;
  for (const ResidualRecord& r : records)
    if (!r.degenerate) all.push_back(r.residual);

  std::vector<SdRow> out;
  out.push_back(row_for("all", all));
  for (const std::string& g : groups) {
    std::vector<double> vals;
    for (const ResidualRecord& r : records) {
      if (r.degenerate) continue;
      for (const std::string& t : r.tags)
        if (t == g) {
          vals.push_back(r.residual);
          break;
        }
    }
    out.push_back(row_for(g, vals));
  }
  return out;
}

} // namespace netens
