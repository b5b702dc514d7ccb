#pragma once

#include <memory>
#include <string>
#include <vector>

#include "netens/enumeration.hpp"
#include "netens/fit.hpp"
#include "netens/mcmc.hpp"

namespace netens {

// A scalar network feature to diagnose: any statistic term from the model
// vocabulary, optionally divided by the dyad count (density form), evaluated
// per network or accumulated over a tagged subset.
struct TargetStatistic {
  enum class Scope { PerNetwork, Cumulative };

  std::string name;
  Scope scope = Scope::PerNetwork;
  Term term = Term::edges();
  bool density = false;   // value = term count / dyad count
  std::string tag_filter; // empty: every network

  static TargetStatistic of_term(Term t, std::string tag = "");
  static TargetStatistic density_of(std::string tag = "");
  static TargetStatistic cumulative(Term t, std::string tag = "");
  static TargetStatistic cumulative_density(std::string tag = "");

  bool selects(const Ensemble& ens, int s) const;
};

// Target evaluator bound to one network's shape and attributes; valid for
// any toggled copy of that network.
class TargetEval {
public:
  TargetEval(const TargetStatistic& t, const Network& net);
  double operator()(const Network& state) const { return bound_->eval(state)[0] / denom_; }
  const BoundStats& bound() const { return *bound_; }

private:
  std::unique_ptr<StatisticSpec> spec_;
  std::unique_ptr<BoundStats> bound_;
  double denom_ = 1;
};

// Nested-simulation budget for the residual divisor: R1 outer draws of the
// complete network, R2 conditional draws per outer replicate. When the
// conditional space is enumerable the inner moments are exact and R2 is
// ignored; when the full space is enumerable no simulation runs at all.
struct NestedSimPlan {
  enum class Estimator { Direct, DirectAdjusted, TotalVariance };

  int R1 = 500;
  int R2 = 50;
  Estimator estimator = Estimator::TotalVariance;
  uint64_t seed = 0;
  int threads = 1;
  ComputeOptions compute; // enum cap / force-chain switches
};

struct ResidualRecord {
  std::string net_id;
  std::string target;
  double point = 0;        // E[t | observed part]; t(y) when fully observed
  double expectation = 0;  // E[t] under the fitted model
  double variance_hat = 0; // divisor estimate
  double residual = 0;     // (point - expectation) / sqrt(variance_hat); NaN when degenerate
  bool degenerate = false; // variance_hat not positive (or negligible relative to the points)
  bool exact = false;      // every piece enumerated, no simulation noise
  int n = 0;
  std::vector<std::string> tags;
};

// Variance-of-conditional-expectation estimators over a nested draw matrix
// T(r1, r2). direct needs R1 >= 2; the adjusted and total forms need R2 >= 2.
double variance_direct(const Eigen::MatrixXd& T);
double variance_direct_adjusted(const Eigen::MatrixXd& T);
double variance_total(const Eigen::MatrixXd& T);

// Nested chain draws of a target on one network: R1 outer complete draws,
// each followed by R2 conditional draws under its own observation pattern
// (the network's mask). Exposed for estimator studies; the residual pipeline
// prefers exact inner moments when the mask is enumerable.
Eigen::MatrixXd nested_target_draws(const Network& net, const BoundStats& model_bound, const Eigen::VectorXd& theta,
                                    const TargetEval& ev, int R1, int R2, const McmcOptions& mcmc, uint64_t seed);

// Standardised residual of `target` for every selected network:
//   R = (point - expectation) / sqrt(divisor),
// divisor = Var[t] for fully observed networks, Var[E(t|obs)] otherwise,
// estimated per plan (or enumerated exactly under the cap).
std::vector<ResidualRecord> pearson_residuals(const Ensemble& ens, const ParamMatrix& B,
                                              const TargetStatistic& target, const NestedSimPlan& plan = {});
std::vector<ResidualRecord> pearson_residuals(const Ensemble& ens, const ParamMatrix& B,
                                              const std::vector<TargetStatistic>& targets,
                                              const NestedSimPlan& plan = {});

// Raw density prediction errors (best predictor minus model expectation)
// averaged over networks grouped by (size, tag set).
struct DensityErrorCell {
  int n = 0;
  std::string group; // tags joined with '+'; empty for untagged networks
  int count = 0;
  double mean_error = 0;
  double se = 0; // sample SD / sqrt(count); 0 for singleton cells
};
std::vector<DensityErrorCell> density_error_summary(const Ensemble& ens, const ParamMatrix& B,
                                                    const NestedSimPlan& plan = {});

// Sample SDs of residuals, overall and per tag group (values near 1 are
// calibrated; materially larger ones indicate unmodelled heterogeneity).
struct SdRow {
  std::string group; // "all" or a tag
  int count = 0;
  double sd = 0; // NaN when fewer than 2 usable records
  std::string note;
};
std::vector<SdRow> heterogeneity_sd(const std::vector<ResidualRecord>& records,
                                    const std::vector<std::string>& groups);

} // namespace netens
