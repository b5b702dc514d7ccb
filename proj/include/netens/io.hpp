#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "netens/fit.hpp"
#include "netens/model_tests.hpp"
#include "netens/residuals.hpp"

namespace netens {

// Covariate columns injected for every network at load time, in column
// order. User covariates follow them alphabetically; supplying one of
// these names in a data file is an error.
inline const std::vector<std::string> reserved_covariates = {"1", "log_n", "log2_n"};

// One JSON object per line:
//   {"net_id": "...", "n": 5,
//    "node_attrs": {"name": [v0, ..., v_{n-1}], ...},        (optional)
//    "edges": [[i, j], ...],                                  (optional)
//    "missing_dyads": [[i, j], ...] | "egocentric:<node>",    (optional)
//    "net_covariates": {"name": value, ...},                  (optional)
//    "tags": ["label", ...]}                                  (optional)
// Dyads are 0-based and normalized to i < j; edges and missing dyads must
// be disjoint; "egocentric:k" marks every dyad not incident on k missing.
// Violations raise data_error naming the offending line.
Ensemble load_ensemble(const std::string& path, const StatisticSpec& spec);
Ensemble parse_ensemble_jsonl(std::istream& in, const std::string& source, const StatisticSpec& spec);

// Canonical serialization: sorted keys, sorted dyads, user covariates only
// (reserved columns are recomputed on load). load(save(load(f))) yields an
// ensemble identical to load(f).
std::string ensemble_to_jsonl(const Ensemble& ens);
void save_ensemble(const Ensemble& ens, const std::string& path);

// Model + estimation + diagnostics settings parsed from one JSON document:
//   {"terms": [...], "formula": {...}, "offsets": [...],
//    "estimation": {...}, "diagnostics": {...}}
struct ModelConfig {
  StatisticSpec spec;
  // term name -> covariate names whose coefficients are free; terms absent
  // from the map get an intercept ("1") alone
  std::map<std::string, std::vector<std::string>> formula;
  struct OffsetEntry {
    std::string term, covariate;
    double value = 0;
  };
  std::vector<OffsetEntry> offsets;

  FitOptions fit;
  bool check_ident = true;
  double ident_rel_tol = 1e-8;

  NestedSimPlan plan; // residual budget; plan.compute mirrors fit.compute
  std::vector<std::string> residual_targets; // empty: every term plus density
  std::vector<std::string> score_targets;    // empty: no score tests
  int score_replicates = 1000;
  bool score_omnibus = true;
  std::map<std::string, std::string> regressors; // label -> net covariate
};

ModelConfig load_model_config(const std::string& path);
ModelConfig parse_model_config(const std::string& text, const std::string& source);

// Zero-valued coefficient matrix with the mask given by cfg.formula and the
// fixed offsets applied. Unknown term or covariate names raise config_error.
ParamMatrix build_param_matrix(const ModelConfig& cfg, const std::vector<std::string>& cov_names);

// "density" or a term name, optionally suffixed "[tag]" to restrict to
// tagged networks. cumulative selects the dataset-total form.
TargetStatistic resolve_target(const StatisticSpec& spec, const std::string& name, bool cumulative);
std::vector<TargetStatistic> resolve_targets(const StatisticSpec& spec, const std::vector<std::string>& names,
                                             bool cumulative);

// ---- writers ----

std::string fit_to_json(const FitResult& fit, const Ensemble& ens);
// Free-coordinate vector recovered from a fit.json written above; the file's
// coordinate list must match `coord_names` exactly.
Eigen::VectorXd read_fit_params(const std::string& path, const std::vector<std::string>& coord_names);

std::string residuals_to_csv(const std::vector<ResidualRecord>& records);
std::string density_errors_to_csv(const std::vector<DensityErrorCell>& cells);
std::string sd_table_to_csv(const std::vector<SdRow>& rows);

struct TestRow {
  std::string test, target;
  double statistic = 0;
  int df = 0;
  double p = 1;
  std::string detail;
};
std::string tests_to_csv(const std::vector<TestRow>& rows);

const char* significance_stars(double p); // "***" <0.001, "**" <0.01, "*" <0.05
std::string coefficient_summary(const FitResult& fit, int n_networks);

std::string read_text_file(const std::string& path); // io_error when unreadable
void write_text_file(const std::string& path, const std::string& text);

} // namespace netens
