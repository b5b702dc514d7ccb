#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "netens/identifiability.hpp"
#include "netens/io.hpp"
#include "netens/util.hpp"

namespace fs = std::filesystem;
using namespace netens;

namespace {

struct Args {
  std::string ensemble_path, model_path, params_path;
  std::string out_dir = ".";
  uint64_t seed = 0;
  int threads = 1;
  int enum_cap = default_enum_cap;
  int replicates = 0; // simulate / scoretest override
  std::string net_id;
  std::vector<std::string> targets; // scoretest override
};

void add_common(CLI::App* cmd, Args& a, bool with_params) {
  cmd->add_option("--ensemble", a.ensemble_path, "ensemble file, one network JSON object per line")
      ->required()
      ->envname("NETENSEMBLE_ENSEMBLE");
  cmd->add_option("--model", a.model_path, "model/estimation config (JSON)")
      ->required()
      ->envname("NETENSEMBLE_MODEL");
  cmd->add_option("--seed", a.seed, "RNG seed (overrides the config)")->envname("NETENSEMBLE_SEED");
  cmd->add_option("--out", a.out_dir, "output directory")->envname("NETENSEMBLE_OUT");
  cmd->add_option("--threads", a.threads, "worker threads (overrides the config)")->envname("NETENSEMBLE_THREADS");
  cmd->add_option("--enum-cap", a.enum_cap, "max dyads for exact enumeration (overrides the config)")
      ->envname("NETENSEMBLE_ENUM_CAP");
  if (with_params)
    cmd->add_option("--params", a.params_path, "fit.json with coefficients (default: zeros plus offsets)")
        ->envname("NETENSEMBLE_PARAMS");
}

struct Loaded {
  ModelConfig cfg;
  Ensemble ens;
  ParamMatrix B;
  std::vector<std::string> coord_names;
};

Loaded load_all(const CLI::App* cmd, const Args& a) {
  Loaded L;
  L.cfg = load_model_config(a.model_path);
  if (cmd->count("--seed")) L.cfg.fit.seed = a.seed;
  if (cmd->count("--threads")) L.cfg.fit.threads = a.threads;
  if (cmd->count("--enum-cap")) L.cfg.fit.compute.enum_cap = a.enum_cap;
  L.cfg.plan.compute = L.cfg.fit.compute;
  L.cfg.plan.seed = L.cfg.fit.seed;
  L.cfg.plan.threads = L.cfg.fit.threads;
  L.ens = load_ensemble(a.ensemble_path, L.cfg.spec);
  L.B = build_param_matrix(L.cfg, L.ens.covariate_names);
  L.coord_names = coordinate_names(L.B, L.ens.covariate_names, L.ens.spec);
  if (!a.params_path.empty()) L.B.set_free_values(read_fit_params(a.params_path, L.coord_names));
  return L;
}

InfoOptions info_opts(const ModelConfig& cfg) {
  InfoOptions o;
  o.compute = cfg.fit.compute;
  o.sim_outer = cfg.fit.info_sim_outer;
  o.threads = cfg.fit.threads;
  o.seed = cfg.fit.seed;
  return o;
}

std::string out_path(const Args& a, const char* name) {
  fs::create_directories(a.out_dir);
  return (fs::path(a.out_dir) / name).string();
}

Network observed_copy(const Network& net) {
  Network out = net;
  for (int idx = 0; idx < out.dyad_count(); ++idx) {
    const Dyad d = out.dyad_at(idx);
    out.set_mask(d, out.has_edge(d) ? MaskState::ObservedPresent : MaskState::ObservedAbsent);
  }
  return out;
}

int run_fit(const CLI::App* cmd, const Args& a) {
  Loaded L = load_all(cmd, a);
  if (L.cfg.check_ident) {
    const IdentifiabilityReport rep = check_identifiability(L.ens, L.B, info_opts(L.cfg), L.cfg.ident_rel_tol);
    if (!rep.identifiable()) {
      std::cerr << rep.describe() << "\n";
      return static_cast<int>(errc::nonidentifiable);
    }
  }
  const FitResult fit = fit_mle(L.ens, L.B, L.cfg.fit);
  write_text_file(out_path(a, "fit.json"), fit_to_json(fit, L.ens));
  std::cout << coefficient_summary(fit, L.ens.size());
  return 0;
}

int run_identify(const CLI::App* cmd, const Args& a) {
  const Loaded L = load_all(cmd, a);
  const IdentifiabilityReport rep = check_identifiability(L.ens, L.B, info_opts(L.cfg), L.cfg.ident_rel_tol);
  std::cout << rep.describe() << "\n";
  return rep.identifiable() ? 0 : static_cast<int>(errc::nonidentifiable);
}

int run_simulate(const CLI::App* cmd, const Args& a) {
  const Loaded L = load_all(cmd, a);
  const int R = a.replicates > 0 ? a.replicates : 1;
  std::vector<std::vector<Network>> sims(R, std::vector<Network>(L.ens.size()));
  ensemble_draws(L.ens, L.B, false, R, L.cfg.fit.compute, L.cfg.fit.seed, L.cfg.fit.threads,
                 [&](int s, int r, const Network& net, const Eigen::VectorXd&) { sims[r][s] = observed_copy(net); });
  fs::create_directories(a.out_dir);
  for (int r = 0; r < R; ++r) {
    Ensemble copy = L.ens;
    copy.networks = std::move(sims[r]);
    save_ensemble(copy, (fs::path(a.out_dir) / strf("sim-%03d.jsonl", r + 1)).string());
  }
  std::cout << strf("wrote %d simulated ensemble%s to %s\n", R, R == 1 ? "" : "s", a.out_dir.c_str());
  return 0;
}

std::vector<TestRow> score_rows(const Loaded& L, const std::vector<std::string>& names, int R) {
  const std::vector<TargetStatistic> targets = resolve_targets(L.cfg.spec, names, true);
  std::vector<TestRow> rows;
  for (const TargetStatistic& t : targets) {
    const ScoreTestReport rep =
        score_test_dataset(L.ens, L.B, t, R, L.cfg.fit.compute, L.cfg.fit.seed, L.cfg.fit.threads);
    rows.push_back({"score", rep.target, rep.t_obs, 0, rep.p,
                    strf("q=%s;R=%d", fmt_double(rep.quantile).c_str(), rep.R)});
  }
  if (L.cfg.score_omnibus && targets.size() >= 2) {
    const OmnibusReport rep =
        score_test_omnibus(L.ens, L.B, targets, R, L.cfg.fit.compute, L.cfg.fit.seed, L.cfg.fit.threads);
    rows.push_back({"score_omnibus", "(joint)", rep.chi2, rep.df, rep.p, strf("R=%d", rep.R)});
  }
  return rows;
}

void print_test_rows(const std::vector<TestRow>& rows) {
  for (const TestRow& r : rows) {
    if (std::isnan(r.p)) {
      std::cout << strf("%-16s %-14s %s\n", r.test.c_str(), r.target.c_str(), r.detail.c_str());
    } else {
      std::cout << strf("%-16s %-14s stat %10.4g  df %2d  p %8.3g %-3s  %s\n", r.test.c_str(), r.target.c_str(),
                        r.statistic, r.df, r.p, significance_stars(r.p), r.detail.c_str());
    }
  }
}

int run_diagnose(const CLI::App* cmd, const Args& a) {
  Loaded L = load_all(cmd, a);
  if (a.params_path.empty()) {
    const FitResult fit = fit_mle(L.ens, L.B, L.cfg.fit);
    write_text_file(out_path(a, "fit.json"), fit_to_json(fit, L.ens));
    L.B.set_free_values(fit.vec_B_hat);
  }

  std::vector<std::string> names = L.cfg.residual_targets;
  if (names.empty()) {
    for (const Term& t : L.cfg.spec.terms) names.push_back(t.name);
    names.push_back("density");
  }
  const std::vector<TargetStatistic> targets = resolve_targets(L.cfg.spec, names, false);
  const std::vector<ResidualRecord> records = pearson_residuals(L.ens, L.B, targets, L.cfg.plan);
  write_text_file(out_path(a, "residuals.csv"), residuals_to_csv(records));

  const std::vector<DensityErrorCell> cells = density_error_summary(L.ens, L.B, L.cfg.plan);
  write_text_file(out_path(a, "density_errors.csv"), density_errors_to_csv(cells));

  std::set<std::string> tag_set;
  for (const std::vector<std::string>& ts : L.ens.tags) tag_set.insert(ts.begin(), ts.end());
  const std::vector<SdRow> sd_rows =
      heterogeneity_sd(records, std::vector<std::string>(tag_set.begin(), tag_set.end()));
  write_text_file(out_path(a, "sd_table.csv"), sd_table_to_csv(sd_rows));

  std::map<std::string, int> net_index;
  for (int s = 0; s < L.ens.size(); ++s) net_index[L.ens.networks[s].id()] = s;
  std::vector<TestRow> rows;
  for (const TargetStatistic& t : targets) {
    std::vector<ResidualRecord> subset;
    for (const ResidualRecord& r : records)
      if (r.target == t.name) subset.push_back(r);
    if (subset.empty()) continue;
    try {
      const WaldReport rep = size_anova(subset);
      rows.push_back({"size_anova", t.name, rep.chi2, rep.df, rep.p,
                      strf("sizes=%d;records=%d", rep.df + 1, rep.n_used)});
    } catch (const config_error& e) {
      rows.push_back({"size_anova", t.name, 0, 0, std::nan(""), std::string("skipped: ") + e.what()});
    } catch (const singular_design_error& e) {
      rows.push_back({"size_anova", t.name, 0, 0, std::nan(""), std::string("skipped: ") + e.what()});
    }
    for (const auto& [label, cov] : L.cfg.regressors) {
      int col = -1;
      for (int c = 0; c < L.ens.q(); ++c)
        if (L.ens.covariate_names[c] == cov) col = c;
      if (col < 0) throw config_error(strf("regressor '%s' names unknown covariate '%s'", label.c_str(), cov.c_str()));
      std::vector<double> cand;
      cand.reserve(subset.size());
      for (const ResidualRecord& r : subset) cand.push_back(L.ens.X(net_index.at(r.net_id), col));
      try {
        const WaldReport rep = residual_regression(subset, cand, label);
        const double coef = rep.coef.size() > 1 ? rep.coef[1] : (rep.coef.size() == 1 ? rep.coef[0] : 0.0);
        rows.push_back({"regression:" + label, t.name, rep.chi2, rep.df, rep.p,
                        strf("coef=%s;records=%d", fmt_double(coef).c_str(), rep.n_used)});
      } catch (const config_error& e) {
        rows.push_back({"regression:" + label, t.name, 0, 0, std::nan(""), std::string("skipped: ") + e.what()});
      } catch (const singular_design_error& e) {
        rows.push_back({"regression:" + label, t.name, 0, 0, std::nan(""), std::string("skipped: ") + e.what()});
      }
    }
  }
  if (!L.cfg.score_targets.empty()) {
    const std::vector<TestRow> srows = score_rows(L, L.cfg.score_targets, L.cfg.score_replicates);
    rows.insert(rows.end(), srows.begin(), srows.end());
  }
  write_text_file(out_path(a, "tests.csv"), tests_to_csv(rows));

  int degenerate = 0;
  for (const ResidualRecord& r : records) degenerate += r.degenerate ? 1 : 0;
  std::cout << strf("residuals: %d records (%d degenerate) over %d targets\n", static_cast<int>(records.size()),
                    degenerate, static_cast<int>(targets.size()));
  for (const SdRow& r : sd_rows)
    std::cout << strf("sd[%s] = %s (n=%d)%s%s\n", r.group.c_str(), fmt_double(r.sd).c_str(), r.count,
                      r.note.empty() ? "" : "  ", r.note.c_str());
  print_test_rows(rows);
  std::cout << strf("wrote residuals.csv, density_errors.csv, sd_table.csv, tests.csv to %s\n", a.out_dir.c_str());
  return 0;
}

int run_scoretest(const CLI::App* cmd, const Args& a) {
  const Loaded L = load_all(cmd, a);
  const std::vector<std::string> names = a.targets.empty() ? L.cfg.score_targets : a.targets;
  if (names.empty())
    throw config_error("no score targets: pass --target or set diagnostics.score_targets in the config");
  const int R = a.replicates > 0 ? a.replicates : L.cfg.score_replicates;
  const std::vector<TestRow> rows = score_rows(L, names, R);
  write_text_file(out_path(a, "tests.csv"), tests_to_csv(rows));
  print_test_rows(rows);
  return 0;
}

int run_enumerate(const CLI::App* cmd, const Args& a) {
  const Loaded L = load_all(cmd, a);
  int s = 0;
  if (!a.net_id.empty()) {
    s = -1;
    for (int i = 0; i < L.ens.size(); ++i)
      if (L.ens.networks[i].id() == a.net_id) s = i;
    if (s < 0) throw config_error(strf("no network with id '%s' in the ensemble", a.net_id.c_str()));
  }
  const Network& net = L.ens.networks[s];
  const Eigen::VectorXd theta = theta_for(L.B, L.ens.x_row(s));
  const EnumerationTable table =
      enumeration_table(net, L.cfg.spec, theta, false, L.cfg.fit.compute.enum_cap);
  const double lw_max = table.log_weight.maxCoeff();
  Eigen::VectorXd w(table.log_weight.size());
  for (int r = 0; r < w.size(); ++r) w[r] = std::exp(table.log_weight[r] - lw_max);
  const double w_total = w.sum();
  const int m = static_cast<int>(table.dyads.size());

  std::string head = "state";
  for (const Term& t : L.cfg.spec.terms) head += "," + t.name;
  std::cout << head << ",prob\n";
  auto bits_of = [&](uint32_t state) {
    std::string b(m, '0');
    for (int k = 0; k < m; ++k)
      if ((state >> k) & 1u) b[k] = '1';
    return b;
  };
  for (std::size_t r = 0; r < table.states.size(); ++r) {
    std::string row = bits_of(table.states[r]);
    for (int c = 0; c < table.stats.cols(); ++c) row += "," + fmt_double(table.stats(r, c));
    row += "," + fmt_double(w[static_cast<int>(r)] / w_total);
    std::cout << row << "\n";
  }

  if (!net.fully_observed()) {
    std::vector<int> observed_pos;
    for (int k = 0; k < m; ++k)
      if (net.mask(table.dyads[k]) != MaskState::Missing) observed_pos.push_back(k);
    struct Cell {
      double w = 0;
      Eigen::VectorXd wg;
    };
    std::map<std::string, Cell> groups;
    for (std::size_t r = 0; r < table.states.size(); ++r) {
      std::string key(observed_pos.size(), '0');
      for (std::size_t k = 0; k < observed_pos.size(); ++k)
        if ((table.states[r] >> observed_pos[k]) & 1u) key[k] = '1';
      Cell& cell = groups[key];
      const double wr = w[static_cast<int>(r)];
      if (cell.wg.size() == 0) cell.wg = Eigen::VectorXd::Zero(table.stats.cols());
      cell.w += wr;
      cell.wg += wr * table.stats.row(static_cast<int>(r)).transpose();
    }
    std::string chead = "pattern,prob";
    for (const Term& t : L.cfg.spec.terms) chead += ",E[" + t.name + "]";
    std::cout << "\n" << chead << "\n";
    for (const auto& [key, cell] : groups) {
      std::string row = key + "," + fmt_double(cell.w / w_total);
      for (int c = 0; c < cell.wg.size(); ++c) row += "," + fmt_double(cell.wg[c] / cell.w);
      std::cout << row << "\n";
    }
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint exponential-family modelling of network ensembles", "netensemble"};
  app.require_subcommand(1);
  Args a;

  CLI::App* fit = app.add_subcommand("fit", "maximum-likelihood fit; writes fit.json and prints a summary");
  add_common(fit, a, false);

  CLI::App* identify = app.add_subcommand("identify", "report parameter identifiability for the model + data");
  add_common(identify, a, true);

  CLI::App* simulate = app.add_subcommand("simulate", "draw complete ensembles from the model");
  add_common(simulate, a, true);
  simulate->add_option("--replicates", a.replicates, "number of ensembles to draw (default 1)");

  CLI::App* diagnose = app.add_subcommand("diagnose", "residuals, density errors, SD table and model tests");
  add_common(diagnose, a, true);

  CLI::App* scoretest = app.add_subcommand("scoretest", "simulation score tests of dataset statistics");
  add_common(scoretest, a, true);
  scoretest->add_option("--target", a.targets, "dataset statistic (term name or density, optional [tag])");
  scoretest->add_option("--replicates", a.replicates, "simulated datasets (overrides the config)");

  CLI::App* enumerate = app.add_subcommand("enumerate", "exact state table (and conditional means when masked)");
  add_common(enumerate, a, true);
  enumerate->add_option("--net", a.net_id, "network id to enumerate (default: first)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(errc::config);
  }

  try {
    if (fit->parsed()) return run_fit(fit, a);
    if (identify->parsed()) return run_identify(identify, a);
    if (simulate->parsed()) return run_simulate(simulate, a);
    if (diagnose->parsed()) return run_diagnose(diagnose, a);
    if (scoretest->parsed()) return run_scoretest(scoretest, a);
    if (enumerate->parsed()) return run_enumerate(enumerate, a);
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
