#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "netens/io.hpp"

using namespace netens;

namespace {

StatisticSpec edges_only() {
  StatisticSpec spec;
  spec.terms = {Term::edges()};
  return spec;
}

Ensemble load_text(const std::string& text, const StatisticSpec& spec = edges_only()) {
  std::istringstream in(text);
  return parse_ensemble_jsonl(in, "mem", spec);
}

} // namespace

TEST_CASE("ensemble loading builds networks, masks and derived covariates") {
  const std::string text =
      R"({"net_id": "a", "n": 4, "node_attrs": {"grp": ["x", "x", "y", "y"], "age": [30, 20, 10, 5]},)"
      R"( "edges": [[0, 1], [2, 1]], "missing_dyads": [[2, 3]], "net_covariates": {"wave": 2.5}, "tags": ["B", "A", "B"]})"
      "\n"
      R"({"net_id": "b", "n": 2, "net_covariates": {"wave": 1}})"
      "\n";
  const Ensemble ens = load_text(text);
  REQUIRE(ens.size() == 2);

  const Network& a = ens.networks[0];
  CHECK(a.node_count() == 4);
  CHECK(a.has_edge(0, 1));
  CHECK(a.has_edge(1, 2)); // (2,1) normalized
  CHECK(a.edge_count() == 2);
  CHECK(a.mask(make_dyad(0, 1)) == MaskState::ObservedPresent);
  CHECK(a.mask(make_dyad(2, 3)) == MaskState::Missing);
  CHECK(a.mask(make_dyad(0, 2)) == MaskState::ObservedAbsent);
  CHECK(a.missing_count() == 1);
  REQUIRE(a.find_attr("grp") != nullptr);
  CHECK(a.find_attr("grp")->categorical);
  CHECK(a.find_attr("grp")->label_of(2) == "y");
  REQUIRE(a.find_attr("age") != nullptr);
  CHECK_FALSE(a.find_attr("age")->categorical);
  CHECK(a.find_attr("age")->reals[3] == 5.0);
  CHECK(ens.tags[0] == std::vector<std::string>{"A", "B"}); // sorted, deduped
  CHECK(ens.tags[1].empty());

  REQUIRE(ens.covariate_names == std::vector<std::string>{"1", "log_n", "log2_n", "wave"});
  const double l4 = std::log(4.0);
  CHECK(ens.X(0, 0) == 1.0);
  CHECK(ens.X(0, 1) == l4);
  CHECK(ens.X(0, 2) == l4 * l4);
  CHECK(ens.X(0, 3) == 2.5);
  CHECK(ens.X(1, 1) == std::log(2.0));
  CHECK(ens.X(1, 3) == 1.0);
}

TEST_CASE("egocentric masks expand to the non-incident dyads") {
  const Ensemble ens = load_text(
      R"({"net_id": "ego", "n": 4, "edges": [[0, 2]], "missing_dyads": "egocentric:0"})"
      "\n"
      R"({"net_id": "pair", "n": 2, "missing_dyads": "egocentric:0"})"
      "\n");
  const Network& ego = ens.networks[0];
  CHECK(ego.missing_count() == 3);
  CHECK(ego.mask(make_dyad(1, 2)) == MaskState::Missing);
  CHECK(ego.mask(make_dyad(1, 3)) == MaskState::Missing);
  CHECK(ego.mask(make_dyad(2, 3)) == MaskState::Missing);
  CHECK(ego.mask(make_dyad(0, 2)) == MaskState::ObservedPresent);
  CHECK(ego.mask(make_dyad(0, 1)) == MaskState::ObservedAbsent);
  CHECK(ens.networks[1].missing_count() == 0); // n=2: every dyad touches node 0
}

TEST_CASE("loading is strict about schema violations and reports the line") {
  auto fails_with = [](const std::string& text, const std::string& fragment) {
    try {
      load_text(text);
      FAIL("expected data_error for: ", text);
    } catch (const data_error& e) {
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  const std::string ok = R"({"net_id": "a", "n": 3})" "\n";

  fails_with(ok + "{not json\n", "mem:2");
  fails_with(ok + R"({"net_id": "a", "n": 3})" "\n", "duplicate net_id 'a'");
  fails_with(R"({"net_id": "a", "n": 3, "edges": [[0, 3]]})" "\n", "out of range");
  fails_with(R"({"net_id": "a", "n": 3, "edges": [[1, 1]]})" "\n", "self-loop");
  fails_with(R"({"net_id": "a", "n": 3, "edges": [[0, 1], [1, 0]]})" "\n", "twice");
  fails_with(R"({"net_id": "a", "n": 3, "edges": [[0, 1]], "missing_dyads": [[1, 0]]})" "\n", "both an edge and missing");
  fails_with(R"({"net_id": "a", "n": 3, "edges": [[1, 2]], "missing_dyads": "egocentric:0"})" "\n",
             "egocentric-missing region");
  fails_with(R"({"net_id": "a", "n": 3, "missing_dyads": "egocentric:7"})" "\n", "out of range");
  fails_with(R"({"net_id": "a", "n": 3, "missing_dyads": "everything"})" "\n", "unrecognized");
  fails_with(R"({"net_id": "a", "n": 0})" "\n", "out of range");
  fails_with(R"({"net_id": "a", "n": 65})" "\n", "out of range");
  fails_with(R"({"net_id": "a"})" "\n", "'n' must be an integer");
  fails_with(R"({"n": 3})" "\n", "'net_id'");
  fails_with(R"({"net_id": "a", "n": 3, "color": 1})" "\n", "unknown key 'color'");
  fails_with(R"({"net_id": "a", "n": 2, "node_attrs": {"z": [1, "x"]}})" "\n", "mixes numbers and strings");
  fails_with(R"({"net_id": "a", "n": 2, "node_attrs": {"z": [1]}})" "\n", "length n=2");
  fails_with(R"({"net_id": "a", "n": 2, "net_covariates": {"log_n": 3}})" "\n", "reserved");
  fails_with(R"({"net_id": "a", "n": 2, "tags": [""]})" "\n", "nonempty");
  fails_with(ok + R"({"net_id": "b", "n": 3, "net_covariates": {"w": 1}})" "\n", "covariate set differs from line 1");
  fails_with("\n  \n", "no records");
}

TEST_CASE("serialization is canonical and round-trips") {
  const std::string text =
      R"({"tags": ["H"], "n": 4, "net_id": "a", "missing_dyads": "egocentric:1",)"
      R"( "node_attrs": {"grp": ["p", "c", "p", "c"]}, "edges": [[1, 3], [0, 1]], "net_covariates": {"wave": 2}})"
      "\n"
      R"({"net_id": "b", "n": 3, "edges": [[2, 0]], "net_covariates": {"wave": 0.125}})"
      "\n";
  const Ensemble first = load_text(text);
  const std::string canon = ensemble_to_jsonl(first);
  const Ensemble second = load_text(canon);
  CHECK(ensemble_to_jsonl(second) == canon); // fixed point

  REQUIRE(second.size() == first.size());
  for (int s = 0; s < first.size(); ++s) {
    const Network& x = first.networks[s];
    const Network& y = second.networks[s];
    CHECK(y.id() == x.id());
    REQUIRE(y.node_count() == x.node_count());
    for (int idx = 0; idx < x.dyad_count(); ++idx) {
      CHECK(y.has_edge(x.dyad_at(idx)) == x.has_edge(x.dyad_at(idx)));
      CHECK(y.mask(x.dyad_at(idx)) == x.mask(x.dyad_at(idx)));
    }
    CHECK(y.attrs().size() == x.attrs().size());
    CHECK(second.tags[s] == first.tags[s]);
  }
  CHECK(second.covariate_names == first.covariate_names);
  CHECK(second.X == first.X);

  // keys and dyads appear in canonical order
  CHECK(canon.find(R"("net_id":"a","n":4)") != std::string::npos);
  CHECK(canon.find(R"("edges":[[0,1],[1,3]])") != std::string::npos);
  CHECK(canon.find(R"([[0,2]])") != std::string::npos); // (2,0) normalized
}

TEST_CASE("save and load through files") {
  const std::string dir = "io_test_tmp";
  std::filesystem::create_directories(dir);
  const Ensemble ens = load_text(R"({"net_id": "a", "n": 3, "edges": [[0, 1]]})" "\n");
  save_ensemble(ens, dir + "/ens.jsonl");
  const Ensemble back = load_ensemble(dir + "/ens.jsonl", edges_only());
  CHECK(back.networks[0].has_edge(0, 1));
  CHECK_THROWS_AS(load_ensemble(dir + "/absent.jsonl", edges_only()), io_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("model config parses terms, formula, offsets and options") {
  const std::string text = R"({
    "terms": [
      "edges", "two_stars", {"type": "triangles", "name": "tri"},
      {"type": "mixing", "attr": "grp", "levels": ["p", "c"],
       "when": {"attr": "age", "pred": {"op": "<", "value": 18}, "require_none": true}},
      {"type": "incident_edges", "attr": "grp", "pred": {"op": "in", "values": ["p", "q"]}},
      {"type": "custom", "expr": "a.grp == b.grp"}
    ],
    "formula": {"edges": ["1", "log_n"], "tri": ["1"]},
    "offsets": [{"term": "edges", "covariate": "log_n", "value": -1}],
    "estimation": {"enum_cap": 18, "force_mcmc": true, "draws": 250, "burnin_mult": 4, "interval_mult": 2,
                   "bridge_grid": 8, "bridge_draws": 100, "max_iter": 25, "tol": 0.001, "seed": 99, "threads": 3,
                   "check_identifiability": false, "ident_rel_tol": 1e-6},
    "diagnostics": {"targets": ["density", "edges[H]"], "r1": 40, "r2": 5, "estimator": "adjusted",
                    "score_targets": ["edges"], "score_replicates": 77, "omnibus": false,
                    "regressors": {"wave effect": "wave"}}
  })";
  const ModelConfig cfg = parse_model_config(text, "cfg");

  REQUIRE(cfg.spec.dim() == 6);
  CHECK(cfg.spec.terms[2].name == "tri");
  CHECK(cfg.spec.terms[3].kind == Term::Kind::Mixing);
  REQUIRE(cfg.spec.terms[3].condition.has_value());
  CHECK(cfg.spec.terms[3].condition->require_none);
  CHECK(cfg.spec.terms[4].kind == Term::Kind::IncidentEdges);
  CHECK(cfg.spec.terms[4].pred.op == ValuePred::Op::In);
  CHECK(cfg.spec.terms[5].kind == Term::Kind::Custom);

  REQUIRE(cfg.formula.count("edges"));
  CHECK(cfg.formula.at("edges") == std::vector<std::string>{"1", "log_n"});
  REQUIRE(cfg.offsets.size() == 1);
  CHECK(cfg.offsets[0].value == -1.0);

  CHECK(cfg.fit.compute.enum_cap == 18);
  CHECK(cfg.fit.compute.force_mcmc);
  CHECK(cfg.fit.compute.draws == 250);
  CHECK(cfg.fit.compute.mcmc.burnin_mult == 4);
  CHECK(cfg.fit.compute.mcmc.interval_mult == 2);
  CHECK(cfg.fit.bridge.grid == 8);
  CHECK(cfg.fit.newton.max_iter == 25);
  CHECK(cfg.fit.newton.tol == 0.001);
  CHECK(cfg.fit.seed == 99);
  CHECK(cfg.fit.threads == 3);
  CHECK_FALSE(cfg.check_ident);
  CHECK(cfg.ident_rel_tol == 1e-6);

  CHECK(cfg.plan.R1 == 40);
  CHECK(cfg.plan.R2 == 5);
  CHECK(cfg.plan.estimator == NestedSimPlan::Estimator::DirectAdjusted);
  CHECK(cfg.plan.compute.enum_cap == 18); // mirrors estimation
  CHECK(cfg.residual_targets == std::vector<std::string>{"density", "edges[H]"});
  CHECK(cfg.score_targets == std::vector<std::string>{"edges"});
  CHECK(cfg.score_replicates == 77);
  CHECK_FALSE(cfg.score_omnibus);
  REQUIRE(cfg.regressors.count("wave effect"));
  CHECK(cfg.regressors.at("wave effect") == "wave");
}

TEST_CASE("model config rejects malformed documents") {
  auto fails_with = [](const std::string& text, const std::string& fragment) {
    try {
      parse_model_config(text, "cfg");
      FAIL("expected config_error for: ", text);
    } catch (const config_error& e) {
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  fails_with("[]", "must be a JSON object");
  fails_with("{}", "'terms'");
  fails_with(R"({"terms": ["edges"], "extra": 1})", "unknown key 'extra'");
  fails_with(R"({"terms": ["degree"]})", "unknown term 'degree'");
  fails_with(R"({"terms": [{"type": "mixing", "attr": "g", "levels": ["a"]}]})", "pair of strings");
  fails_with(R"({"terms": [{"type": "incident_edges", "attr": "g", "pred": {"op": "~", "value": 1}}]})",
             "unknown op '~'");
  fails_with(R"({"terms": ["edges", "edges"]})", "duplicate");
  fails_with(R"({"terms": ["edges"], "formula": {"tri": ["1"]}})", "unknown term 'tri'");
  fails_with(R"({"terms": ["edges"], "offsets": [{"term": "tri", "covariate": "1", "value": 1}]})", "unknown term 'tri'");
  fails_with(R"({"terms": ["edges"], "estimation": {"algo": "x"}})", "unknown key 'algo'");
  fails_with(R"({"terms": ["edges"], "diagnostics": {"estimator": "robust"}})", "direct/adjusted/total");
  fails_with(R"({"terms": ["edges"], "diagnostics": {"targets": ["tri"]}})", "unknown target 'tri'");
  fails_with(R"({"terms": ["edges"], "estimation": {"seed": -4}})", "nonnegative");
}

TEST_CASE("parameter matrix mask follows the formula with intercept defaults") {
  const ModelConfig cfg = parse_model_config(
      R"({"terms": ["edges", "triangles"], "formula": {"edges": ["1", "wave"]},
          "offsets": [{"term": "triangles", "covariate": "log_n", "value": 0.5},
                      {"term": "triangles", "covariate": "log_n", "value": 0.25}]})",
      "cfg");
  const std::vector<std::string> covs = {"1", "log_n", "log2_n", "wave"};
  const ParamMatrix B = build_param_matrix(cfg, covs);
  REQUIRE(B.q() == 4);
  REQUIRE(B.p() == 2);
  CHECK(B.mask(0, 0));
  CHECK(B.mask(3, 0));
  CHECK_FALSE(B.mask(1, 0));
  CHECK(B.mask(0, 1)); // default intercept for triangles
  CHECK_FALSE(B.mask(3, 1));
  CHECK(B.offset(1, 1) == 0.75); // offsets accumulate
  CHECK(B.offset(0, 0) == 0.0);
  CHECK(B.free_count() == 3);

  CHECK_THROWS_AS(build_param_matrix(
                      parse_model_config(R"({"terms": ["edges"], "formula": {"edges": ["zap"]}})", "cfg"), covs),
                  config_error);
}

TEST_CASE("target names resolve to statistics with optional tag filters") {
  StatisticSpec spec;
  spec.terms = {Term::edges(), Term::triangles()};

  const TargetStatistic d = resolve_target(spec, "density", false);
  CHECK(d.density);
  CHECK(d.scope == TargetStatistic::Scope::PerNetwork);
  const TargetStatistic e = resolve_target(spec, "edges[H]", true);
  CHECK(e.scope == TargetStatistic::Scope::Cumulative);
  CHECK(e.tag_filter == "H");
  CHECK(e.term.kind == Term::Kind::Edges);
  CHECK_THROWS_AS(resolve_target(spec, "two_stars", false), config_error);
  CHECK_THROWS_AS(resolve_target(spec, "edges[]", false), config_error);
}

TEST_CASE("fit json writes and reads back the estimate") {
  Ensemble ens;
  ens.networks = {Network(3, "a")};
  ens.X = Eigen::MatrixXd::Ones(1, 1);
  ens.covariate_names = {"1"};
  ens.spec.terms = {Term::edges()};
  ens.tags = {{}};

  FitResult fit;
  fit.coord_names = {"edges:1"};
  fit.vec_B_hat = Eigen::VectorXd::Constant(1, -0.75);
  fit.se = Eigen::VectorXd::Constant(1, 0.25);
  fit.info = Eigen::MatrixXd::Constant(1, 1, 16.0);
  fit.loglik = -4.5;
  fit.iterations = 6;
  fit.converged = true;
  fit.exact_path = true;
  fit.seed = 17;

  const std::string text = fit_to_json(fit, ens);
  CHECK(text.find("\"estimate\"") != std::string::npos);
  CHECK(text.find("\"seed\": 17") != std::string::npos);

  const std::string dir = "io_test_tmp2";
  std::filesystem::create_directories(dir);
  write_text_file(dir + "/fit.json", text);
  const Eigen::VectorXd beta = read_fit_params(dir + "/fit.json", {"edges:1"});
  CHECK(beta[0] == -0.75);
  CHECK_THROWS_AS(read_fit_params(dir + "/fit.json", {"edges:1", "edges:log_n"}), config_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("csv writers quote awkward fields and keep full precision") {
  ResidualRecord r;
  r.net_id = "a,b";
  r.target = "density";
  r.point = 1.0 / 3.0;
  r.expectation = 0.25;
  r.variance_hat = 0.0625;
  r.residual = (1.0 / 3.0 - 0.25) / 0.25;
  r.n = 3;
  r.exact = true;
  r.tags = {"x", "y"};
  const std::string csv = residuals_to_csv({r});
  CHECK(csv.find("net_id,target,point,expectation,variance,residual,n,degenerate,exact,tags\n") == 0);
  CHECK(csv.find("\"a,b\",density,") != std::string::npos);
  CHECK(csv.find("0.3333333333333333") != std::string::npos);
  CHECK(csv.find(",x+y\n") != std::string::npos);

  DensityErrorCell cell;
  cell.n = 4;
  cell.group = "H";
  cell.count = 2;
  cell.mean_error = -0.125;
  cell.se = 0.5;
  CHECK(density_errors_to_csv({cell}) == "n,group,count,mean_error,se\n4,H,2,-0.125,0.5\n");

  SdRow row{"all", 3, 1.25, ""};
  CHECK(sd_table_to_csv({row}) == "group,count,sd,note\nall,3,1.25,\n");

  TestRow t{"score", "edges", 12.5, 0, 0.04, "q=0.98;R=199"};
  CHECK(tests_to_csv({t}) == "test,target,statistic,df,p,detail\nscore,edges,12.5,0,0.04,q=0.98;R=199\n");
}

TEST_CASE("coefficient summaries carry significance stars") {
  CHECK(std::string(significance_stars(0.0005)) == "***");
  CHECK(std::string(significance_stars(0.005)) == "**");
  CHECK(std::string(significance_stars(0.02)) == "*");
  CHECK(std::string(significance_stars(0.2)).empty());

  FitResult fit;
  fit.coord_names = {"edges:1", "triangles:1"};
  fit.vec_B_hat = Eigen::VectorXd(2);
  fit.vec_B_hat << -2.0, 0.01;
  fit.se = Eigen::VectorXd(2);
  fit.se << 0.1, 1.0;
  fit.info = Eigen::MatrixXd::Identity(2, 2);
  fit.loglik = -10.0;
  fit.iterations = 4;
  fit.converged = true;
  fit.exact_path = true;

  const std::string out = coefficient_summary(fit, 5);
  CHECK(out.find("edges:1") != std::string::npos);
  CHECK(out.find("***") != std::string::npos);
  CHECK(out.find("signif: *** p<0.001") != std::string::npos);
  CHECK(out.find("converged after 4 iterations (exact path)") != std::string::npos);
}
