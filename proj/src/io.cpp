#include "netens/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "netens/mathx.hpp"
#include "netens/util.hpp"

namespace netens {

namespace {

using njson = nlohmann::ordered_json;

// first key of `o` outside `allowed`, or nullptr
const char* unknown_key(const njson& o, std::initializer_list<const char*> allowed) {
  for (auto it = o.begin(); it != o.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) return it.key().c_str();
  }
  return nullptr;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += "\"";
  return out;
}

// ---- ensemble records ----

struct LineCtx {
  const std::string& source;
  int line = 0;
  [[noreturn]] void fail(const std::string& msg) const {
    throw data_error(strf("%s:%d: %s", source.c_str(), line, msg.c_str()));
  }
};

Dyad parse_dyad(const njson& v, int n, const LineCtx& ctx, const char* what) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
    ctx.fail(strf("each entry of '%s' must be a pair of integers", what));
  const long a = v[0].get<long>();
  const long b = v[1].get<long>();
  if (a < 0 || b < 0 || a >= n || b >= n) ctx.fail(strf("dyad (%ld,%ld) out of range for n=%d", a, b, n));
  if (a == b) ctx.fail(strf("dyad (%ld,%ld) is a self-loop", a, b));
  return make_dyad(static_cast<int>(a), static_cast<int>(b));
}

void parse_node_attrs(const njson& o, Network& net, const LineCtx& ctx) {
  if (!o.is_object()) ctx.fail("'node_attrs' must be an object of name -> array");
  for (auto it = o.begin(); it != o.end(); ++it) {
    const std::string& name = it.key();
    const njson& arr = it.value();
    if (name.empty()) ctx.fail("node attribute with empty name");
    if (!arr.is_array() || static_cast<int>(arr.size()) != net.node_count())
      ctx.fail(strf("node attribute '%s' must be an array of length n=%d", name.c_str(), net.node_count()));
    bool all_num = true, all_str = true;
    for (const njson& v : arr) {
      all_num = all_num && v.is_number();
      all_str = all_str && v.is_string();
    }
    if (all_num) {
      std::vector<double> vals;
      vals.reserve(arr.size());
      for (const njson& v : arr) vals.push_back(v.get<double>());
      net.set_real_attr(name, std::move(vals));
    } else if (all_str) {
      std::vector<std::string> vals;
      vals.reserve(arr.size());
      for (const njson& v : arr) vals.push_back(v.get<std::string>());
      net.set_categorical_attr(name, vals);
    } else {
      ctx.fail(strf("node attribute '%s' mixes numbers and strings", name.c_str()));
    }
  }
}

void parse_missing(const njson& v, Network& net, const LineCtx& ctx) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    const std::string prefix = "egocentric:";
    if (s.rfind(prefix, 0) != 0) ctx.fail(strf("unrecognized missing_dyads form '%s'", s.c_str()));
    int k = -1;
    try {
      std::size_t used = 0;
      k = std::stoi(s.substr(prefix.size()), &used);
      if (used != s.size() - prefix.size()) k = -1;
    } catch (const std::exception&) {
      k = -1;
    }
    if (k < 0 || k >= net.node_count()) ctx.fail(strf("egocentric node out of range in '%s'", s.c_str()));
    for (int i = 0; i < net.node_count(); ++i)
      for (int j = i + 1; j < net.node_count(); ++j)
        if (i != k && j != k && net.has_edge(i, j))
          ctx.fail(strf("edge (%d,%d) lies in the egocentric-missing region of node %d", i, j, k));
    net.apply_egocentric_mask(k);
    return;
  }
  if (!v.is_array()) ctx.fail("'missing_dyads' must be an array of pairs or an \"egocentric:<node>\" string");
  std::set<std::pair<int, int>> seen;
  for (const njson& e : v) {
    const Dyad d = parse_dyad(e, net.node_count(), ctx, "missing_dyads");
    if (!seen.insert({d.i, d.j}).second) ctx.fail(strf("dyad (%d,%d) listed missing twice", d.i, d.j));
    if (net.has_edge(d)) ctx.fail(strf("dyad (%d,%d) is listed as both an edge and missing", d.i, d.j));
    net.set_mask(d, MaskState::Missing);
  }
}

// ---- model config ----

[[noreturn]] void fail_cfg(const std::string& source, const std::string& msg) {
  throw config_error(source + ": " + msg);
}

ValuePred parse_pred(const njson& j, const std::string& source, const std::string& ctx) {
  if (!j.is_object()) fail_cfg(source, ctx + " must be an object {op, value|values}");
  if (const char* k = unknown_key(j, {"op", "value", "values"}))
    fail_cfg(source, strf("%s: unknown key '%s'", ctx.c_str(), k));
  if (!j.contains("op") || !j["op"].is_string()) fail_cfg(source, ctx + " needs a string 'op'");
  const std::string op = j["op"].get<std::string>();
  ValuePred p;
  if (op == "==" || op == "eq")
    p.op = ValuePred::Op::Eq;
  else if (op == "!=" || op == "ne")
    p.op = ValuePred::Op::Ne;
  else if (op == "<" || op == "lt")
    p.op = ValuePred::Op::Lt;
  else if (op == "<=" || op == "le")
    p.op = ValuePred::Op::Le;
  else if (op == ">" || op == "gt")
    p.op = ValuePred::Op::Gt;
  else if (op == ">=" || op == "ge")
    p.op = ValuePred::Op::Ge;
  else if (op == "in")
    p.op = ValuePred::Op::In;
  else
    fail_cfg(source, strf("%s: unknown op '%s'", ctx.c_str(), op.c_str()));

  if (p.op == ValuePred::Op::In) {
    if (!j.contains("values") || !j["values"].is_array() || j["values"].empty())
      fail_cfg(source, ctx + ": op 'in' needs a nonempty 'values' array of strings");
    for (const njson& v : j["values"]) {
      if (!v.is_string()) fail_cfg(source, ctx + ": 'values' entries must be strings");
      p.strs.push_back(v.get<std::string>());
    }
    p.is_string = true;
  } else {
    if (!j.contains("value")) fail_cfg(source, ctx + " needs a 'value'");
    const njson& v = j["value"];
    if (v.is_number()) {
      p.num = v.get<double>();
    } else if (v.is_string()) {
      p.is_string = true;
      p.str = v.get<std::string>();
    } else {
      fail_cfg(source, ctx + ": 'value' must be a number or a string");
    }
  }
  return p;
}

NetworkCondition parse_condition(const njson& j, const std::string& source, const std::string& ctx) {
  if (!j.is_object()) fail_cfg(source, ctx + " must be an object {attr, pred, require_none?}");
  if (const char* k = unknown_key(j, {"attr", "pred", "require_none"}))
    fail_cfg(source, strf("%s: unknown key '%s'", ctx.c_str(), k));
  if (!j.contains("attr") || !j["attr"].is_string()) fail_cfg(source, ctx + " needs a string 'attr'");
  if (!j.contains("pred")) fail_cfg(source, ctx + " needs a 'pred'");
  NetworkCondition cond;
  cond.attr = j["attr"].get<std::string>();
  cond.pred = parse_pred(j["pred"], source, ctx + ".pred");
  if (j.contains("require_none")) {
    if (!j["require_none"].is_boolean()) fail_cfg(source, ctx + ".require_none must be a boolean");
    cond.require_none = j["require_none"].get<bool>();
  }
  return cond;
}

Term parse_term(const njson& j, const std::string& source, const std::string& ctx) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "edges") return Term::edges();
    if (s == "two_stars") return Term::two_stars();
    if (s == "triangles") return Term::triangles();
    fail_cfg(source, strf("%s: unknown term '%s' (objects are required beyond edges/two_stars/triangles)",
                          ctx.c_str(), s.c_str()));
  }
  if (!j.is_object()) fail_cfg(source, ctx + " must be a string or an object with a 'type'");
  if (!j.contains("type") || !j["type"].is_string()) fail_cfg(source, ctx + " needs a string 'type'");
  const std::string type = j["type"].get<std::string>();
  Term t;
  if (type == "edges" || type == "two_stars" || type == "triangles") {
    if (const char* k = unknown_key(j, {"type", "name"})) fail_cfg(source, strf("%s: unknown key '%s'", ctx.c_str(), k));
    t = type == "edges" ? Term::edges() : type == "two_stars" ? Term::two_stars() : Term::triangles();
  } else if (type == "mixing") {
    if (const char* k = unknown_key(j, {"type", "attr", "levels", "when", "name"}))
      fail_cfg(source, strf("%s: unknown key '%s'", ctx.c_str(), k));
    if (!j.contains("attr") || !j["attr"].is_string()) fail_cfg(source, ctx + ": mixing needs a string 'attr'");
    if (!j.contains("levels") || !j["levels"].is_array() || j["levels"].size() != 2 || !j["levels"][0].is_string() ||
        !j["levels"][1].is_string())
      fail_cfg(source, ctx + ": mixing needs 'levels' as a pair of strings");
    std::optional<NetworkCondition> cond;
    if (j.contains("when")) cond = parse_condition(j["when"], source, ctx + ".when");
    t = Term::mixing(j["attr"].get<std::string>(), j["levels"][0].get<std::string>(), j["levels"][1].get<std::string>(),
                     cond);
  } else if (type == "incident_edges") {
    if (const char* k = unknown_key(j, {"type", "attr", "pred", "name"}))
      fail_cfg(source, strf("%s: unknown key '%s'", ctx.c_str(), k));
    if (!j.contains("attr") || !j["attr"].is_string()) fail_cfg(source, ctx + ": incident_edges needs a string 'attr'");
    if (!j.contains("pred")) fail_cfg(source, ctx + ": incident_edges needs a 'pred'");
    t = Term::incident_edges(j["attr"].get<std::string>(), parse_pred(j["pred"], source, ctx + ".pred"));
  } else if (type == "custom") {
    if (const char* k = unknown_key(j, {"type", "expr", "name"}))
      fail_cfg(source, strf("%s: unknown key '%s'", ctx.c_str(), k));
    if (!j.contains("expr") || !j["expr"].is_string()) fail_cfg(source, ctx + ": custom needs a string 'expr'");
    t = Term::custom(j["expr"].get<std::string>());
  } else {
    fail_cfg(source, strf("%s: unknown term type '%s'", ctx.c_str(), type.c_str()));
  }
  if (j.contains("name")) {
    if (!j["name"].is_string() || j["name"].get<std::string>().empty())
      fail_cfg(source, ctx + ": 'name' must be a nonempty string");
    t.name = j["name"].get<std::string>();
  }
  return t;
}

double jnum(const njson& o, const char* key, double fallback, const std::string& source, const char* sect) {
  if (!o.contains(key)) return fallback;
  if (!o[key].is_number()) fail_cfg(source, strf("%s.%s must be a number", sect, key));
  return o[key].get<double>();
}

int jint(const njson& o, const char* key, int fallback, const std::string& source, const char* sect) {
  if (!o.contains(key)) return fallback;
  if (!o[key].is_number_integer()) fail_cfg(source, strf("%s.%s must be an integer", sect, key));
  return o[key].get<int>();
}

bool jbool(const njson& o, const char* key, bool fallback, const std::string& source, const char* sect) {
  if (!o.contains(key)) return fallback;
  if (!o[key].is_boolean()) fail_cfg(source, strf("%s.%s must be a boolean", sect, key));
  return o[key].get<bool>();
}

std::vector<std::string> jstrings(const njson& arr, const std::string& source, const std::string& ctx) {
  if (!arr.is_array()) fail_cfg(source, ctx + " must be an array of strings");
  std::vector<std::string> out;
  for (const njson& v : arr) {
    if (!v.is_string()) fail_cfg(source, ctx + " must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

} // namespace

Ensemble parse_ensemble_jsonl(std::istream& in, const std::string& source, const StatisticSpec& spec) {
  std::vector<Network> nets;
  std::vector<std::vector<std::string>> all_tags;
  std::vector<std::map<std::string, double>> all_covs;
  std::map<std::string, int> id_lines;
  std::set<std::string> user_names;
  int first_line = 0;

  LineCtx ctx{source, 0};
  std::string line;
  while (std::getline(in, line)) {
    ++ctx.line;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    njson j;
    try {
      j = njson::parse(line);
    } catch (const std::exception& e) {
      ctx.fail(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) ctx.fail("record must be a JSON object");
    if (const char* k = unknown_key(j, {"net_id", "n", "node_attrs", "edges", "missing_dyads", "net_covariates", "tags"}))
      ctx.fail(strf("unknown key '%s'", k));

    if (!j.contains("net_id") || !j["net_id"].is_string() || j["net_id"].get<std::string>().empty())
      ctx.fail("'net_id' must be a nonempty string");
    const std::string id = j["net_id"].get<std::string>();
    if (auto it = id_lines.find(id); it != id_lines.end())
      ctx.fail(strf("duplicate net_id '%s' (first seen on line %d)", id.c_str(), it->second));
    id_lines[id] = ctx.line;

    if (!j.contains("n") || !j["n"].is_number_integer()) ctx.fail("'n' must be an integer");
    const long n = j["n"].get<long>();
    if (n < 1 || n > max_nodes) ctx.fail(strf("n=%ld out of range [1,%d]", n, max_nodes));

    Network net(static_cast<int>(n), id);
    if (j.contains("node_attrs")) parse_node_attrs(j["node_attrs"], net, ctx);

    if (j.contains("edges")) {
      if (!j["edges"].is_array()) ctx.fail("'edges' must be an array of pairs");
      for (const njson& e : j["edges"]) {
        const Dyad d = parse_dyad(e, net.node_count(), ctx, "edges");
        if (net.has_edge(d)) ctx.fail(strf("edge (%d,%d) listed twice", d.i, d.j));
        net.set_edge(d, true);
        net.set_mask(d, MaskState::ObservedPresent);
      }
    }
    if (j.contains("missing_dyads")) parse_missing(j["missing_dyads"], net, ctx);

    std::map<std::string, double> covs;
    if (j.contains("net_covariates")) {
      const njson& o = j["net_covariates"];
      if (!o.is_object()) ctx.fail("'net_covariates' must be an object of name -> number");
      for (auto it = o.begin(); it != o.end(); ++it) {
        if (it.key().empty()) ctx.fail("covariate with empty name");
        for (const std::string& r : reserved_covariates)
          if (it.key() == r) ctx.fail(strf("covariate name '%s' is reserved (computed at load)", r.c_str()));
        if (!it.value().is_number()) ctx.fail(strf("covariate '%s' must be a number", it.key().c_str()));
        covs[it.key()] = it.value().get<double>();
      }
    }
    std::set<std::string> names;
    for (const auto& [k, v] : covs) names.insert(k);
    if (nets.empty()) {
      user_names = names;
      first_line = ctx.line;
    } else if (names != user_names) {
      std::string diff;
      for (const std::string& k : user_names)
        if (!names.count(k)) {
          diff = strf("missing covariate '%s'", k.c_str());
          break;
        }
      if (diff.empty())
        for (const std::string& k : names)
          if (!user_names.count(k)) {
            diff = strf("extra covariate '%s'", k.c_str());
            break;
          }
      ctx.fail(strf("covariate set differs from line %d (%s)", first_line, diff.c_str()));
    }

    std::vector<std::string> tags;
    if (j.contains("tags")) {
      if (!j["tags"].is_array()) ctx.fail("'tags' must be an array of strings");
      for (const njson& v : j["tags"]) {
        if (!v.is_string() || v.get<std::string>().empty()) ctx.fail("'tags' entries must be nonempty strings");
        tags.push_back(v.get<std::string>());
      }
      std::sort(tags.begin(), tags.end());
      tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
    }

    nets.push_back(std::move(net));
    all_covs.push_back(std::move(covs));
    all_tags.push_back(std::move(tags));
  }
  if (nets.empty()) throw data_error(source + ": no records");

  const int S = static_cast<int>(nets.size());
  std::vector<std::string> cov_names = reserved_covariates;
  cov_names.insert(cov_names.end(), user_names.begin(), user_names.end());
  Eigen::MatrixXd X(S, static_cast<int>(cov_names.size()));
  for (int s = 0; s < S; ++s) {
    const double ln = std::log(static_cast<double>(nets[s].node_count()));
    X(s, 0) = 1.0;
    X(s, 1) = ln;
    X(s, 2) = ln * ln;
    int c = 3;
    for (const std::string& name : user_names) X(s, c++) = all_covs[s].at(name);
  }

  Ensemble ens;
  ens.networks = std::move(nets);
  ens.X = std::move(X);
  ens.covariate_names = std::move(cov_names);
  ens.spec = spec;
  ens.tags = std::move(all_tags);
  ens.validate();
  for (const Network& net : ens.networks) {
    try {
      BoundStats bound(ens.spec, net);
    } catch (const error& e) {
      throw config_error(strf("network '%s': %s", net.id().c_str(), e.what()));
    }
  }
  return ens;
}

Ensemble load_ensemble(const std::string& path, const StatisticSpec& spec) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open ensemble file '" + path + "'");
  return parse_ensemble_jsonl(in, path, spec);
}

std::string ensemble_to_jsonl(const Ensemble& ens) {
  std::string out;
  for (int s = 0; s < ens.size(); ++s) {
    const Network& net = ens.networks[s];
    njson o;
    o["net_id"] = net.id();
    o["n"] = net.node_count();
    if (!net.attrs().empty()) {
      njson attrs = njson::object();
      for (const auto& [name, col] : net.attrs()) {
        njson arr = njson::array();
        for (int i = 0; i < net.node_count(); ++i) {
          if (col.categorical)
            arr.push_back(col.label_of(i));
          else
            arr.push_back(col.reals[i]);
        }
        attrs[name] = std::move(arr);
      }
      o["node_attrs"] = std::move(attrs);
    }
    const std::vector<Dyad> edges = net.edges();
    if (!edges.empty()) {
      njson arr = njson::array();
      for (const Dyad& d : edges) arr.push_back(njson::array({d.i, d.j}));
      o["edges"] = std::move(arr);
    }
    const std::vector<Dyad>& missing = net.missing_dyads();
    if (!missing.empty()) {
      njson arr = njson::array();
      for (const Dyad& d : missing) arr.push_back(njson::array({d.i, d.j}));
      o["missing_dyads"] = std::move(arr);
    }
    if (ens.q() > static_cast<int>(reserved_covariates.size())) {
      njson covs = njson::object();
      for (int c = static_cast<int>(reserved_covariates.size()); c < ens.q(); ++c)
        covs[ens.covariate_names[c]] = ens.X(s, c);
      o["net_covariates"] = std::move(covs);
    }
    if (!ens.tags[s].empty()) o["tags"] = ens.tags[s];
    out += o.dump();
    out += "\n";
  }
  return out;
}

void save_ensemble(const Ensemble& ens, const std::string& path) { write_text_file(path, ensemble_to_jsonl(ens)); }

ModelConfig parse_model_config(const std::string& text, const std::string& source) {
  njson j;
  try {
    j = njson::parse(text);
  } catch (const std::exception& e) {
    fail_cfg(source, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) fail_cfg(source, "config must be a JSON object");
  if (const char* k = unknown_key(j, {"terms", "formula", "offsets", "estimation", "diagnostics"}))
    fail_cfg(source, strf("unknown key '%s'", k));
  if (!j.contains("terms") || !j["terms"].is_array() || j["terms"].empty())
    fail_cfg(source, "'terms' must be a nonempty array");

  ModelConfig cfg;
  int idx = 0;
  for (const njson& t : j["terms"]) cfg.spec.terms.push_back(parse_term(t, source, strf("terms[%d]", idx++)));
  try {
    cfg.spec.validate();
  } catch (const error& e) {
    fail_cfg(source, e.what());
  }

  if (j.contains("formula")) {
    if (!j["formula"].is_object()) fail_cfg(source, "'formula' must be an object of term -> covariate list");
    for (auto it = j["formula"].begin(); it != j["formula"].end(); ++it) {
      if (cfg.spec.index_of(it.key()) < 0) fail_cfg(source, strf("formula names unknown term '%s'", it.key().c_str()));
      std::vector<std::string> covs = jstrings(it.value(), source, strf("formula['%s']", it.key().c_str()));
      if (covs.empty()) fail_cfg(source, strf("formula['%s'] must list at least one covariate", it.key().c_str()));
      cfg.formula[it.key()] = std::move(covs);
    }
  }

  if (j.contains("offsets")) {
    if (!j["offsets"].is_array()) fail_cfg(source, "'offsets' must be an array");
    for (const njson& o : j["offsets"]) {
      if (!o.is_object()) fail_cfg(source, "each offset must be an object {term, covariate, value}");
      if (const char* k = unknown_key(o, {"term", "covariate", "value"}))
        fail_cfg(source, strf("offset: unknown key '%s'", k));
      if (!o.contains("term") || !o["term"].is_string() || !o.contains("covariate") || !o["covariate"].is_string() ||
          !o.contains("value") || !o["value"].is_number())
        fail_cfg(source, "each offset needs string 'term', string 'covariate' and numeric 'value'");
      ModelConfig::OffsetEntry e;
      e.term = o["term"].get<std::string>();
      e.covariate = o["covariate"].get<std::string>();
      e.value = o["value"].get<double>();
      if (cfg.spec.index_of(e.term) < 0) fail_cfg(source, strf("offset names unknown term '%s'", e.term.c_str()));
      cfg.offsets.push_back(std::move(e));
    }
  }

  if (j.contains("estimation")) {
    const njson& e = j["estimation"];
    if (!e.is_object()) fail_cfg(source, "'estimation' must be an object");
    if (const char* k = unknown_key(e, {"enum_cap", "force_mcmc", "draws", "burnin_mult", "interval_mult",
                                        "bridge_grid", "bridge_draws", "max_iter", "tol", "mcse_mult", "trust_radius",
                                        "max_halvings", "init_mple", "check_boundary", "boundary_fills",
                                        "info_sim_outer", "seed", "threads", "check_identifiability", "ident_rel_tol"}))
      fail_cfg(source, strf("estimation: unknown key '%s'", k));
    FitOptions& f = cfg.fit;
    f.compute.enum_cap = jint(e, "enum_cap", f.compute.enum_cap, source, "estimation");
    f.compute.force_mcmc = jbool(e, "force_mcmc", f.compute.force_mcmc, source, "estimation");
    f.compute.draws = jint(e, "draws", f.compute.draws, source, "estimation");
    f.compute.mcmc.burnin_mult = jint(e, "burnin_mult", f.compute.mcmc.burnin_mult, source, "estimation");
    f.compute.mcmc.interval_mult = jint(e, "interval_mult", f.compute.mcmc.interval_mult, source, "estimation");
    f.bridge.grid = jint(e, "bridge_grid", f.bridge.grid, source, "estimation");
    f.bridge.draws = jint(e, "bridge_draws", f.bridge.draws, source, "estimation");
    f.newton.max_iter = jint(e, "max_iter", f.newton.max_iter, source, "estimation");
    f.newton.tol = jnum(e, "tol", f.newton.tol, source, "estimation");
    f.newton.mcse_mult = jnum(e, "mcse_mult", f.newton.mcse_mult, source, "estimation");
    f.newton.trust_radius = jnum(e, "trust_radius", f.newton.trust_radius, source, "estimation");
    f.newton.max_halvings = jint(e, "max_halvings", f.newton.max_halvings, source, "estimation");
    f.init_mple = jbool(e, "init_mple", f.init_mple, source, "estimation");
    f.check_boundary = jbool(e, "check_boundary", f.check_boundary, source, "estimation");
    f.boundary_fills = jint(e, "boundary_fills", f.boundary_fills, source, "estimation");
    f.info_sim_outer = jint(e, "info_sim_outer", f.info_sim_outer, source, "estimation");
    if (e.contains("seed")) {
      if (!e["seed"].is_number_integer() || e["seed"].get<long long>() < 0)
        fail_cfg(source, "estimation.seed must be a nonnegative integer");
      f.seed = e["seed"].get<uint64_t>();
    }
    f.threads = jint(e, "threads", f.threads, source, "estimation");
    cfg.check_ident = jbool(e, "check_identifiability", cfg.check_ident, source, "estimation");
    cfg.ident_rel_tol = jnum(e, "ident_rel_tol", cfg.ident_rel_tol, source, "estimation");
  }

  if (j.contains("diagnostics")) {
    const njson& d = j["diagnostics"];
    if (!d.is_object()) fail_cfg(source, "'diagnostics' must be an object");
    if (const char* k = unknown_key(d, {"targets", "r1", "r2", "estimator", "score_targets", "score_replicates",
                                        "omnibus", "regressors"}))
      fail_cfg(source, strf("diagnostics: unknown key '%s'", k));
    cfg.plan.R1 = jint(d, "r1", cfg.plan.R1, source, "diagnostics");
    cfg.plan.R2 = jint(d, "r2", cfg.plan.R2, source, "diagnostics");
    if (d.contains("estimator")) {
      if (!d["estimator"].is_string()) fail_cfg(source, "diagnostics.estimator must be a string");
      const std::string s = d["estimator"].get<std::string>();
      if (s == "direct")
        cfg.plan.estimator = NestedSimPlan::Estimator::Direct;
      else if (s == "adjusted")
        cfg.plan.estimator = NestedSimPlan::Estimator::DirectAdjusted;
      else if (s == "total")
        cfg.plan.estimator = NestedSimPlan::Estimator::TotalVariance;
      else
        fail_cfg(source, strf("diagnostics.estimator must be direct/adjusted/total, got '%s'", s.c_str()));
    }
    if (d.contains("targets")) cfg.residual_targets = jstrings(d["targets"], source, "diagnostics.targets");
    if (d.contains("score_targets"))
      cfg.score_targets = jstrings(d["score_targets"], source, "diagnostics.score_targets");
    cfg.score_replicates = jint(d, "score_replicates", cfg.score_replicates, source, "diagnostics");
    cfg.score_omnibus = jbool(d, "omnibus", cfg.score_omnibus, source, "diagnostics");
    if (d.contains("regressors")) {
      if (!d["regressors"].is_object()) fail_cfg(source, "diagnostics.regressors must be an object of label -> covariate");
      for (auto it = d["regressors"].begin(); it != d["regressors"].end(); ++it) {
        if (!it.value().is_string()) fail_cfg(source, "diagnostics.regressors values must be covariate names");
        cfg.regressors[it.key()] = it.value().get<std::string>();
      }
    }
    // fail early on unknown target names (tag filters can't be checked yet)
    for (const std::string& name : cfg.residual_targets) resolve_target(cfg.spec, name, false);
    for (const std::string& name : cfg.score_targets) resolve_target(cfg.spec, name, true);
  }

  cfg.plan.compute = cfg.fit.compute;
  return cfg;
}

ModelConfig load_model_config(const std::string& path) {
  return parse_model_config(read_text_file(path), path);
}

ParamMatrix build_param_matrix(const ModelConfig& cfg, const std::vector<std::string>& cov_names) {
  const int q = static_cast<int>(cov_names.size());
  const int p = cfg.spec.dim();
  auto cov_index = [&](const std::string& name, const char* what) {
    for (int r = 0; r < q; ++r)
      if (cov_names[r] == name) return r;
    throw config_error(strf("%s names unknown covariate '%s' (have: %s)", what, name.c_str(),
                            join(cov_names, ", ").c_str()));
  };
  ParamMatrix B(q, p);
  B.mask.setConstant(false);
  for (int c = 0; c < p; ++c) {
    const std::string& term = cfg.spec.terms[c].name;
    auto it = cfg.formula.find(term);
    if (it == cfg.formula.end()) {
      B.mask(cov_index("1", "formula"), c) = true;
      continue;
    }
    for (const std::string& cov : it->second) B.mask(cov_index(cov, "formula"), c) = true;
  }
  for (const ModelConfig::OffsetEntry& e : cfg.offsets)
    B.offset(cov_index(e.covariate, "offset"), cfg.spec.index_of(e.term)) += e.value;
  return B;
}

TargetStatistic resolve_target(const StatisticSpec& spec, const std::string& name, bool cumulative) {
  std::string base = name, tag;
  if (!name.empty() && name.back() == ']') {
    const std::size_t open = name.rfind('[');
    if (open == std::string::npos) throw config_error(strf("malformed target name '%s'", name.c_str()));
    base = name.substr(0, open);
    tag = name.substr(open + 1, name.size() - open - 2);
    if (tag.empty()) throw config_error(strf("empty tag filter in target '%s'", name.c_str()));
  }
  if (base == "density") return cumulative ? TargetStatistic::cumulative_density(tag) : TargetStatistic::density_of(tag);
  const int idx = spec.index_of(base);
  if (idx < 0)
    throw config_error(strf("unknown target '%s' (use 'density' or a term name, optionally with a [tag] filter)",
                            base.c_str()));
  return cumulative ? TargetStatistic::cumulative(spec.terms[idx], tag) : TargetStatistic::of_term(spec.terms[idx], tag);
}

std::vector<TargetStatistic> resolve_targets(const StatisticSpec& spec, const std::vector<std::string>& names,
                                             bool cumulative) {
  std::vector<TargetStatistic> out;
  out.reserve(names.size());
  for (const std::string& name : names) out.push_back(resolve_target(spec, name, cumulative));
  return out;
}

std::string fit_to_json(const FitResult& fit, const Ensemble& ens) {
  njson o;
  njson terms = njson::array();
  for (const Term& t : ens.spec.terms) terms.push_back(t.name);
  o["model"] = njson::object();
  o["model"]["terms"] = std::move(terms);
  o["model"]["covariates"] = ens.covariate_names;
  o["coordinates"] = fit.coord_names;
  njson est = njson::array(), se = njson::array();
  for (int k = 0; k < fit.vec_B_hat.size(); ++k) est.push_back(fit.vec_B_hat[k]);
  for (int k = 0; k < fit.se.size(); ++k) se.push_back(fit.se[k]);
  o["estimate"] = std::move(est);
  o["se"] = std::move(se);
  njson info = njson::array();
  for (int r = 0; r < fit.info.rows(); ++r) {
    njson row = njson::array();
    for (int c = 0; c < fit.info.cols(); ++c) row.push_back(fit.info(r, c));
    info.push_back(std::move(row));
  }
  o["information"] = std::move(info);
  o["loglik"] = fit.loglik;
  o["loglik_mcse"] = fit.loglik_mcse;
  o["aic"] = fit.aic();
  o["bic"] = fit.bic(ens.size());
  o["n_networks"] = ens.size();
  o["iterations"] = fit.iterations;
  o["converged"] = fit.converged;
  o["exact_path"] = fit.exact_path;
  o["seed"] = fit.seed;
  return o.dump(2) + "\n";
}

Eigen::VectorXd read_fit_params(const std::string& path, const std::vector<std::string>& coord_names) {
  njson j;
  try {
    j = njson::parse(read_text_file(path));
  } catch (const error&) {
    throw;
  } catch (const std::exception& e) {
    throw data_error(path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("coordinates") || !j.contains("estimate"))
    throw data_error(path + ": not a parameter file (needs 'coordinates' and 'estimate')");
  const std::vector<std::string> coords = jstrings(j["coordinates"], path, "'coordinates'");
  if (coords != coord_names)
    throw config_error(strf("%s: coordinates do not match the model (file: %s; model: %s)", path.c_str(),
                            join(coords, ", ").c_str(), join(coord_names, ", ").c_str()));
  if (!j["estimate"].is_array() || j["estimate"].size() != coords.size())
    throw data_error(path + ": 'estimate' must parallel 'coordinates'");
  Eigen::VectorXd beta(static_cast<int>(coords.size()));
  for (std::size_t k = 0; k < coords.size(); ++k) {
    if (!j["estimate"][k].is_number()) throw data_error(path + ": 'estimate' entries must be numbers");
    beta[static_cast<int>(k)] = j["estimate"][k].get<double>();
  }
  return beta;
}

std::string residuals_to_csv(const std::vector<ResidualRecord>& records) {
  std::string out = "net_id,target,point,expectation,variance,residual,n,degenerate,exact,tags\n";
  for (const ResidualRecord& r : records) {
    out += csv_field(r.net_id) + "," + csv_field(r.target) + "," + fmt_double(r.point) + "," +
           fmt_double(r.expectation) + "," + fmt_double(r.variance_hat) + "," + fmt_double(r.residual) + "," +
           std::to_string(r.n) + "," + (r.degenerate ? "1" : "0") + "," + (r.exact ? "1" : "0") + "," +
           csv_field(join(r.tags, "+")) + "\n";
  }
  return out;
}

std::string density_errors_to_csv(const std::vector<DensityErrorCell>& cells) {
  std::string out = "n,group,count,mean_error,se\n";
  for (const DensityErrorCell& c : cells)
    out += std::to_string(c.n) + "," + csv_field(c.group) + "," + std::to_string(c.count) + "," +
           fmt_double(c.mean_error) + "," + fmt_double(c.se) + "\n";
  return out;
}

std::string sd_table_to_csv(const std::vector<SdRow>& rows) {
  std::string out = "group,count,sd,note\n";
  for (const SdRow& r : rows)
    out += csv_field(r.group) + "," + std::to_string(r.count) + "," + fmt_double(r.sd) + "," + csv_field(r.note) + "\n";
  return out;
}

std::string tests_to_csv(const std::vector<TestRow>& rows) {
  std::string out = "test,target,statistic,df,p,detail\n";
  for (const TestRow& r : rows)
    out += csv_field(r.test) + "," + csv_field(r.target) + "," + fmt_double(r.statistic) + "," +
           std::to_string(r.df) + "," + fmt_double(r.p) + "," + csv_field(r.detail) + "\n";
  return out;
}

const char* significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

std::string coefficient_summary(const FitResult& fit, int n_networks) {
  std::size_t w = 11;
  for (const std::string& name : fit.coord_names) w = std::max(w, name.size());
  std::string out = strf("%-*s %12s %11s %9s %11s\n", static_cast<int>(w), "coordinate", "estimate", "se", "z", "p");
  for (std::size_t k = 0; k < fit.coord_names.size(); ++k) {
    const double est = fit.vec_B_hat[static_cast<int>(k)];
    const double se = fit.se[static_cast<int>(k)];
    const double z = est / se;
    const double p = chi2_sf(z * z, 1.0);
    out += strf("%-*s %12.5g %11.4g %9.3f %11.3g %s\n", static_cast<int>(w), fit.coord_names[k].c_str(), est, se, z, p,
                significance_stars(p));
  }
  out += "---\nsignif: *** p<0.001, ** p<0.01, * p<0.05\n";
  out += strf("loglik %.6g%s", fit.loglik, fit.loglik_mcse > 0 ? strf(" (mcse %.2g)", fit.loglik_mcse).c_str() : "");
  out += strf("  aic %.6g  bic %.6g\n", fit.aic(), fit.bic(n_networks));
  out += strf("%s after %d iteration%s (%s path), seed %llu\n", fit.converged ? "converged" : "not converged",
              fit.iterations, fit.iterations == 1 ? "" : "s", fit.exact_path ? "exact" : "stochastic",
              static_cast<unsigned long long>(fit.seed));
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw io_error("error reading '" + path + "'");
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw io_error("error writing '" + path + "'");
}

} // namespace netens
