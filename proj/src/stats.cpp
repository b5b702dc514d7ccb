#include "netens/stats.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>

#include "netens/util.hpp"

namespace netens {

// ---------- ValuePred ----------

static const char* op_name(ValuePred::Op op) {
  switch (op) {
    case ValuePred::Op::Eq: return "==";
    case ValuePred::Op::Ne: return "!=";
    case ValuePred::Op::Lt: return "<";
    case ValuePred::Op::Le: return "<=";
    case ValuePred::Op::Gt: return ">";
    case ValuePred::Op::Ge: return ">=";
    case ValuePred::Op::In: return "in";
  }
  return "?";
}

void ValuePred::check_against(const AttributeColumn& col, const std::string& ctx) const {
  if (col.categorical) {
    if (op != Op::Eq && op != Op::Ne && op != Op::In)
      throw config_error(ctx + ": ordering predicate on a categorical attribute");
    if (op == Op::In) {
      if (strs.empty()) throw config_error(ctx + ": 'in' predicate with empty set");
    } else if (!is_string) {
      throw config_error(ctx + ": numeric literal compared against a categorical attribute");
    }
  } else {
    if (op == Op::In) throw config_error(ctx + ": 'in' predicate on a numeric attribute");
    if (is_string) throw config_error(ctx + ": string literal compared against a numeric attribute");
  }
}

bool ValuePred::matches(const AttributeColumn& col, int node) const {
  if (col.categorical) {
    const std::string& lbl = col.label_of(node);
    switch (op) {
      case Op::Eq: return lbl == str;
      case Op::Ne: return lbl != str;
      case Op::In: return std::find(strs.begin(), strs.end(), lbl) != strs.end();
      default: return false;
    }
  }
  const double v = col.reals[node];
  switch (op) {
    case Op::Eq: return v == num;
    case Op::Ne: return v != num;
    case Op::Lt: return v < num;
    case Op::Le: return v <= num;
    case Op::Gt: return v > num;
    case Op::Ge: return v >= num;
    default: return false;
  }
}

std::string ValuePred::describe() const {
  if (op == Op::In) {
    std::string s = "in{";
    for (std::size_t i = 0; i < strs.size(); ++i) s += (i ? "," : "") + strs[i];
    return s + "}";
  }
  return std::string(op_name(op)) + (is_string ? str : fmt_double(num));
}

// ---------- NetworkCondition ----------

bool NetworkCondition::holds(const Network& net) const {
  const AttributeColumn* col = net.find_attr(attr);
  if (!col)
    throw config_error(strf("condition references attribute '%s' absent on network '%s'", attr.c_str(),
                            net.id().c_str()));
  pred.check_against(*col, "network condition on '" + attr + "'");
  bool any = false;
  for (int v = 0; v < net.node_count() && !any; ++v) any = pred.matches(*col, v);
  return require_none ? !any : any;
}

std::string NetworkCondition::describe() const {
  return std::string(require_none ? "if_none_" : "if_any_") + attr + pred.describe();
}

// ---------- DyadExpr ----------

struct DyadExpr::Parser {
  const std::string& s;
  std::size_t pos = 0;
  DyadExpr* out;

  explicit Parser(const std::string& src, DyadExpr* o) : s(src), out(o) {}

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool eat(const char* tok) {
    skip_ws();
    const std::size_t len = std::strlen(tok);
    if (s.compare(pos, len, tok) == 0) {
      pos += len;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw config_error(strf("dyad expression '%s': %s (at offset %zu)", s.c_str(), why.c_str(), pos));
  }

  int add(NodeRec r) {
    out->nodes_.push_back(std::move(r));
    return static_cast<int>(out->nodes_.size()) - 1;
  }

  int parse_or() {
    int lhs = parse_and();
    while (eat("||")) {
      NodeRec r;
      r.kind = NodeKind::Or;
      r.lhs = lhs;
      r.rhs = parse_and();
      lhs = add(std::move(r));
    }
    return lhs;
  }
  int parse_and() {
    int lhs = parse_not();
    while (true) {
      skip_ws();
      if (s.compare(pos, 2, "&&") == 0) {
        pos += 2;
        NodeRec r;
        r.kind = NodeKind::And;
        r.lhs = lhs;
        r.rhs = parse_not();
        lhs = add(std::move(r));
      } else {
        return lhs;
      }
    }
  }
  int parse_not() {
    skip_ws();
    if (pos < s.size() && s[pos] == '!' && (pos + 1 >= s.size() || s[pos + 1] != '=')) {
      ++pos;
      NodeRec r;
      r.kind = NodeKind::Not;
      r.lhs = parse_not();
      return add(std::move(r));
    }
    if (eat("(")) {
      int inner = parse_or();
      if (!eat(")")) fail("expected ')'");
      return inner;
    }
    return parse_cmp();
  }
  int parse_cmp() {
    NodeRec r;
    r.kind = NodeKind::Cmp;
    r.a = parse_operand();
    skip_ws();
    if (eat("==")) r.op = CmpOp::Eq;
    else if (eat("!=")) r.op = CmpOp::Ne;
    else if (eat("<=")) r.op = CmpOp::Le;
    else if (eat(">=")) r.op = CmpOp::Ge;
    else if (eat("<")) r.op = CmpOp::Lt;
    else if (eat(">")) r.op = CmpOp::Gt;
    else fail("expected comparison operator");
    r.b = parse_operand();
    return add(std::move(r));
  }
  Operand parse_operand() {
    skip_ws();
    if (pos >= s.size()) fail("expected operand");
    Operand o;
    const char c = s[pos];
    if (c == '"' || c == '\'') {
      const char quote = c;
      std::size_t end = s.find(quote, pos + 1);
      if (end == std::string::npos) fail("unterminated string literal");
      o.kind = OperandKind::LitStr;
      o.text = s.substr(pos + 1, end - pos - 1);
      pos = end + 1;
      return o;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
      std::size_t used = 0;
      o.kind = OperandKind::LitNum;
      try {
        o.num = std::stod(s.substr(pos), &used);
      } catch (const std::exception&) {
        fail("bad numeric literal");
      }
      pos += used;
      return o;
    }
    // identifier: a.attr / b.attr / bare word (string literal)
    std::size_t end = pos;
    while (end < s.size() && (std::isalnum(static_cast<unsigned char>(s[end])) || s[end] == '_' || s[end] == '.'))
      ++end;
    if (end == pos) fail("expected operand");
    std::string word = s.substr(pos, end - pos);
    pos = end;
    if (word.size() > 2 && word[1] == '.' && (word[0] == 'a' || word[0] == 'b')) {
      o.kind = word[0] == 'a' ? OperandKind::AttrA : OperandKind::AttrB;
      o.text = word.substr(2);
      return o;
    }
    o.kind = OperandKind::LitStr;
    o.text = word;
    return o;
  }
};

DyadExpr DyadExpr::parse(const std::string& src) {
  DyadExpr e;
  e.src_ = src;
  Parser p(src, &e);
  e.root_ = p.parse_or();
  p.skip_ws();
  if (p.pos != src.size()) p.fail("trailing characters");
  return e;
}

namespace {
struct ExprValue {
  bool is_string = false;
  double num = 0.0;
  const std::string* str = nullptr;
};
} // namespace

bool DyadExpr::eval_node(int id, const Network& net, int na, int nb) const {
  const NodeRec& r = nodes_[id];
  switch (r.kind) {
    case NodeKind::Or: return eval_node(r.lhs, net, na, nb) || eval_node(r.rhs, net, na, nb);
    case NodeKind::And: return eval_node(r.lhs, net, na, nb) && eval_node(r.rhs, net, na, nb);
    case NodeKind::Not: return !eval_node(r.lhs, net, na, nb);
    case NodeKind::Cmp: break;
  }
  auto value_of = [&](const Operand& o) -> ExprValue {
    ExprValue v;
    switch (o.kind) {
      case OperandKind::LitNum:
        v.is_string = false;
        v.num = o.num;
        return v;
      case OperandKind::LitStr:
        v.is_string = true;
        v.str = &o.text;
        return v;
      case OperandKind::AttrA:
      case OperandKind::AttrB: {
        const int node = o.kind == OperandKind::AttrA ? na : nb;
        const AttributeColumn* col = net.find_attr(o.text);
        if (!col)
          throw config_error(strf("dyad expression '%s': attribute '%s' absent on network '%s'", src_.c_str(),
                                  o.text.c_str(), net.id().c_str()));
        if (col->categorical) {
          v.is_string = true;
          v.str = &col->label_of(node);
        } else {
          v.is_string = false;
          v.num = col->reals[node];
        }
        return v;
      }
    }
    return v;
  };
  const ExprValue va = value_of(r.a);
  const ExprValue vb = value_of(r.b);
  if (va.is_string != vb.is_string)
    throw config_error(strf("dyad expression '%s': comparing categorical against numeric", src_.c_str()));
  if (va.is_string) {
    if (r.op != CmpOp::Eq && r.op != CmpOp::Ne)
      throw config_error(strf("dyad expression '%s': ordering comparison on categorical values", src_.c_str()));
    const bool eq = *va.str == *vb.str;
    return r.op == CmpOp::Eq ? eq : !eq;
  }
  switch (r.op) {
    case CmpOp::Eq: return va.num == vb.num;
    case CmpOp::Ne: return va.num != vb.num;
    case CmpOp::Lt: return va.num < vb.num;
    case CmpOp::Le: return va.num <= vb.num;
    case CmpOp::Gt: return va.num > vb.num;
    case CmpOp::Ge: return va.num >= vb.num;
  }
  return false;
}

bool DyadExpr::eval_oriented(const Network& net, int a, int b) const { return eval_node(root_, net, a, b); }

void DyadExpr::check_types(const Network& net) const {
  if (net.node_count() >= 2) (void)eval(net, 0, 1); // evaluation performs the type checks
}

// ---------- Term ----------

Term Term::edges() {
  Term t;
  t.kind = Kind::Edges;
  t.name = t.default_name();
  return t;
}
Term Term::two_stars() {
  Term t;
  t.kind = Kind::TwoStars;
  t.name = t.default_name();
  return t;
}
Term Term::triangles() {
  Term t;
  t.kind = Kind::Triangles;
  t.name = t.default_name();
  return t;
}
Term Term::mixing(std::string attr, std::string a, std::string b, std::optional<NetworkCondition> cond) {
  Term t;
  t.kind = Kind::Mixing;
  t.attr = std::move(attr);
  t.level_a = std::move(a);
  t.level_b = std::move(b);
  if (t.level_b < t.level_a) std::swap(t.level_a, t.level_b); // unordered pair, canonical order
  t.condition = std::move(cond);
  t.name = t.default_name();
  return t;
}
Term Term::incident_edges(std::string attr, ValuePred pred) {
  Term t;
  t.kind = Kind::IncidentEdges;
  t.attr = std::move(attr);
  t.pred = std::move(pred);
  t.name = t.default_name();
  return t;
}
Term Term::custom(const std::string& expr_src) {
  Term t;
  t.kind = Kind::Custom;
  t.expr = std::make_shared<DyadExpr>(DyadExpr::parse(expr_src));
  t.name = t.default_name();
  return t;
}

std::string Term::default_name() const {
  switch (kind) {
    case Kind::Edges: return "edges";
    case Kind::TwoStars: return "two_stars";
    case Kind::Triangles: return "triangles";
    case Kind::Mixing: {
      std::string s = "mixing:" + attr + ":" + level_a + "|" + level_b;
      if (condition) s += ":" + condition->describe();
      return s;
    }
    case Kind::IncidentEdges: return "incident:" + attr + pred.describe();
    case Kind::Custom: return "custom:" + (expr ? expr->source() : std::string("?"));
  }
  return "?";
}

int StatisticSpec::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < terms.size(); ++i)
    if (terms[i].name == name) return static_cast<int>(i);
  return -1;
}

void StatisticSpec::validate() const {
  if (terms.empty()) throw config_error("statistic spec has no terms");
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].name.empty()) throw config_error("statistic term with empty name");
    for (std::size_t j = i + 1; j < terms.size(); ++j)
      if (terms[i].name == terms[j].name)
        throw config_error("duplicate statistic term name '" + terms[i].name + "'");
  }
}

// ---------- BoundStats ----------

BoundStats::BoundStats(const StatisticSpec& spec, const Network& net)
    : spec_(&spec), n_(net.node_count()), p_(spec.dim()) {
  spec.validate();
  const int D = net.dyad_count();
  plans_.reserve(spec.terms.size());
  for (const Term& t : spec_->terms) {
    Plan plan;
    plan.kind = t.kind;
    switch (t.kind) {
      case Term::Kind::Edges:
        plan.w.assign(D, 1);
        break;
      case Term::Kind::TwoStars:
      case Term::Kind::Triangles:
        all_independent_ = false;
        break;
      case Term::Kind::Mixing: {
        const AttributeColumn* col = net.find_attr(t.attr);
        if (!col)
          throw config_error(strf("mixing term '%s': attribute '%s' absent on network '%s'", t.name.c_str(),
                                  t.attr.c_str(), net.id().c_str()));
        if (!col->categorical)
          throw config_error(strf("mixing term '%s': attribute '%s' is numeric", t.name.c_str(), t.attr.c_str()));
        plan.w.assign(D, 0);
        const bool active = !t.condition || t.condition->holds(net);
        if (active) {
          const int ca = col->code_of(t.level_a);
          const int cb = col->code_of(t.level_b);
          if (ca >= 0 && cb >= 0) {
            for (int i = 0; i < n_; ++i)
              for (int j = i + 1; j < n_; ++j) {
                const int ci = col->codes[i], cj = col->codes[j];
                if ((ci == ca && cj == cb) || (ci == cb && cj == ca))
                  plan.w[net.dyad_index(Dyad{i, j})] = 1;
              }
          }
        }
        break;
      }
      case Term::Kind::IncidentEdges: {
        const AttributeColumn* col = net.find_attr(t.attr);
        if (!col)
          throw config_error(strf("incident-edges term '%s': attribute '%s' absent on network '%s'", t.name.c_str(),
                                  t.attr.c_str(), net.id().c_str()));
        t.pred.check_against(*col, "incident-edges term '" + t.name + "'");
        std::vector<int> node_match(n_, 0);
        for (int v = 0; v < n_; ++v) node_match[v] = t.pred.matches(*col, v) ? 1 : 0;
        plan.w.assign(D, 0);
        for (int i = 0; i < n_; ++i)
          for (int j = i + 1; j < n_; ++j)
            plan.w[net.dyad_index(Dyad{i, j})] = node_match[i] + node_match[j];
        break;
      }
      case Term::Kind::Custom: {
        if (!t.expr) throw config_error("custom term '" + t.name + "' has no expression");
        plan.w.assign(D, 0);
        for (int i = 0; i < n_; ++i)
          for (int j = i + 1; j < n_; ++j)
            plan.w[net.dyad_index(Dyad{i, j})] = t.expr->eval(net, i, j) ? 1 : 0;
        break;
      }
    }
    plans_.push_back(std::move(plan));
  }
}

Eigen::VectorXd BoundStats::eval(const Network& net) const {
  Eigen::VectorXd g(p_);
  for (int t = 0; t < p_; ++t) {
    const Plan& plan = plans_[t];
    long long acc = 0;
    switch (plan.kind) {
      case Term::Kind::Edges:
        acc = net.edge_count();
        break;
      case Term::Kind::TwoStars:
        for (int i = 0; i < n_; ++i) {
          const long long d = net.degree(i);
          acc += d * (d - 1) / 2;
        }
        break;
      case Term::Kind::Triangles: {
        // each triangle contributes one common neighbour to each of its 3 edges
        long long s = 0;
        for (int i = 0; i < n_; ++i) {
          uint64_t rest = net.neighbor_mask(i) >> (i + 1) << (i + 1);
          while (rest) {
            const int j = std::countr_zero(rest);
            rest &= rest - 1;
            s += std::popcount(net.neighbor_mask(i) & net.neighbor_mask(j));
          }
        }
        acc = s / 3;
        break;
      }
      default:
        for (int i = 0; i < n_; ++i) {
          uint64_t rest = net.neighbor_mask(i) >> (i + 1) << (i + 1);
          while (rest) {
            const int j = std::countr_zero(rest);
            rest &= rest - 1;
            acc += plan.w[net.dyad_index(Dyad{i, j})];
          }
        }
        break;
    }
    g[t] = static_cast<double>(acc);
  }
  return g;
}

void BoundStats::change(const Network& net, Dyad d, double* out) const {
  const int idx = net.dyad_index(d);
  const bool present = net.has_edge(d);
  const double sign = present ? -1.0 : 1.0;
  for (int t = 0; t < p_; ++t) {
    const Plan& plan = plans_[t];
    switch (plan.kind) {
      case Term::Kind::TwoStars: {
        const int di = net.degree(d.i), dj = net.degree(d.j);
        out[t] = present ? -static_cast<double>(di - 1 + dj - 1) : static_cast<double>(di + dj);
        break;
      }
      case Term::Kind::Triangles:
        out[t] = sign * net.common_neighbors(d.i, d.j);
        break;
      default:
        out[t] = sign * plan.w[idx];
        break;
    }
  }
}

Eigen::VectorXd BoundStats::change(const Network& net, Dyad d) const {
  Eigen::VectorXd delta(p_);
  change(net, d, delta.data());
  return delta;
}

Eigen::VectorXd eval_stats(const Network& net, const StatisticSpec& spec) {
  return BoundStats(spec, net).eval(net);
}

Eigen::VectorXd change_stats(const Network& net, Dyad d, const StatisticSpec& spec) {
  return BoundStats(spec, net).change(net, d);
}

} // namespace netens
