#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "netens/network.hpp"

namespace netens {

// Predicate on a single attribute value. Numeric columns allow ordering
// ops; categorical columns allow ==, != and set membership.
struct ValuePred {
  enum class Op { Eq, Ne, Lt, Le, Gt, Ge, In };
  Op op = Op::Eq;
  bool is_string = false;
  double num = 0.0;
  std::string str;
  std::vector<std::string> strs; // In

  bool matches(const AttributeColumn& col, int node) const;
  // throws config_error when op/typing don't fit the column
  void check_against(const AttributeColumn& col, const std::string& ctx) const;
  std::string describe() const;
};

// Gate applied per network: the term is active only when some / no node
// satisfies the predicate.
struct NetworkCondition {
  std::string attr;
  ValuePred pred;
  bool require_none = false; // false: at least one node must match
  bool holds(const Network& net) const;
  std::string describe() const;
};

// Tiny boolean expression language over the two endpoint attribute sets:
//   a.role == parent && !(b.age < 18) || a.grp != b.grp
// Comparisons: == != < <= > >=; literals are numbers, quoted or bare words;
// `a.` / `b.` reference endpoint attributes. Evaluation is symmetrized:
// the indicator fires if the expression holds for (i,j) or (j,i).
class DyadExpr {
public:
  static DyadExpr parse(const std::string& src); // config_error on syntax
  bool eval_oriented(const Network& net, int a, int b) const;
  bool eval(const Network& net, int i, int j) const {
    return eval_oriented(net, i, j) || eval_oriented(net, j, i);
  }
  void check_types(const Network& net) const; // config_error on bad attr/type
  const std::string& source() const { return src_; }

private:
  enum class NodeKind { Or, And, Not, Cmp };
  enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };
  enum class OperandKind { AttrA, AttrB, LitNum, LitStr };
  struct Operand {
    OperandKind kind = OperandKind::LitNum;
    std::string text; // attribute name or string literal
    double num = 0.0;
  };
  struct NodeRec {
    NodeKind kind = NodeKind::Cmp;
    int lhs = -1, rhs = -1; // children for Or/And/Not (Not uses lhs)
    CmpOp op = CmpOp::Eq;
    Operand a, b;
  };
  struct Parser;
  bool eval_node(int id, const Network& net, int na, int nb) const;
  std::vector<NodeRec> nodes_;
  int root_ = -1;
  std::string src_;
};

struct Term {
  enum class Kind { Edges, TwoStars, Triangles, Mixing, IncidentEdges, Custom };
  Kind kind = Kind::Edges;
  std::string name; // unique within a spec; default derived from content

  // Mixing: unordered category pair on a categorical attribute
  std::string attr;
  std::string level_a, level_b;
  std::optional<NetworkCondition> condition;

  // IncidentEdges: ties incident on nodes whose `attr` satisfies `pred`
  // (an edge with both endpoints matching counts twice)
  ValuePred pred;

  // Custom: symmetric dyad indicator
  std::shared_ptr<const DyadExpr> expr;

  bool dyad_independent() const { return kind != Kind::TwoStars && kind != Kind::Triangles; }
  std::string default_name() const;

  static Term edges();
  static Term two_stars();
  static Term triangles();
  static Term mixing(std::string attr, std::string a, std::string b,
                     std::optional<NetworkCondition> cond = std::nullopt);
  static Term incident_edges(std::string attr, ValuePred pred);
  static Term custom(const std::string& expr_src);
};

struct StatisticSpec {
  std::vector<Term> terms;
  int dim() const { return static_cast<int>(terms.size()); }
  int index_of(const std::string& name) const;
  void validate() const; // unique, nonempty names
};

// Per-(spec, network) evaluation plan. Dyad-independent terms reduce to an
// integer weight per dyad; change statistics for the two dyad-dependent
// terms come from degrees / common-neighbour counts. Binding validates
// attribute references, so evaluation itself cannot fail.
class BoundStats {
public:
  BoundStats(const StatisticSpec& spec, const Network& net);

  const StatisticSpec& spec() const { return *spec_; }
  int dim() const { return p_; }

  // `net` must be the bound network or a toggled copy of it (same nodes
  // and attributes).
  Eigen::VectorXd eval(const Network& net) const;
  void change(const Network& net, Dyad d, double* out) const;
  Eigen::VectorXd change(const Network& net, Dyad d) const;

  bool all_dyad_independent() const { return all_independent_; }
  // weight of term t on dyad idx; 0 for dyad-dependent terms
  int dyad_weight(int t, int dyad_idx) const { return plans_[t].w.empty() ? 0 : plans_[t].w[dyad_idx]; }

private:
  const StatisticSpec* spec_;
  int n_ = 0, p_ = 0;
  bool all_independent_ = true;
  struct Plan {
    Term::Kind kind;
    std::vector<int> w; // per-dyad weight for dyad-independent kinds
  };
  std::vector<Plan> plans_;
};

Eigen::VectorXd eval_stats(const Network& net, const StatisticSpec& spec);
Eigen::VectorXd change_stats(const Network& net, Dyad d, const StatisticSpec& spec);

} // namespace netens
