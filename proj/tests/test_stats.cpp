#include <doctest.h>

#include "netens/rng.hpp"
#include "netens/stats.hpp"
#include "oracle.hpp"

using namespace netens;

static StatisticSpec est_spec() {
  return StatisticSpec{{Term::edges(), Term::two_stars(), Term::triangles()}};
}

static Network triangle_graph() {
  Network net(3, "K3");
  net.set_edge(Dyad{0, 1}, true);
  net.set_edge(Dyad{1, 2}, true);
  net.set_edge(Dyad{0, 2}, true);
  return net;
}

TEST_CASE("edges/2-stars/triangles on pinned graphs") {
  const StatisticSpec spec = est_spec();

  const Eigen::VectorXd g_tri = eval_stats(triangle_graph(), spec);
  CHECK(g_tri[0] == 3.0);
  CHECK(g_tri[1] == 3.0);
  CHECK(g_tri[2] == 1.0);

  Network one(3, "one");
  one.set_edge(Dyad{0, 1}, true);
  const Eigen::VectorXd g_one = eval_stats(one, spec);
  CHECK(g_one[0] == 1.0);
  CHECK(g_one[1] == 0.0);
  CHECK(g_one[2] == 0.0);

  const Eigen::VectorXd g_empty = eval_stats(Network(3, "empty"), spec);
  CHECK(g_empty.isZero(0.0));
}

TEST_CASE("complete-graph closed forms") {
  const StatisticSpec spec = est_spec();
  for (int n = 3; n <= 8; ++n) {
    Network net(n, "K");
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) net.set_edge(Dyad{i, j}, true);
    const Eigen::VectorXd g = eval_stats(net, spec);
    CHECK(g[0] == n * (n - 1) / 2.0);
    CHECK(g[1] == n * ((n - 1) * (n - 2) / 2.0)); // n * C(n-1,2)
    CHECK(g[2] == n * (n - 1) * (n - 2) / 6.0);   // C(n,3)
  }
}

TEST_CASE("change statistics on pinned graphs") {
  const StatisticSpec spec = est_spec();

  Network net = triangle_graph();
  net.set_edge(Dyad{1, 2}, false); // K3 minus one edge
  const Eigen::VectorXd delta = change_stats(net, Dyad{1, 2}, spec);
  CHECK(delta[0] == 1.0);
  CHECK(delta[1] == 2.0);
  CHECK(delta[2] == 1.0);

  const Eigen::VectorXd d0 = change_stats(Network(3, "e"), Dyad{1, 2}, spec);
  CHECK(d0[0] == 1.0);
  CHECK(d0[1] == 0.0);
  CHECK(d0[2] == 0.0);
}

TEST_CASE("change statistics antisymmetry") {
  const StatisticSpec spec = est_spec();
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    Network net = oracle::random_graph(6, 0.5, rng);
    const Dyad d = net.dyad_at(static_cast<int>(rng.below(net.dyad_count())));
    const Eigen::VectorXd fwd = change_stats(net, d, spec);
    net.toggle(d);
    const Eigen::VectorXd back = change_stats(net, d, spec);
    CHECK((fwd + back).isZero(0.0));
  }
}

TEST_CASE("eval matches brute force on random graphs") {
  const StatisticSpec spec = est_spec();
  Rng rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + static_cast<int>(rng.below(7));
    const Network net = oracle::random_graph(n, 0.2 + 0.6 * rng.u01(), rng);
    const oracle::Adj a = oracle::adj_of(net);
    const Eigen::VectorXd g = eval_stats(net, spec);
    CHECK(g[0] == static_cast<double>(oracle::edges(a)));
    CHECK(g[1] == static_cast<double>(oracle::two_stars(a)));
    CHECK(g[2] == static_cast<double>(oracle::triangles(a)));
  }
}

// the spec-level contract: change equals eval-after minus eval-before, exactly
TEST_CASE("change statistics agree with eval differences on 10k random triples") {
  Rng rng(29);
  StatisticSpec spec = est_spec();
  spec.terms.push_back(Term::mixing("grp", "a", "b"));
  spec.terms.push_back(Term::incident_edges("age", ValuePred{ValuePred::Op::Ge, false, 30.0, "", {}}));
  spec.terms.push_back(Term::custom("a.grp == b.grp && a.age < 30"));

  int checked = 0;
  while (checked < 10000) {
    const int n = 2 + static_cast<int>(rng.below(7));
    Network net = oracle::random_graph(n, 0.2 + 0.6 * rng.u01(), rng);
    std::vector<std::string> grp(n);
    std::vector<double> age(n);
    for (int v = 0; v < n; ++v) {
      grp[v] = rng.bernoulli(0.5) ? "a" : "b";
      age[v] = 10.0 + 50.0 * rng.u01();
    }
    net.set_categorical_attr("grp", grp);
    net.set_real_attr("age", age);

    const BoundStats bound(spec, net);
    for (int t = 0; t < 10 && checked < 10000; ++t, ++checked) {
      const Dyad d = net.dyad_at(static_cast<int>(rng.below(net.dyad_count())));
      const Eigen::VectorXd before = bound.eval(net);
      const Eigen::VectorXd delta = bound.change(net, d);
      net.toggle(d);
      const Eigen::VectorXd after = bound.eval(net);
      REQUIRE((after - before - delta).isZero(0.0));
    }
  }
}

TEST_CASE("mixing cells partition the edge count") {
  Rng rng(41);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 3 + static_cast<int>(rng.below(5));
    Network net = oracle::random_graph(n, 0.5, rng);
    std::vector<std::string> grp(n);
    for (int v = 0; v < n; ++v) grp[v] = std::string(1, static_cast<char>('a' + rng.below(3)));
    net.set_categorical_attr("grp", grp);

    StatisticSpec spec;
    spec.terms.push_back(Term::edges());
    const char* lv = "abc";
    for (int x = 0; x < 3; ++x)
      for (int y = x; y < 3; ++y)
        spec.terms.push_back(Term::mixing("grp", std::string(1, lv[x]), std::string(1, lv[y])));
    const Eigen::VectorXd g = eval_stats(net, spec);
    double cells = 0;
    for (int t = 1; t < spec.dim(); ++t) cells += g[t];
    CHECK(cells == g[0]);
  }
}

TEST_CASE("mixing matches brute force and respects unordered pairs") {
  Rng rng(43);
  Network net = oracle::random_graph(6, 0.5, rng);
  net.set_categorical_attr("role", {"p", "c", "p", "c", "p", "c"});
  const oracle::Adj a = oracle::adj_of(net);
  const auto* col = net.find_attr("role");

  Term forward = Term::mixing("role", "p", "c");
  Term reversed = Term::mixing("role", "c", "p");
  reversed.name = "rev"; // unordered pair canonicalizes to the same default name
  const StatisticSpec spec{{forward, reversed}};
  const Eigen::VectorXd g = eval_stats(net, spec);
  const long long want = oracle::weighted_edges(a, [&](int i, int j) {
    return (col->label_of(i) == "p") != (col->label_of(j) == "p") ? 1 : 0;
  });
  CHECK(g[0] == static_cast<double>(want));
  CHECK(g[0] == g[1]); // unordered pair: same cell either way

  // identical default names collide
  const StatisticSpec dup{{Term::mixing("role", "p", "c"), Term::mixing("role", "c", "p")}};
  CHECK_THROWS_AS(dup.validate(), config_error);
}

TEST_CASE("mixing cell referencing an absent level counts zero") {
  Network net = triangle_graph();
  net.set_categorical_attr("role", {"p", "p", "p"});
  const StatisticSpec spec{{Term::mixing("role", "p", "ghost")}};
  CHECK(eval_stats(net, spec)[0] == 0.0);
}

TEST_CASE("incident edges equals degree sum over matching nodes") {
  Rng rng(47);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 3 + static_cast<int>(rng.below(5));
    Network net = oracle::random_graph(n, 0.5, rng);
    std::vector<double> age(n);
    for (int v = 0; v < n; ++v) age[v] = 10 + static_cast<double>(rng.below(60));
    net.set_real_attr("age", age);

    const StatisticSpec spec{{Term::incident_edges("age", ValuePred{ValuePred::Op::Ge, false, 30.0, "", {}})}};
    double want = 0;
    for (int v = 0; v < n; ++v)
      if (age[v] >= 30.0) want += net.degree(v);
    CHECK(eval_stats(net, spec)[0] == want);
  }
}

TEST_CASE("custom dyad indicator matches a hand-written predicate and is symmetric") {
  Rng rng(53);
  Network net = oracle::random_graph(7, 0.5, rng);
  std::vector<std::string> role;
  std::vector<double> age;
  for (int v = 0; v < 7; ++v) {
    role.push_back(v % 2 ? "parent" : "child");
    age.push_back(10.0 + 8.0 * v);
  }
  net.set_categorical_attr("role", role);
  net.set_real_attr("age", age);
  const oracle::Adj a = oracle::adj_of(net);

  const StatisticSpec spec{{Term::custom("a.role == parent && b.age >= 18")}};
  const long long want = oracle::weighted_edges(a, [&](int i, int j) {
    const bool ij = role[i] == "parent" && age[j] >= 18.0;
    const bool ji = role[j] == "parent" && age[i] >= 18.0;
    return (ij || ji) ? 1 : 0;
  });
  CHECK(eval_stats(net, spec)[0] == static_cast<double>(want));
}

TEST_CASE("custom expression grammar: quoting, negation, parentheses, numbers") {
  Network net(2, "g");
  net.set_edge(Dyad{0, 1}, true);
  net.set_categorical_attr("tag", {"x y", "z"});
  net.set_real_attr("v", {1.5, -2.0});

  CHECK(eval_stats(net, StatisticSpec{{Term::custom("a.tag == 'x y' || b.tag == 'x y'")}})[0] == 1.0);
  CHECK(eval_stats(net, StatisticSpec{{Term::custom("!(a.v > 0) && b.v > 0")}})[0] == 1.0);
  CHECK(eval_stats(net, StatisticSpec{{Term::custom("a.v <= -2.0")}})[0] == 1.0);
  CHECK(eval_stats(net, StatisticSpec{{Term::custom("a.v != b.v")}})[0] == 1.0);
}

TEST_CASE("network condition gates a mixing cell") {
  NetworkCondition no_child{"role", ValuePred{ValuePred::Op::Eq, true, 0.0, "child", {}}, true};
  const StatisticSpec spec{{Term::mixing("role", "parent", "parent", no_child)}};

  Network with(3, "w");
  with.set_edge(Dyad{0, 1}, true);
  with.set_categorical_attr("role", {"parent", "parent", "child"});
  CHECK(eval_stats(with, spec)[0] == 0.0); // a child is present -> cell inactive

  Network without(3, "wo");
  without.set_edge(Dyad{0, 1}, true);
  without.set_categorical_attr("role", {"parent", "parent", "parent"});
  CHECK(eval_stats(without, spec)[0] == 1.0);
}

TEST_CASE("configuration errors") {
  Network net = triangle_graph();
  net.set_categorical_attr("role", {"p", "c", "p"});
  net.set_real_attr("age", {1, 2, 3});

  // missing attribute
  CHECK_THROWS_AS(eval_stats(net, StatisticSpec{{Term::mixing("ghost", "a", "b")}}), config_error);
  // mixing on a numeric attribute
  CHECK_THROWS_AS(eval_stats(net, StatisticSpec{{Term::mixing("age", "1", "2")}}), config_error);
  // ordering predicate on a categorical attribute
  CHECK_THROWS_AS(
      eval_stats(net, StatisticSpec{{Term::incident_edges("role", ValuePred{ValuePred::Op::Lt, true, 0, "p", {}})}}),
      config_error);
  // string literal against numeric attribute
  CHECK_THROWS_AS(eval_stats(net, StatisticSpec{{Term::custom("a.age == young")}}), config_error);
  // bad syntax
  CHECK_THROWS_AS(Term::custom("a.role =="), config_error);
  CHECK_THROWS_AS(Term::custom("(a.v > 1"), config_error);
  // empty spec
  CHECK_THROWS_AS(StatisticSpec{}.validate(), config_error);
}
