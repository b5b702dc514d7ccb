#pragma once

// Brute-force reference implementations used only by tests. Everything here
// recomputes from first principles (explicit adjacency matrices, triple
// loops, full state enumeration) so the library under test never supplies
// its own expected values.

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "netens/network.hpp"
#include "netens/rng.hpp"
#include "netens/stats.hpp"

namespace oracle {

using Adj = std::vector<std::vector<int>>;

Adj adj_of(const netens::Network& net);

long long edges(const Adj& a);
long long two_stars(const Adj& a);  // ordered-centre pair definition, triple loop
long long triangles(const Adj& a);  // i<j<k triple loop

// sum over present edges of w(i,j); the test supplies w independently
long long weighted_edges(const Adj& a, const std::function<int(int, int)>& w);

// random simple graph with edge probability pr
netens::Network random_graph(int n, double pr, netens::Rng& rng, const std::string& id = "rand");

// ---- exhaustive-enumeration reference implementations ----
// These loop over every adjacency pattern as raw bit masks and recompute
// statistics with the triple-loop counters above; nothing is shared with
// the library's Gray-code/enumeration machinery.

using StatsFn = std::function<Eigen::VectorXd(const Adj&)>;

// standard 3-statistic evaluator (edges, 2-stars, triangles)
StatsFn est_stats_fn();

struct NaiveMoments {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double logz = 0;
};

// moments under weights exp<theta,g>, over all graphs or all completions
NaiveMoments naive_moments(const netens::Network& net, const StatsFn& fn, const Eigen::VectorXd& theta,
                           bool conditional);

// full observation-pattern decomposition, computed by grouping states in a map
struct NaiveDecomposition {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma, mean_cond_sigma, var_cond_mu;
};
NaiveDecomposition naive_decomposition(const netens::Network& net, const StatsFn& fn, const Eigen::VectorXd& theta);

// independent Newton solver for the ensemble face-value MLE on enumerable
// networks: plain gradient/Hessian from naive_moments, undamped solve with
// a step cap, run to tight tolerance
Eigen::VectorXd newton_mle(const std::vector<netens::Network>& nets, const Eigen::MatrixXd& X, const StatsFn& fn,
                           const std::vector<std::pair<int, int>>& free_entries, const Eigen::MatrixXd& offset,
                           int p, Eigen::VectorXd beta0, double tol = 1e-11, int max_iter = 200);

} // namespace oracle
