#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "netens/network.hpp"
#include "netens/stats.hpp"

namespace netens {

// q x p coefficient matrix of the linear parameter map theta_s = (x_s B)^T,
// with a sparsity mask (free entries are the estimated coordinates, masked
// entries are pinned at 0) and an optional fixed offset matrix that is
// added when resolving theta but never estimated.
struct ParamMatrix {
  Eigen::MatrixXd values;                      // q x p, masked entries must be 0
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask; // true = free
  Eigen::MatrixXd offset;                      // q x p fixed contribution

  ParamMatrix() = default;
  ParamMatrix(int q, int p);

  int q() const { return static_cast<int>(values.rows()); }
  int p() const { return static_cast<int>(values.cols()); }

  // free entries in column-major order: the reduced coordinate system
  std::vector<std::pair<int, int>> free_entries() const;
  int free_count() const;
  Eigen::VectorXd free_values() const;
  void set_free_values(const Eigen::VectorXd& beta);

  void validate() const; // masked entries exactly 0, shapes agree
};

struct Ensemble {
  std::vector<Network> networks;
  Eigen::MatrixXd X; // S x q, row s = covariates of network s
  std::vector<std::string> covariate_names;
  StatisticSpec spec;
  std::vector<std::vector<std::string>> tags; // per-network labels

  int size() const { return static_cast<int>(networks.size()); }
  int q() const { return static_cast<int>(X.cols()); }
  int p() const { return spec.dim(); }
  Eigen::RowVectorXd x_row(int s) const { return X.row(s); }
  bool has_tag(int s, const std::string& tag) const;
  void validate() const;
};

// theta_s = (B + offset)^T x_s^T
Eigen::VectorXd theta_for(const ParamMatrix& B, const Eigen::RowVectorXd& x);

// Full Kronecker design I_p (x) x_s: p rows, q*p columns, column-major vec(B).
Eigen::MatrixXd design_matrix(const Eigen::RowVectorXd& x, int p);

// Design restricted to the free entries of B: p x k, theta = Z beta + offset part.
Eigen::MatrixXd reduced_design(const ParamMatrix& B, const Eigen::RowVectorXd& x);

// Sum_s Z_s^T g(y_s) over the given (fully imputed) networks, in reduced
// coordinates. nets must parallel ens.networks.
Eigen::VectorXd aggregate_suffstat(const Ensemble& ens, const ParamMatrix& B, const std::vector<Network>& nets);
// Same, but from precomputed per-network statistic vectors.
Eigen::VectorXd aggregate_from_stats(const Ensemble& ens, const ParamMatrix& B,
                                     const std::vector<Eigen::VectorXd>& stats);

// "<term-name>:<covariate-name>" per free coordinate, column-major order.
std::vector<std::string> coordinate_names(const ParamMatrix& B, const std::vector<std::string>& cov_names,
                                          const StatisticSpec& spec);

} // namespace netens
