#include "netens/ensemble.hpp"

#include <cmath>
#include <set>

#include "netens/util.hpp"

namespace netens {

ParamMatrix::ParamMatrix(int q, int p) {
  values = Eigen::MatrixXd::Zero(q, p);
  mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(q, p, true);
  offset = Eigen::MatrixXd::Zero(q, p);
}

std::vector<std::pair<int, int>> ParamMatrix::free_entries() const {
  std::vector<std::pair<int, int>> out;
  for (int c = 0; c < p(); ++c)
    for (int r = 0; r < q(); ++r)
      if (mask(r, c)) out.emplace_back(r, c);
  return out;
}

int ParamMatrix::free_count() const { return static_cast<int>(mask.count()); }

Eigen::VectorXd ParamMatrix::free_values() const {
  const auto idx = free_entries();
  Eigen::VectorXd beta(static_cast<int>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) beta[static_cast<int>(k)] = values(idx[k].first, idx[k].second);
  return beta;
}

void ParamMatrix::set_free_values(const Eigen::VectorXd& beta) {
  const auto idx = free_entries();
  if (beta.size() != static_cast<Eigen::Index>(idx.size()))
    throw config_error(strf("parameter vector has %ld entries, mask has %zu free entries", (long)beta.size(),
                            idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) values(idx[k].first, idx[k].second) = beta[static_cast<int>(k)];
}

void ParamMatrix::validate() const {
  if (values.rows() != mask.rows() || values.cols() != mask.cols() || values.rows() != offset.rows() ||
      values.cols() != offset.cols())
    throw config_error("parameter matrix, mask and offset shapes disagree");
  for (int c = 0; c < p(); ++c)
    for (int r = 0; r < q(); ++r)
      if (!mask(r, c) && values(r, c) != 0.0)
        throw config_error(strf("masked entry B(%d,%d) is %g, must be 0", r, c, values(r, c)));
}

bool Ensemble::has_tag(int s, const std::string& tag) const {
  for (const auto& t : tags[s])
    if (t == tag) return true;
  return false;
}

void Ensemble::validate() const {
  const int S = size();
  if (S < 1) throw data_error("ensemble is empty");
  if (X.rows() != S || static_cast<int>(tags.size()) != S)
    throw data_error("ensemble lists have unequal lengths");
  if (static_cast<int>(covariate_names.size()) != q()) throw data_error("covariate names/width mismatch");
  for (std::size_t i = 0; i < covariate_names.size(); ++i)
    for (std::size_t j = i + 1; j < covariate_names.size(); ++j)
      if (covariate_names[i] == covariate_names[j])
        throw data_error("duplicate covariate name '" + covariate_names[i] + "'");
  for (int s = 0; s < S; ++s)
    for (int r = 0; r < q(); ++r)
      if (!std::isfinite(X(s, r)))
        throw data_error(strf("covariate '%s' of network '%s' is not finite", covariate_names[r].c_str(),
                              networks[s].id().c_str()));
  std::set<std::string> ids;
  for (const Network& net : networks)
    if (!ids.insert(net.id()).second) throw data_error("duplicate network id '" + net.id() + "'");
  spec.validate();
  for (const Network& net : networks) net.check_consistent();
}

Eigen::VectorXd theta_for(const ParamMatrix& B, const Eigen::RowVectorXd& x) {
  if (x.size() != B.q())
    throw config_error(strf("covariate row has %ld entries, parameter matrix has %d rows", (long)x.size(), B.q()));
  return (B.values + B.offset).transpose() * x.transpose();
}

Eigen::MatrixXd design_matrix(const Eigen::RowVectorXd& x, int p) {
  const int q = static_cast<int>(x.size());
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(p, q * p);
  for (int c = 0; c < p; ++c) Z.block(c, c * q, 1, q) = x;
  return Z;
}

Eigen::MatrixXd reduced_design(const ParamMatrix& B, const Eigen::RowVectorXd& x) {
  if (x.size() != B.q())
    throw config_error(strf("covariate row has %ld entries, parameter matrix has %d rows", (long)x.size(), B.q()));
  const auto idx = B.free_entries();
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(B.p(), static_cast<int>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) Z(idx[k].second, static_cast<int>(k)) = x[idx[k].first];
  return Z;
}

Eigen::VectorXd aggregate_from_stats(const Ensemble& ens, const ParamMatrix& B,
                                     const std::vector<Eigen::VectorXd>& stats) {
  const auto idx = B.free_entries();
  Eigen::VectorXd agg = Eigen::VectorXd::Zero(static_cast<int>(idx.size()));
  for (int s = 0; s < ens.size(); ++s)
    for (std::size_t k = 0; k < idx.size(); ++k)
      agg[static_cast<int>(k)] += ens.X(s, idx[k].first) * stats[s][idx[k].second];
  return agg;
}

Eigen::VectorXd aggregate_suffstat(const Ensemble& ens, const ParamMatrix& B, const std::vector<Network>& nets) {
  if (static_cast<int>(nets.size()) != ens.size())
    throw config_error("aggregate_suffstat: network list length differs from ensemble");
  std::vector<Eigen::VectorXd> stats;
  stats.reserve(nets.size());
  for (const Network& net : nets) stats.push_back(eval_stats(net, ens.spec));
  return aggregate_from_stats(ens, B, stats);
}

std::vector<std::string> coordinate_names(const ParamMatrix& B, const std::vector<std::string>& cov_names,
                                          const StatisticSpec& spec) {
  std::vector<std::string> out;
  for (const auto& [r, c] : B.free_entries()) out.push_back(spec.terms[c].name + ":" + cov_names[r]);
  return out;
}

} // namespace netens
