#include "netens/identifiability.hpp"

#include <cmath>

#include "netens/util.hpp"

namespace netens {

namespace {

std::vector<NullDirection> near_null(const Eigen::MatrixXd& info, Eigen::VectorXd& eigs, double rel_tol) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  eigs = es.eigenvalues();
  const double lmax = std::max(eigs.maxCoeff(), 0.0);
  const double gate = rel_tol * std::max(lmax, 1e-300);
  std::vector<NullDirection> out;
  for (int j = 0; j < eigs.size(); ++j)
    if (eigs[j] < gate) out.push_back({eigs[j], es.eigenvectors().col(j)});
  return out;
}

void describe_directions(std::string& msg, const std::vector<NullDirection>& dirs,
                         const std::vector<std::string>& names) {
  for (const NullDirection& d : dirs) {
    msg += strf("\n  eigenvalue %.3e, loading:", d.eigenvalue);
    for (int j = 0; j < d.loading.size(); ++j)
      if (std::fabs(d.loading[j]) > 1e-4) msg += strf(" %+.4f*%s", d.loading[j], names[j].c_str());
  }
}

} // namespace

std::string IdentifiabilityReport::describe() const {
  std::string msg;
  switch (classification) {
    case IdentClass::FullRank:
      msg = strf("identifiable: smallest eigenvalues %.3e (complete) / %.3e (missingness-adjusted)",
                 complete_eigs.size() ? complete_eigs[0] : 0.0, fisher_eigs.size() ? fisher_eigs[0] : 0.0);
      break;
    case IdentClass::CompleteDataSingular:
      msg = "nonidentifiable on complete data: affinely dependent statistics";
      describe_directions(msg, complete_null, coord_names);
      break;
    case IdentClass::MissingnessInduced:
      msg = "nonidentifiable under the observation process (complete-data model is full rank)";
      describe_directions(msg, fisher_null, coord_names);
      break;
  }
  return msg;
}

IdentifiabilityReport check_identifiability(const Ensemble& ens, const ParamMatrix& B, const InfoOptions& opts,
                                            double rel_tol) {
  IdentifiabilityReport rep;
  rep.rel_tol = rel_tol;
  rep.coord_names = coordinate_names(B, ens.covariate_names, ens.spec);

  InfoOptions complete_opts = opts;
  complete_opts.seed = derive_seed(opts.seed, "ident-complete");
  rep.complete_info = ensemble_information(ens, B, InfoMode::Complete, complete_opts);
  InfoOptions fisher_opts = opts;
  fisher_opts.seed = derive_seed(opts.seed, "ident-fisher");
  rep.fisher_info = ensemble_information(ens, B, InfoMode::Fisher, fisher_opts);

  rep.complete_null = near_null(rep.complete_info, rep.complete_eigs, rel_tol);
  rep.fisher_null = near_null(rep.fisher_info, rep.fisher_eigs, rel_tol);

  if (!rep.complete_null.empty()) rep.classification = IdentClass::CompleteDataSingular;
  else if (!rep.fisher_null.empty()) rep.classification = IdentClass::MissingnessInduced;
  else rep.classification = IdentClass::FullRank;
  return rep;
}

} // namespace netens
