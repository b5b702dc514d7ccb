#pragma once

#include <string>
#include <vector>

#include "netens/information.hpp"

namespace netens {

// Why an information matrix came out singular: the complete-data model is
// already rank-deficient on these data (affinely dependent statistics), or
// the deficiency appears only once the observation process is accounted for.
enum class IdentClass { FullRank, CompleteDataSingular, MissingnessInduced };

struct NullDirection {
  double eigenvalue = 0;
  Eigen::VectorXd loading; // unit eigenvector over the reduced coordinates
};

struct IdentifiabilityReport {
  std::vector<std::string> coord_names;
  Eigen::MatrixXd complete_info; // Sum_s Z' Sigma_s Z
  Eigen::MatrixXd fisher_info;   // Sum_s Z' Var[mu_s(.|obs)] Z
  Eigen::VectorXd complete_eigs, fisher_eigs; // ascending
  std::vector<NullDirection> complete_null, fisher_null;
  IdentClass classification = IdentClass::FullRank;
  double rel_tol = 0;

  bool identifiable() const { return classification == IdentClass::FullRank; }
  std::string describe() const; // one paragraph naming the near-null loadings
};

// Eigen-decomposes the complete-data and missingness-adjusted information
// matrices at B, listing directions with eigenvalue < rel_tol * lambda_max.
// Never throws on singularity: it is the report.
IdentifiabilityReport check_identifiability(const Ensemble& ens, const ParamMatrix& B,
                                            const InfoOptions& opts = {}, double rel_tol = 1e-8);

} // namespace netens
