#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "nsvr/mesh.hpp"
#include "nsvr/sparse_chol.hpp"

namespace nsvr {

// Linear-element FEM matrices: C_ij = <psi_i, psi_j>, G_ij = <grad psi_i,
// grad psi_j>, and the lumped mass c_lumped_i = sum_j C_ij.
struct FemMatrices {
  SparsePrecision c;
  Eigen::VectorXd c_lumped;
  SparsePrecision g;

  Eigen::Index size() const { return g.rows(); }
};

FemMatrices assemble_fem(const TriangularMesh& mesh);

// Q_1 = K, Q_2 = K C~^{-1} K, Q_a = K C~^{-1} Q_{a-2} C~^{-1} K with
// K = kappa^2 C + G. With lumped = true, C~ also replaces C inside K.
SparsePrecision precision_stationary(const FemMatrices& fem, double kappa, int alpha,
                                     bool lumped = true);

// log |Q_alpha| for the lumped precision, from one factorization of K:
// log|Q_2| = 2 log|K| - log|C~| and in general alternating powers.
// `k_factor` is reused across calls and keeps its symbolic analysis.
double log_det_stationary(const FemMatrices& fem, double kappa, int alpha,
                          SparseCholesky& k_factor);

// Matern variance of the SPDE solution for tau = 1 in two dimensions:
// Gamma(nu) / (Gamma(nu + 1) 4 pi kappa^{2 nu}).
double matern_variance(double kappa, double nu);

struct LocalVariability {
  Eigen::VectorXd raw;           // sd of beta-hat over {v} and its neighbors
  Eigen::VectorXd standardized;  // mean 0, sd 1 across vertices (0 when degenerate)
  bool degenerate = false;       // raw score constant across vertices
  double max_edge_jump = 0.0;    // max |standardized difference| over mesh edges
};

LocalVariability local_variability(const Eigen::VectorXd& beta_hat,
                                   const TriangularMesh& mesh);

// Non-stationary parameters: log sigma(s) = log sigma0 + theta1 delta(s),
// log rho(s) = log rho0 + theta2, so kappa = kappa0 exp(-theta2) and
// log tau(s) = log tau0 - theta1 delta(s) + theta2 nu.
struct NonstatField {
  double theta1 = 0.0;
  double theta2 = 0.0;
  Eigen::VectorXd delta;
  double sigma0 = 1.0;
  double rho0 = 1.0;
  double nu = 1.0;

  double kappa0() const;
  double kappa() const;
  double log_tau0() const;
  // Throws kOverflow when any |log tau| would overflow exp.
  Eigen::VectorXd log_tau() const;
};

// T Q_alpha(kappa) T with T = diag(tau_v).
SparsePrecision precision_nonstationary(const FemMatrices& fem, const NonstatField& field,
                                        int alpha);

}  // namespace nsvr
