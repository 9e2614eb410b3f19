#pragma once

#include <random>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace nsvr {

using SparsePrecision = Eigen::SparseMatrix<double>;

// Sparse LLT with a fill-reducing ordering: P A P^T = L L^T. The symbolic
// analysis is done once per sparsity pattern and reused by factorize().
class SparseCholesky {
 public:
  SparseCholesky() = default;

  void analyze(const SparsePrecision& pattern);
  // Throws kNotPositiveDefinite on failure. Analyzes on first use.
  void factorize(const SparsePrecision& a);
  // analyze + factorize.
  void compute(const SparsePrecision& a);

  bool analyzed() const { return analyzed_; }
  Eigen::Index size() const { return n_; }

  double log_determinant() const;
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  // x = P^T L^{-T} z, so x ~ N(0, A^{-1}) when z ~ N(0, I).
  Eigen::VectorXd sample_solve(const Eigen::VectorXd& z) const;
  // diag(A^{-1}) by the Takahashi recursion on the sparsity pattern of L.
  Eigen::VectorXd inverse_diagonal() const;

 private:
  Eigen::SimplicialLLT<SparsePrecision, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
  bool analyzed_ = false;
  bool factorized_ = false;
  Eigen::Index n_ = 0;
};

// Dense fallback used by tests and small problems.
Eigen::MatrixXd dense_inverse(const SparsePrecision& a);

}  // namespace nsvr
