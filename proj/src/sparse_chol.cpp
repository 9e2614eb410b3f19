#include "nsvr/sparse_chol.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "nsvr/error.hpp"

namespace nsvr {

void SparseCholesky::analyze(const SparsePrecision& pattern) {
  require(pattern.rows() == pattern.cols(), ErrorCode::kDimensionMismatch,
          "Cholesky needs a square matrix");
  llt_.analyzePattern(pattern);
  n_ = pattern.rows();
  analyzed_ = true;
  factorized_ = false;
}

void SparseCholesky::factorize(const SparsePrecision& a) {
  if (!analyzed_) analyze(a);
  require(a.rows() == n_, ErrorCode::kDimensionMismatch,
          "matrix size differs from the analyzed pattern");
  llt_.factorize(a);
  factorized_ = llt_.info() == Eigen::Success;
  require(factorized_, ErrorCode::kNotPositiveDefinite,
          "sparse Cholesky failed: matrix is not positive definite");
}

void SparseCholesky::compute(const SparsePrecision& a) {
  analyze(a);
  factorize(a);
}

double SparseCholesky::log_determinant() const {
  require(factorized_, ErrorCode::kInvalidArgument, "no factorization available");
  const SparsePrecision& l = llt_.matrixL().nestedExpression();
  double acc = 0.0;
  // The diagonal is stored first in each column of L.
  for (Eigen::Index j = 0; j < l.outerSize(); ++j)
    acc += std::log(l.valuePtr()[l.outerIndexPtr()[j]]);
  return 2.0 * acc;
}

Eigen::VectorXd SparseCholesky::solve(const Eigen::VectorXd& b) const {
  require(factorized_, ErrorCode::kInvalidArgument, "no factorization available");
  require(b.size() == n_, ErrorCode::kDimensionMismatch, "rhs size mismatch");
  return llt_.solve(b);
}

Eigen::VectorXd SparseCholesky::sample_solve(const Eigen::VectorXd& z) const {
  require(factorized_, ErrorCode::kInvalidArgument, "no factorization available");
  require(z.size() == n_, ErrorCode::kDimensionMismatch, "noise size mismatch");
  const Eigen::VectorXd w = llt_.matrixU().solve(z);
  return llt_.permutationPinv() * w;
}

Eigen::VectorXd SparseCholesky::inverse_diagonal() const {
  require(factorized_, ErrorCode::kInvalidArgument, "no factorization available");
  const SparsePrecision& l = llt_.matrixL().nestedExpression();
  const Eigen::Index n = l.cols();
  const int* outer = l.outerIndexPtr();
  const int* inner = l.innerIndexPtr();
  const double* lv = l.valuePtr();

  // S holds the entries of (L L^T)^{-1} on the pattern of L, column by column.
  std::vector<double> s(static_cast<std::size_t>(l.nonZeros()), 0.0);
  std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
  std::vector<int> pos(static_cast<std::size_t>(n), -1);

  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const int begin = outer[i], end = outer[i + 1];
    const double lii = lv[begin];
    for (int p = begin + 1; p < end; ++p) {
      pos[static_cast<std::size_t>(inner[p])] = p;
      acc[static_cast<std::size_t>(inner[p])] = 0.0;
    }
    // acc[j] = sum_{k in pattern(i)} L_ki S_kj for j in pattern(i), built by
    // scattering the stored lower triangle of each column k.
    for (int p = begin + 1; p < end; ++p) {
      const int k = inner[p];
      const double lki = lv[p];
      for (int q = outer[k]; q < outer[k + 1]; ++q) {
        const int r = inner[q];
        if (pos[static_cast<std::size_t>(r)] < 0) continue;
        acc[static_cast<std::size_t>(r)] += lki * s[static_cast<std::size_t>(q)];
        if (r != k) acc[static_cast<std::size_t>(k)] += lv[pos[static_cast<std::size_t>(r)]] *
                                                          s[static_cast<std::size_t>(q)];
      }
    }
    double diag = 1.0 / (lii * lii);
    for (int p = begin + 1; p < end; ++p) {
      const int j = inner[p];
      const double sij = -acc[static_cast<std::size_t>(j)] / lii;
      s[static_cast<std::size_t>(p)] = sij;
      diag -= lv[p] * sij / lii;
    }
    s[static_cast<std::size_t>(begin)] = diag;
    for (int p = begin + 1; p < end; ++p) pos[static_cast<std::size_t>(inner[p])] = -1;
  }

  Eigen::VectorXd perm_diag(n);
  for (Eigen::Index j = 0; j < n; ++j)
    perm_diag(j) = s[static_cast<std::size_t>(outer[j])];
  // Undo the ordering: x_i of the original problem is entry P(i) of the
  // permuted one.
  return llt_.permutationPinv() * perm_diag;
}

Eigen::MatrixXd dense_inverse(const SparsePrecision& a) {
  const Eigen::MatrixXd d(a);
  Eigen::LLT<Eigen::MatrixXd> llt(d);
  require(llt.info() == Eigen::Success, ErrorCode::kNotPositiveDefinite,
          "dense Cholesky failed");
  return llt.solve(Eigen::MatrixXd::Identity(d.rows(), d.cols()));
}

}  // namespace nsvr
