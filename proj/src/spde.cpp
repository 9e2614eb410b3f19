#include "nsvr/spde.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "nsvr/error.hpp"

namespace nsvr {

namespace {

using Triplet = Eigen::Triplet<double>;

SparsePrecision diagonal(const Eigen::VectorXd& d) {
  SparsePrecision out(d.size(), d.size());
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d(i));
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

SparsePrecision stiffness_operator(const FemMatrices& fem, double kappa, bool lumped) {
  const double k2 = kappa * kappa;
  if (lumped) return SparsePrecision(diagonal(k2 * fem.c_lumped) + fem.g);
  return SparsePrecision(k2 * fem.c + fem.g);
}

void check_alpha(int alpha) {
  require(alpha >= 1 && alpha <= 4, ErrorCode::kInvalidArgument,
          "alpha must be 1, 2, 3 or 4");
}

}  // namespace

FemMatrices assemble_fem(const TriangularMesh& mesh) {
  mesh.validate();
  const auto n = static_cast<Eigen::Index>(mesh.n_vertices());
  std::vector<Triplet> ct, gt;
  ct.reserve(mesh.n_triangles() * 9);
  gt.reserve(mesh.n_triangles() * 9);
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.triangle_area(t);
    // Edge opposite vertex a: e_a = p_c - p_b (cyclic).
    std::array<std::array<double, 2>, 3> e;
    for (int a = 0; a < 3; ++a) {
      const auto& pb = mesh.points[static_cast<std::size_t>(tri[(a + 1) % 3])];
      const auto& pc = mesh.points[static_cast<std::size_t>(tri[(a + 2) % 3])];
      e[a] = {pc[0] - pb[0], pc[1] - pb[1]};
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        ct.emplace_back(tri[a], tri[b], area / 12.0 * (a == b ? 2.0 : 1.0));
        gt.emplace_back(tri[a], tri[b],
                        (e[a][0] * e[b][0] + e[a][1] * e[b][1]) / (4.0 * area));
      }
    }
  }
  FemMatrices fem;
  fem.c.resize(n, n);
  fem.g.resize(n, n);
  fem.c.setFromTriplets(ct.begin(), ct.end());
  fem.g.setFromTriplets(gt.begin(), gt.end());
  fem.c_lumped = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < fem.c.outerSize(); ++j)
    for (SparsePrecision::InnerIterator it(fem.c, j); it; ++it)
      fem.c_lumped(it.row()) += it.value();
  return fem;
}

SparsePrecision precision_stationary(const FemMatrices& fem, double kappa, int alpha,
                                     bool lumped) {
  check_alpha(alpha);
  require(kappa > 0.0 && std::isfinite(kappa), ErrorCode::kInvalidArgument,
          "kappa must be positive and finite");
  const SparsePrecision k = stiffness_operator(fem, kappa, lumped);
  const SparsePrecision cinv = diagonal(fem.c_lumped.cwiseInverse());
  SparsePrecision q = (alpha % 2 == 1) ? k : SparsePrecision(k * cinv * k);
  for (int a = (alpha % 2 == 1) ? 1 : 2; a + 2 <= alpha; a += 2)
    q = SparsePrecision(k * cinv * q * cinv * k);
  // Symmetrize away rounding; the pattern is kept as is so that it does not
  // depend on kappa.
  return SparsePrecision(0.5 * (q + SparsePrecision(q.transpose())));
}

double log_det_stationary(const FemMatrices& fem, double kappa, int alpha,
                          SparseCholesky& k_factor) {
  check_alpha(alpha);
  const SparsePrecision k = stiffness_operator(fem, kappa, true);
  k_factor.factorize(k);
  const double log_k = k_factor.log_determinant();
  const double log_c = fem.c_lumped.array().log().sum();
  // Q_alpha is a product of alpha factors K and alpha - 1 factors C~^{-1}.
  return alpha * log_k - (alpha - 1) * log_c;
}

double matern_variance(double kappa, double nu) {
  return std::tgamma(nu) /
         (std::tgamma(nu + 1.0) * 4.0 * std::numbers::pi * std::pow(kappa, 2.0 * nu));
}

LocalVariability local_variability(const Eigen::VectorXd& beta_hat,
                                   const TriangularMesh& mesh) {
  require(static_cast<std::size_t>(beta_hat.size()) == mesh.n_vertices(),
          ErrorCode::kDimensionMismatch, "beta-hat size does not match the mesh");
  const auto adj = mesh.adjacency();
  const Eigen::Index n = beta_hat.size();
  LocalVariability out;
  out.raw.resize(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const auto& nb = adj[static_cast<std::size_t>(v)];
    require(!nb.empty(), ErrorCode::kInvalidArgument,
            "vertex " + std::to_string(v) + " has no neighbors");
    double mean = beta_hat(v);
    for (int w : nb) mean += beta_hat(w);
    const double m = static_cast<double>(nb.size() + 1);
    mean /= m;
    double ss = (beta_hat(v) - mean) * (beta_hat(v) - mean);
    for (int w : nb) ss += (beta_hat(w) - mean) * (beta_hat(w) - mean);
    out.raw(v) = std::sqrt(ss / (m - 1.0));
  }
  const double mean = out.raw.mean();
  const double sd = n > 1 ? std::sqrt((out.raw.array() - mean).square().sum() / (n - 1.0))
                          : 0.0;
  out.degenerate = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
  out.standardized = out.degenerate ? Eigen::VectorXd::Zero(n)
                                    : Eigen::VectorXd((out.raw.array() - mean) / sd);
  for (const auto& e : mesh.edges())
    out.max_edge_jump = std::max(
        out.max_edge_jump, std::abs(out.standardized(e[0]) - out.standardized(e[1])));
  return out;
}

double NonstatField::kappa0() const {
  require(rho0 > 0.0 && nu > 0.0, ErrorCode::kInvalidArgument,
          "rho0 and nu must be positive");
  return std::sqrt(8.0 * nu) / rho0;
}

double NonstatField::kappa() const {
  const double k = kappa0() * std::exp(-theta2);
  require(std::isfinite(k) && k > 0.0, ErrorCode::kOverflow, "kappa overflows");
  return k;
}

double NonstatField::log_tau0() const {
  require(sigma0 > 0.0, ErrorCode::kInvalidArgument, "sigma0 must be positive");
  return 0.5 * std::log(std::tgamma(nu) / (std::tgamma(nu + 1.0) * 4.0 * std::numbers::pi)) -
         std::log(sigma0) - nu * std::log(kappa0());
}

Eigen::VectorXd NonstatField::log_tau() const {
  Eigen::VectorXd lt = (log_tau0() + theta2 * nu) - theta1 * delta.array();
  for (Eigen::Index i = 0; i < lt.size(); ++i)
    require(std::isfinite(lt(i)) && std::abs(lt(i)) < 300.0, ErrorCode::kOverflow,
            "log tau out of range; theta or delta too extreme");
  return lt;
}

SparsePrecision precision_nonstationary(const FemMatrices& fem, const NonstatField& field,
                                        int alpha) {
  require(field.delta.size() == fem.size(), ErrorCode::kDimensionMismatch,
          "delta size does not match the FEM matrices");
  const SparsePrecision q = precision_stationary(fem, field.kappa(), alpha, true);
  const Eigen::VectorXd tau = field.log_tau().array().exp();
  SparsePrecision out = q;
  for (Eigen::Index j = 0; j < out.outerSize(); ++j)
    for (SparsePrecision::InnerIterator it(out, j); it; ++it)
      it.valueRef() *= tau(it.row()) * tau(it.col());
  return out;
}

}  // namespace nsvr
