#include "nsvr/spde.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "nsvr/error.hpp"
#include "nsvr/mesh.hpp"
#include "nsvr/sparse_chol.hpp"

namespace {

nsvr::TriangularMesh right_triangle() {
  nsvr::TriangularMesh m;
  m.points = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  m.triangles = {{0, 1, 2}};
  return m;
}

int index_of(const nsvr::GridMesh& g, int x, int y) {
  return g.vertex_of_pixel[static_cast<std::size_t>(y * g.width + x)];
}

TEST(Mesh, ValidateCatchesBadInput) {
  auto m = right_triangle();
  EXPECT_NO_THROW(m.validate());
  m.triangles[0] = {0, 2, 1};  // orientation does not matter
  EXPECT_NO_THROW(m.validate());
  m.triangles[0] = {0, 1, 3};
  EXPECT_THROW(m.validate(), nsvr::Error);
  m = right_triangle();
  m.points.push_back({5.0, 5.0});  // unused vertex
  EXPECT_THROW(m.validate(), nsvr::Error);
}

TEST(Mesh, GridMeshFromMask) {
  // 3 x 3 mask with one corner missing: 8 pixels.
  std::vector<bool> mask(9, true);
  mask[8] = false;
  const auto g = nsvr::make_grid_mesh(mask, 3, 3);
  EXPECT_EQ(g.mesh.n_vertices(), 8u);
  EXPECT_EQ(g.mesh.n_triangles(), 7u);  // 2 + 2 + 2 + 1
  EXPECT_EQ(index_of(g, 2, 2), -1);
  EXPECT_NO_THROW(g.mesh.validate());
  // Largest component only.
  std::vector<bool> two(25, false);
  for (int i : {0, 1, 5, 6, 13, 14, 18, 19, 23, 24}) two[static_cast<std::size_t>(i)] = true;
  const auto g2 = nsvr::make_grid_mesh(two, 5, 5);
  EXPECT_EQ(g2.mesh.n_vertices(), 6u);
}

TEST(Mesh, FileRoundTrip) {
  const auto g = nsvr::make_unit_square_mesh(4);
  const auto path = std::filesystem::temp_directory_path() / "nsvr_mesh_test.txt";
  nsvr::write_mesh(path.string(), g.mesh);
  const auto back = nsvr::read_mesh(path.string());
  EXPECT_EQ(back.triangles, g.mesh.triangles);
  ASSERT_EQ(back.points.size(), g.mesh.points.size());
  for (std::size_t i = 0; i < back.points.size(); ++i) {
    EXPECT_DOUBLE_EQ(back.points[i][0], g.mesh.points[i][0]);
    EXPECT_DOUBLE_EQ(back.points[i][1], g.mesh.points[i][1]);
  }
  std::filesystem::remove(path);
}

TEST(Mesh, AdjacencyAndEdges) {
  const auto m = right_triangle();
  EXPECT_EQ(m.adjacency()[0], (std::vector<int>{1, 2}));
  EXPECT_EQ(m.edges().size(), 3u);
  EXPECT_NEAR(m.triangle_area(0), 0.5, 1e-15);
}

TEST(Fem, SingleTriangle) {
  const auto fem = nsvr::assemble_fem(right_triangle());
  EXPECT_NEAR(Eigen::MatrixXd(fem.c).sum(), 0.5, 1e-15);
  EXPECT_NEAR(fem.c_lumped.sum(), 0.5, 1e-15);
  EXPECT_LT((fem.g * Eigen::VectorXd::Ones(3)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(fem.c.coeff(0, 0), 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(fem.c.coeff(0, 1), 1.0 / 24.0, 1e-15);
  EXPECT_NEAR(fem.g.coeff(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(fem.g.coeff(1, 2), 0.0, 1e-15);
}

TEST(Fem, UnitSquareProperties) {
  const auto g = nsvr::make_unit_square_mesh(12);
  const auto fem = nsvr::assemble_fem(g.mesh);
  const Eigen::MatrixXd c = fem.c, gm = fem.g;
  EXPECT_NEAR(c.sum(), 1.0, 1e-10);
  EXPECT_LT((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((gm - gm.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((gm * Eigen::VectorXd::Ones(gm.rows())).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GT(fem.c_lumped.minCoeff(), 0.0);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c).eigenvalues().minCoeff(), 0.0);
}

TEST(Fem, DirichletEnergyOfPlaneIndependentOfRefinement) {
  // f(x, y) = 2x - 3y has energy |grad f|^2 * area = 13 on the unit square.
  for (int n : {5, 11, 23}) {
    const auto g = nsvr::make_unit_square_mesh(n);
    const auto fem = nsvr::assemble_fem(g.mesh);
    Eigen::VectorXd f(static_cast<Eigen::Index>(g.mesh.n_vertices()));
    for (std::size_t v = 0; v < g.mesh.n_vertices(); ++v)
      f(static_cast<Eigen::Index>(v)) = 2.0 * g.mesh.points[v][0] - 3.0 * g.mesh.points[v][1];
    EXPECT_NEAR(f.dot(fem.g * f), 13.0, 1e-8);
  }
}

TEST(PrecisionStationary, AlphaOneIsK) {
  const auto fem = nsvr::assemble_fem(nsvr::make_unit_square_mesh(6).mesh);
  const double kappa = 3.0;
  const Eigen::MatrixXd q = nsvr::precision_stationary(fem, kappa, 1);
  const Eigen::MatrixXd k =
      Eigen::MatrixXd(fem.c_lumped.asDiagonal()) * kappa * kappa + Eigen::MatrixXd(fem.g);
  EXPECT_LT((q - k).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::MatrixXd q2 = nsvr::precision_stationary(fem, kappa, 2);
  const Eigen::MatrixXd ref2 = k * fem.c_lumped.cwiseInverse().asDiagonal() * k;
  EXPECT_LT((q2 - ref2).cwiseAbs().maxCoeff(), 1e-9 * ref2.cwiseAbs().maxCoeff());
  EXPECT_THROW(nsvr::precision_stationary(fem, -1.0, 2), nsvr::Error);
}

TEST(PrecisionStationary, LogDeterminantMatchesDense) {
  const auto fem = nsvr::assemble_fem(nsvr::make_unit_square_mesh(7).mesh);
  nsvr::SparseCholesky k_factor;
  for (int alpha : {1, 2, 3}) {
    const Eigen::MatrixXd q = nsvr::precision_stationary(fem, 4.0, alpha);
    const double dense = 2.0 * Eigen::MatrixXd(q.llt().matrixL()).diagonal().array().log().sum();
    EXPECT_NEAR(nsvr::log_det_stationary(fem, 4.0, alpha, k_factor), dense, 1e-8 * std::abs(dense));
  }
}

TEST(PrecisionStationary, MarginalSdAndRangeCorrelation) {
  // 30 x 30 nodes on the unit square; range of 7 grid spacings.
  const int n = 30;
  const auto g = nsvr::make_unit_square_mesh(n);
  const auto fem = nsvr::assemble_fem(g.mesh);
  const double h = 1.0 / (n - 1);
  const double rho = 7.0 * h;
  const double kappa = std::sqrt(8.0) / rho;
  const Eigen::MatrixXd cov = nsvr::dense_inverse(nsvr::precision_stationary(fem, kappa, 2));
  const double sd = std::sqrt(nsvr::matern_variance(kappa, 1.0));
  for (int x = 12; x <= 17; ++x)
    for (int y = 12; y <= 17; ++y) {
      const int v = index_of(g, x, y);
      EXPECT_NEAR(std::sqrt(cov(v, v)) / sd, 1.0, 0.10);
    }
  const int a = index_of(g, 11, 15), b = index_of(g, 18, 15);
  const double corr = cov(a, b) / std::sqrt(cov(a, a) * cov(b, b));
  EXPECT_GE(corr, 0.05);
  EXPECT_LE(corr, 0.25);
}

TEST(PrecisionNonstationary, ZeroThetaIsScaledStationary) {
  const auto g = nsvr::make_unit_square_mesh(8);
  const auto fem = nsvr::assemble_fem(g.mesh);
  nsvr::NonstatField f;
  f.delta = Eigen::VectorXd::LinSpaced(64, -1.5, 1.5);
  f.sigma0 = 0.7;
  f.rho0 = 0.3;
  const nsvr::SparsePrecision ns = nsvr::precision_nonstationary(fem, f, 2);
  const nsvr::SparsePrecision st = nsvr::precision_stationary(fem, f.kappa0(), 2);
  const double tau2 = std::exp(2.0 * f.log_tau0());
  for (Eigen::Index j = 0; j < st.outerSize(); ++j)
    for (nsvr::SparsePrecision::InnerIterator it(st, j); it; ++it) {
      if (std::abs(it.value()) < 1e-12 * st.coeffs().cwiseAbs().maxCoeff()) continue;
      EXPECT_NEAR(ns.coeff(it.row(), it.col()) / it.value(), tau2, 1e-10 * tau2);
    }
  EXPECT_NEAR(nsvr::matern_variance(f.kappa0(), 1.0) / tau2, f.sigma0 * f.sigma0, 1e-12);
}

TEST(PrecisionNonstationary, ThetaTwoScalesKappa) {
  nsvr::NonstatField f;
  f.rho0 = 0.5;
  f.theta2 = std::log(2.0);
  EXPECT_NEAR(f.kappa(), f.kappa0() / 2.0, 1e-14);
  const auto fem = nsvr::assemble_fem(nsvr::make_unit_square_mesh(5).mesh);
  f.delta = Eigen::VectorXd::Zero(25);
  const Eigen::MatrixXd ns = nsvr::precision_nonstationary(fem, f, 2);
  const Eigen::MatrixXd st = nsvr::precision_stationary(fem, f.kappa0() / 2.0, 2);
  const double tau2 = std::exp(2.0 * f.log_tau()(0));
  EXPECT_LT((ns - tau2 * st).cwiseAbs().maxCoeff(), 1e-10 * ns.cwiseAbs().maxCoeff());
}

TEST(PrecisionNonstationary, HigherDeltaGivesHigherSd) {
  const auto g = nsvr::make_unit_square_mesh(10);
  const auto fem = nsvr::assemble_fem(g.mesh);
  nsvr::NonstatField f;
  f.rho0 = 0.3;
  f.theta1 = 0.5;
  f.delta.resize(100);
  for (std::size_t v = 0; v < 100; ++v) f.delta(static_cast<Eigen::Index>(v)) = g.mesh.points[v][0] < 0.5 ? 1.0 : -1.0;
  const Eigen::MatrixXd cov = nsvr::dense_inverse(nsvr::precision_nonstationary(fem, f, 2));
  EXPECT_GT(cov(index_of(g, 2, 5), index_of(g, 2, 5)), 1.5 * cov(index_of(g, 7, 5), index_of(g, 7, 5)));
}

TEST(PrecisionNonstationary, OverflowIsReported) {
  const auto fem = nsvr::assemble_fem(nsvr::make_unit_square_mesh(4).mesh);
  nsvr::NonstatField f;
  f.delta = Eigen::VectorXd::Constant(16, 3.0);
  f.theta1 = 500.0;
  EXPECT_THROW(nsvr::precision_nonstationary(fem, f, 2), nsvr::Error);
}

TEST(LocalVariability, ConstantFieldIsDegenerate) {
  const auto g = nsvr::make_unit_square_mesh(6);
  const auto lv = nsvr::local_variability(Eigen::VectorXd::Constant(36, 2.0), g.mesh);
  EXPECT_TRUE(lv.degenerate);
  EXPECT_LT(lv.raw.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(lv.standardized.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LocalVariability, SpikeIsLocal) {
  const auto g = nsvr::make_unit_square_mesh(9);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(81);
  const int spike = index_of(g, 4, 4);
  b(spike) = 5.0;
  const auto lv = nsvr::local_variability(b, g.mesh);
  Eigen::Index arg = 0;
  lv.raw.maxCoeff(&arg);
  const auto& nb = g.mesh.adjacency()[static_cast<std::size_t>(spike)];
  EXPECT_TRUE(arg == spike || std::find(nb.begin(), nb.end(), arg) != nb.end());
  EXPECT_EQ(lv.raw(index_of(g, 0, 0)), 0.0);
  EXPECT_NEAR(lv.standardized.mean(), 0.0, 1e-12);
}

TEST(LocalVariability, LinearFieldNearlyConstant) {
  const auto g = nsvr::make_unit_square_mesh(30);
  Eigen::VectorXd b(900);
  for (std::size_t v = 0; v < 900; ++v) b(static_cast<Eigen::Index>(v)) = 3.0 * g.mesh.points[v][0] + g.mesh.points[v][1];
  const auto lv = nsvr::local_variability(b, g.mesh);
  const double m = lv.raw.mean();
  const double sd = std::sqrt((lv.raw.array() - m).square().sum() / 899.0);
  EXPECT_LT(sd / m, 0.2);
}

TEST(SparseCholesky, SolveSampleAndSelectedInverse) {
  const auto fem = nsvr::assemble_fem(nsvr::make_unit_square_mesh(8).mesh);
  const nsvr::SparsePrecision q = nsvr::precision_stationary(fem, 5.0, 2);
  nsvr::SparseCholesky chol;
  chol.compute(q);
  const Eigen::MatrixXd dense = Eigen::MatrixXd(q).inverse();
  EXPECT_LT((chol.inverse_diagonal() - dense.diagonal()).cwiseAbs().maxCoeff(),
            1e-10 * dense.diagonal().maxCoeff());
  Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(64, -1.0, 2.0);
  EXPECT_LT((q * chol.solve(b) - b).cwiseAbs().maxCoeff(), 1e-9);
  // x = P^T L^{-T} z satisfies x^T Q x = z^T z.
  const Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(64, 0.5, -0.5);
  const Eigen::VectorXd x = chol.sample_solve(z);
  EXPECT_NEAR(x.dot(q * x), z.squaredNorm(), 1e-9);
  const double ld = 2.0 * Eigen::MatrixXd(Eigen::MatrixXd(q).llt().matrixL()).diagonal().array().log().sum();
  EXPECT_NEAR(chol.log_determinant(), ld, 1e-8 * std::abs(ld));
}

TEST(SparseCholesky, NotPositiveDefiniteReported) {
  nsvr::SparsePrecision a(2, 2);
  a.insert(0, 0) = 1.0;
  a.insert(1, 1) = -1.0;
  nsvr::SparseCholesky chol;
  try {
    chol.compute(a);
    FAIL() << "expected an error";
  } catch (const nsvr::Error& e) {
    EXPECT_EQ(e.code(), nsvr::ErrorCode::kNotPositiveDefinite);
  }
}

}  // namespace
