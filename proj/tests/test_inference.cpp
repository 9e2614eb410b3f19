#include "nsvr/inference.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "nsvr/error.hpp"
#include "oracle.hpp"

namespace {

using nsvr::Hyperparameters;

nsvr::PosteriorEngine make_engine(const oracle::Problem& p) {
  return nsvr::PosteriorEngine(p.model,
                               nsvr::level_statistics(nsvr::whiten_data(p.y, p.design, p.whiten)));
}

TEST(Whitening, WaveletRegressandUncorrelatedWithRegressorsUnderNull) {
  // Pure white noise: the transformed response and regressors stay uncorrelated.
  const std::size_t n = 256;
  std::vector<double> reg(n);
  for (std::size_t t = 0; t < n; ++t) reg[t] = (t / 20) % 2 == 0 ? 1.0 : 0.0;
  const auto design = nsvr::make_design({reg}, true);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd y(200, static_cast<Eigen::Index>(n));
  for (auto& v : y.reshaped()) v = nd(rng);
  const auto w = nsvr::whiten_data(y, design);
  int outside = 0;
  const Eigen::VectorXd xc = w.x.col(1).array() - w.x.col(1).mean();
  for (Eigen::Index v = 0; v < y.rows(); ++v) {
    const Eigen::VectorXd yc = w.y.row(v).transpose().array() - w.y.row(v).mean();
    const double corr = yc.dot(xc) / (yc.norm() * xc.norm());
    if (std::abs(corr) >= 3.0 / std::sqrt(static_cast<double>(n))) ++outside;
  }
  EXPECT_LE(outside, 3);  // about 0.27% expected
}

TEST(Whitening, ZeroDataGivesZeroCoefficients) {
  std::vector<double> reg(64, 1.0);
  for (std::size_t t = 0; t < 64; t += 3) reg[t] = 0.0;
  const auto w = nsvr::whiten_data(Eigen::MatrixXd::Zero(4, 64), nsvr::make_design({reg}));
  EXPECT_EQ(w.y.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Hyperparameters, InternalRoundTrip) {
  Hyperparameters h;
  h.sigma = 0.7;
  h.hurst = {0.2, 0.9};
  h.theta1 = {0.5};
  h.theta2 = {-1.25};
  const auto back = Hyperparameters::from_internal(h.to_internal(), 2, 1);
  EXPECT_NEAR(back.sigma, 0.7, 1e-14);
  EXPECT_NEAR(back.hurst[0], 0.2, 1e-14);
  EXPECT_NEAR(back.hurst[1], 0.9, 1e-14);
  EXPECT_DOUBLE_EQ(back.theta1[0], 0.5);
  EXPECT_DOUBLE_EQ(back.theta2[0], -1.25);
}

TEST(ConditionalPosterior, MatchesDenseJointGaussian) {
  const auto p = oracle::make_problem(5, 128, 21);
  auto engine = make_engine(p);
  const auto got = engine.evaluate(p.h, true);
  const auto ref = oracle::solve(p);
  EXPECT_LT(oracle::max_relative_gap(got.mean, ref.mean), 1e-6);
  EXPECT_LT(((got.variance - ref.variance).array() / ref.variance.array()).abs().maxCoeff(), 1e-6);
  EXPECT_NEAR(got.log_marginal, ref.log_marginal, 1e-6 * std::abs(ref.log_marginal));
  EXPECT_NEAR(got.log_marginal_residual, ref.log_marginal, 1e-6 * std::abs(ref.log_marginal));
}

TEST(ConditionalPosterior, MatchesDenseJointGaussianHaarAndOtherHyperparameters) {
  auto p = oracle::make_problem(4, 64, 3);
  p.whiten.filter = nsvr::WaveletFilter::kHaar;
  p.h.sigma = 0.6;
  p.h.hurst = {0.55, 0.9};
  p.h.theta1 = {-0.5, 0.8};
  p.h.theta2 = {0.7, 0.0};
  auto engine = make_engine(p);
  const auto got = engine.evaluate(p.h, true);
  const auto ref = oracle::solve(p);
  EXPECT_LT(oracle::max_relative_gap(got.mean, ref.mean), 1e-6);
  EXPECT_LT(((got.variance - ref.variance).array() / ref.variance.array()).abs().maxCoeff(), 1e-6);
  EXPECT_NEAR(got.log_marginal, ref.log_marginal, 1e-6 * std::abs(ref.log_marginal));
}

TEST(ConditionalPosterior, FreeFunctionAgreesWithEngine) {
  const auto p = oracle::make_problem(4, 64, 9);
  const auto stats = nsvr::level_statistics(nsvr::whiten_data(p.y, p.design, p.whiten));
  auto engine = nsvr::PosteriorEngine(p.model, stats);
  const auto a = engine.evaluate(p.h, true);
  const auto b = nsvr::conditional_posterior(p.h, stats, p.model, true);
  EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(a.log_marginal, b.log_marginal, 1e-9);
}

TEST(ConditionalPosterior, FlatPriorLimitIsPerVertexGls) {
  auto p = oracle::make_problem(4, 64, 13);
  // Prior precision scales as sigma0^-2: 1e4 gives a factor 1e-8.
  p.model.sigma0 = 1e4;
  const auto data = nsvr::whiten_data(p.y, p.design, p.whiten);
  auto engine = nsvr::PosteriorEngine(p.model, nsvr::level_statistics(data));
  const auto got = engine.evaluate(p.h);

  const Eigen::Index n_v = p.y.rows();
  double gap = 0.0;
  for (Eigen::Index v = 0; v < n_v; ++v) {
    const auto vars = engine.level_variances(p.h, p.model.cluster_of_vertex[static_cast<std::size_t>(v)]);
    Eigen::VectorXd wt(data.x.rows());
    for (Eigen::Index i = 0; i < wt.size(); ++i)
      wt(i) = 1.0 / vars[static_cast<std::size_t>(data.level[static_cast<std::size_t>(i)] - 1)];
    const Eigen::MatrixXd xtwx = data.x.transpose() * wt.asDiagonal() * data.x;
    const Eigen::VectorXd xtwy = data.x.transpose() * wt.asDiagonal() * data.y.row(v).transpose();
    const Eigen::VectorXd gls = xtwx.ldlt().solve(xtwy);
    for (Eigen::Index k = 0; k < 2; ++k)
      gap = std::max(gap, std::abs(got.mean(k * n_v + v) - gls(k + 1)));
  }
  EXPECT_LT(gap, 1e-5);
}

TEST(ConditionalPosterior, RejectsHurstOutsideUnitInterval) {
  const auto p = oracle::make_problem(3, 64, 1);
  auto engine = make_engine(p);
  auto h = p.h;
  h.hurst[0] = 1.0;
  EXPECT_THROW(engine.evaluate(h), nsvr::Error);
}

TEST(ConditionalPosterior, SamplesMatchConditionalMoments) {
  const auto p = oracle::make_problem(3, 64, 17);
  auto engine = make_engine(p);
  const auto cp = engine.evaluate(p.h, true);
  const int n = 20000;
  std::vector<Eigen::MatrixXf> out(2, Eigen::MatrixXf(9, n));
  std::mt19937_64 rng(4);
  engine.sample(p.h, n, rng, out, 0);
  for (int k = 0; k < 2; ++k)
    for (Eigen::Index v = 0; v < 9; ++v) {
      const Eigen::ArrayXd row = out[static_cast<std::size_t>(k)].row(v).cast<double>().transpose().array();
      const double mean = row.mean();
      const double var = (row - mean).square().sum() / (n - 1);
      const double sd = std::sqrt(cp.variance(k * 9 + v));
      EXPECT_NEAR(mean, cp.mean(k * 9 + v), 4.0 * sd / std::sqrt(double(n)));
      EXPECT_NEAR(var / cp.variance(k * 9 + v), 1.0, 0.05);
    }
}

TEST(HyperparameterGrid, OneDimensionalGaussianModeAndMoments) {
  const double mu = 0.7, sd = 0.3;
  nsvr::LogDensity f = [&](const Eigen::VectorXd& x) {
    return -0.5 * (x(0) - mu) * (x(0) - mu) / (sd * sd);
  };
  const auto g = nsvr::hyperparameter_grid(f, Eigen::VectorXd::Constant(1, -1.0));
  EXPECT_TRUE(g.converged);
  EXPECT_LT(std::abs(g.mode(0) - mu), 0.05 * sd);
  EXPECT_NEAR(g.neg_hessian(0, 0), 1.0 / (sd * sd), 0.01 / (sd * sd));
  double wsum = 0.0, m1 = 0.0;
  for (const auto& pt : g.points) {
    wsum += pt.weight;
    m1 += pt.weight * pt.theta(0);
  }
  EXPECT_NEAR(wsum, 1.0, 1e-12);
  EXPECT_NEAR(m1, mu, 1e-3);
}

TEST(HyperparameterGrid, CorrelatedGaussianUsesEigenDirections) {
  Eigen::Matrix2d cov;
  cov << 1.0, 0.8, 0.8, 1.0;
  const Eigen::Matrix2d prec = cov.inverse();
  const Eigen::Vector2d mu(1.0, -2.0);
  nsvr::LogDensity f = [&](const Eigen::VectorXd& x) {
    const Eigen::Vector2d d = x - mu;
    return -0.5 * d.dot(prec * d);
  };
  const auto g = nsvr::hyperparameter_grid(f, Eigen::VectorXd::Zero(2));
  EXPECT_EQ(g.scheme, "grid");
  EXPECT_LT((g.mode - mu).cwiseAbs().maxCoeff(), 0.02);
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (const auto& pt : g.points) m += pt.weight * pt.theta;
  EXPECT_LT((m - mu).cwiseAbs().maxCoeff(), 0.02);
}

TEST(HyperparameterGrid, CompositeDesignAboveGridLimit) {
  const int d = 7;
  nsvr::LogDensity f = [](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); };
  const auto g = nsvr::hyperparameter_grid(f, Eigen::VectorXd::Constant(d, 0.5));
  EXPECT_EQ(g.scheme, "ccd");
  EXPECT_LT(static_cast<int>(g.points.size()), 729);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, d);
  for (const auto& pt : g.points) second += pt.weight * pt.theta * pt.theta.transpose();
  // The weights reproduce the standard-Gaussian second moment.
  EXPECT_NEAR(second.trace() / d, 1.0, 0.1);
}

TEST(ResolutionVDesign, ColumnsBalancedAndPairwiseOrthogonal) {
  for (int d : {3, 5, 7, 9}) {
    const auto m = nsvr::resolution_v_design(d);
    ASSERT_EQ(m.cols(), d);
    EXPECT_LT(m.colwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::MatrixXd gram = m.transpose() * m;
    EXPECT_LT((gram - m.rows() * Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-12);
    // Resolution V: every two-factor interaction is orthogonal to the main effects.
    for (int a = 0; a < d; ++a)
      for (int b = a + 1; b < d; ++b) {
        const Eigen::VectorXd ab = m.col(a).cwiseProduct(m.col(b));
        EXPECT_LT((m.transpose() * ab).cwiseAbs().maxCoeff(), 1e-12);
      }
  }
}

TEST(MarginalPosteriors, SinglePointEqualsConditional) {
  nsvr::ConditionalPosterior c;
  c.mean = Eigen::Vector4d(1.0, -2.0, 0.5, 3.0);
  c.variance = Eigen::Vector4d(0.1, 0.2, 0.3, 0.4);
  Hyperparameters h;
  h.hurst = {0.6};
  h.theta1 = {0.0, 0.0};
  h.theta2 = {0.0, 0.0};
  const auto s = nsvr::marginal_posteriors({c}, {h}, {1.0}, 2, 2);
  EXPECT_DOUBLE_EQ(s.mean(1, 0), -2.0);
  EXPECT_DOUBLE_EQ(s.mean(0, 1), 0.5);
  EXPECT_NEAR(s.sd(1, 1), std::sqrt(0.4), 1e-15);
  EXPECT_DOUBLE_EQ(s.posterior_mean.hurst[0], 0.6);
}

TEST(MarginalPosteriors, TwoPointMixtureMoments) {
  const double m = 1.7;
  nsvr::ConditionalPosterior a, b;
  a.mean = Eigen::VectorXd::Constant(1, m);
  b.mean = Eigen::VectorXd::Constant(1, -m);
  a.variance = b.variance = Eigen::VectorXd::Zero(1);
  Hyperparameters h;
  h.hurst = {0.5};
  h.theta1 = {0.0};
  h.theta2 = {0.0};
  const auto s = nsvr::marginal_posteriors({a, b}, {h, h}, {0.5, 0.5}, 1, 1);
  EXPECT_NEAR(s.mean(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(s.sd(0, 0) * s.sd(0, 0), m * m, 1e-12);
}

TEST(FitPosterior, SmallProblemEndToEnd) {
  const auto p = oracle::make_problem(4, 128, 31);
  auto engine = make_engine(p);
  nsvr::GridOptions opts;
  opts.max_evaluations = 1500;
  const auto fit = nsvr::fit_posterior(engine, p.h, opts);
  EXPECT_TRUE(fit.grid.converged);
  double wsum = 0.0;
  for (double w : fit.summary.weights) wsum += w;
  EXPECT_NEAR(wsum, 1.0, 1e-12);
  ASSERT_EQ(fit.summary.mean.rows(), 16);
  ASSERT_EQ(fit.summary.mean.cols(), 2);
  EXPECT_TRUE((fit.summary.sd.array() > 0.0).all());
  // No grid point beats the mode by more than the finite-difference noise.
  for (double lp : fit.summary.log_posterior) EXPECT_LE(lp, fit.grid.mode_log_posterior + 1e-3);
}

}  // namespace
