#include "nsvr/fgn.hpp"

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "nsvr/error.hpp"

namespace {

using nsvr::FgnSpec;

TEST(FgnSpec, RejectsOutOfRangeParameters) {
  EXPECT_THROW(FgnSpec(0.0), nsvr::Error);
  EXPECT_THROW(FgnSpec(1.0), nsvr::Error);
  EXPECT_THROW(FgnSpec(0.5, 0.0), nsvr::Error);
  EXPECT_NO_THROW(FgnSpec(0.01, 2.0));
}

TEST(FgnSpec, DerivedQuantities) {
  const FgnSpec s(0.8);
  EXPECT_NEAR(s.gamma(), 0.6, 1e-15);
  EXPECT_NEAR(s.c_gamma(), 0.0443969254888936, 1e-13);
}

TEST(FgnAutocovariance, WhiteNoiseHasNoLagCorrelation) {
  const FgnSpec s(0.5);
  for (std::size_t lag = 1; lag < 20; ++lag) EXPECT_NEAR(nsvr::fgn_autocovariance(s, lag), 0.0, 1e-15);
}

TEST(FgnAutocovariance, LagZeroIsVariance) {
  for (double h : {0.1, 0.5, 0.8, 0.95}) EXPECT_DOUBLE_EQ(nsvr::fgn_autocovariance(FgnSpec(h), 0), 1.0);
  EXPECT_DOUBLE_EQ(nsvr::fgn_autocovariance(FgnSpec(0.3, 2.5), 0), 2.5);
}

TEST(FgnAutocovariance, LongRangeLagOne) {
  EXPECT_NEAR(nsvr::fgn_autocovariance(FgnSpec(0.8), 1), 0.515716566510398, 1e-13);
}

TEST(FgnAutocovariance, PartialSumsDivergeForLongMemory) {
  const FgnSpec s(0.8);
  double prev = 0.0;
  for (int k = 1; k <= 12; ++k) {
    double sum = 0.0;
    for (std::size_t l = 0; l <= (std::size_t{1} << k); ++l) sum += nsvr::fgn_autocovariance(s, l);
    EXPECT_GT(sum, prev);
    prev = sum;
  }
}

TEST(FgnAutocovariance, TwoSidedSumForShortMemory) {
  // White noise sums to 1; for H < 1/2 the two-sided sum is 0 with a tail of
  // order L^{2H-1}.
  auto two_sided = [](const FgnSpec& s, std::size_t lags) {
    double sum = nsvr::fgn_autocovariance(s, 0);
    for (std::size_t l = 1; l <= lags; ++l) sum += 2.0 * nsvr::fgn_autocovariance(s, l);
    return sum;
  };
  EXPECT_NEAR(two_sided(FgnSpec(0.5), 1000), 1.0, 1e-12);
  const double a = two_sided(FgnSpec(0.3), std::size_t{1} << 13);
  const double b = two_sided(FgnSpec(0.3), std::size_t{1} << 14);
  EXPECT_GT(a, 0.0);
  EXPECT_LT(b, a);
  EXPECT_NEAR(b / a, std::pow(2.0, 2 * 0.3 - 1.0), 1e-3);
}

TEST(SimulateFgn, SameSeedSameSequence) {
  const auto a = nsvr::simulate_fgn(FgnSpec(0.7), 1000, 42);
  const auto b = nsvr::simulate_fgn(FgnSpec(0.7), 1000, 42);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, nsvr::simulate_fgn(FgnSpec(0.7), 1000, 43));
}

TEST(SimulateFgn, WhiteNoiseLagOneNearZero) {
  const std::size_t n = 4096;
  const auto x = nsvr::simulate_fgn(FgnSpec(0.5), n, 1);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double c0 = 0.0, c1 = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    c0 += (x[t] - mean) * (x[t] - mean);
    if (t + 1 < n) c1 += (x[t] - mean) * (x[t + 1] - mean);
  }
  EXPECT_LT(std::abs(c1 / c0), 3.0 / std::sqrt(double(n)));
  EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(double(n)));
}

TEST(SimulateFgn, SampleAutocovarianceWithinMonteCarloError) {
  // Lags are strongly correlated across replicates, so one block of replicates
  // moves all six estimates together; 2000 short series keep the check tight.
  const std::size_t n = 1024;
  const int reps = 2000;
  const FgnSpec s(0.8);
  std::mt19937_64 rng(2024);
  std::vector<std::vector<double>> est(6);
  for (int r = 0; r < reps; ++r) {
    const auto x = nsvr::simulate_fgn(s, n, rng);
    // Known mean: the population autocovariance is estimated without centering.
    for (std::size_t lag = 0; lag < 6; ++lag) {
      double c = 0.0;
      for (std::size_t t = 0; t + lag < n; ++t) c += x[t] * x[t + lag];
      est[lag].push_back(c / double(n - lag));
    }
  }
  for (std::size_t lag = 0; lag < 6; ++lag) {
    const double m = std::accumulate(est[lag].begin(), est[lag].end(), 0.0) / reps;
    double v = 0.0;
    for (double e : est[lag]) v += (e - m) * (e - m);
    const double se = std::sqrt(v / (reps - 1) / reps);
    EXPECT_LT(std::abs(m - nsvr::fgn_autocovariance(s, lag)), 3.0 * se) << "lag " << lag;
  }
}

TEST(SimulateFgn, ShortLengthsAndAntiPersistence) {
  EXPECT_EQ(nsvr::simulate_fgn(FgnSpec(0.2), 2, 1).size(), 2u);
  EXPECT_EQ(nsvr::simulate_fgn(FgnSpec(0.99), 3, 1).size(), 3u);
  EXPECT_THROW(nsvr::simulate_fgn(FgnSpec(0.5), 1, 1), nsvr::Error);
}

TEST(WaveletLevelVariance, WhiteNoiseIsLevelFree) {
  const FgnSpec s(0.5);
  const double d1 = nsvr::wavelet_level_variance(s, 1, 3).detail;
  EXPECT_NEAR(nsvr::wavelet_level_variance(s, 2, 3).detail, d1, 1e-15);
  EXPECT_NEAR(nsvr::wavelet_level_variance(s, 3, 3).detail, d1, 1e-15);
  // Printed normalization at H = 0.5 gives 1 / (2 pi); the white-noise unit gives 1.
  EXPECT_NEAR(d1, 0.159154943091895, 1e-13);
  EXPECT_NEAR(nsvr::wavelet_level_variance(s, 1, 3, nsvr::VarianceNormalization::kWhiteNoiseUnit).detail,
              1.0, 1e-13);
}

TEST(WaveletLevelVariance, LongRangeValues) {
  const FgnSpec s(0.8);
  const double d1 = nsvr::wavelet_level_variance(s, 1, 4).detail;
  EXPECT_NEAR(d1, 0.0270459719891688, 1e-13);
  EXPECT_NEAR(nsvr::wavelet_level_variance(s, 2, 4).detail / d1, 1.515716566510398, 1e-13);
}

TEST(WaveletLevelVariance, LogSlopeIsGamma) {
  for (double h : {0.2, 0.5, 0.8}) {
    const FgnSpec s(h, 1.7);
    for (int j = 1; j < 6; ++j) {
      const double a = nsvr::wavelet_level_variance(s, j, 6).detail;
      const double b = nsvr::wavelet_level_variance(s, j + 1, 6).detail;
      EXPECT_NEAR(std::log2(b) - std::log2(a), s.gamma(), 1e-12);
    }
  }
}

TEST(WaveletLevelVariance, ApproximationOnlyAtCoarsestLevel) {
  const FgnSpec s(0.7);
  EXPECT_EQ(nsvr::wavelet_level_variance(s, 2, 4).approx, 0.0);
  EXPECT_GT(nsvr::wavelet_level_variance(s, 4, 4).approx, 0.0);
  EXPECT_THROW(nsvr::wavelet_level_variance(s, 5, 4), nsvr::Error);
  EXPECT_THROW(nsvr::wavelet_level_variance(s, 0, 4), nsvr::Error);
}

}  // namespace
