#include "nsvr/fgn.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "nsvr/error.hpp"

namespace nsvr {

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> simulate_dense(const FgnSpec& spec, std::size_t n,
                                   std::mt19937_64& rng) {
  Eigen::MatrixXd cov(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cov(i, j) = fgn_autocovariance(spec, i > j ? i - j : j - i);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  require(llt.info() == Eigen::Success, ErrorCode::kNotPositiveDefinite,
          "fGn Toeplitz covariance is not numerically positive definite");
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = normal(rng);
  Eigen::VectorXd x = llt.matrixL() * z;
  return {x.data(), x.data() + n};
}

}  // namespace

FgnSpec::FgnSpec(double hurst, double variance)
    : hurst_(hurst), variance_(variance) {
  require(hurst > 0.0 && hurst < 1.0, ErrorCode::kDomain,
          "Hurst parameter must lie in (0, 1)");
  require(variance > 0.0 && std::isfinite(variance), ErrorCode::kDomain,
          "fGn variance must be positive");
}

double FgnSpec::c_gamma() const {
  return std::pow(2.0 * kPi, -2.0 * hurst_) * std::sin(kPi * hurst_) *
         std::tgamma(2.0 * hurst_ + 1.0);
}

double fgn_autocovariance(const FgnSpec& spec, std::size_t lag) {
  if (lag == 0) return spec.variance();
  const double two_h = 2.0 * spec.hurst();
  const double l = static_cast<double>(lag);
  return 0.5 * spec.variance() *
         (std::pow(l + 1.0, two_h) - 2.0 * std::pow(l, two_h) +
          std::pow(l - 1.0, two_h));
}

std::vector<double> simulate_fgn(const FgnSpec& spec, std::size_t length,
                                 std::mt19937_64& rng) {
  require(length >= 2, ErrorCode::kInvalidArgument,
          "fGn simulation needs length >= 2");

  const std::size_t half = next_pow2(length);
  const std::size_t m = 2 * half;
  std::vector<std::complex<double>> row(m);
  for (std::size_t j = 0; j <= half; ++j) row[j] = fgn_autocovariance(spec, j);
  for (std::size_t j = 1; j < half; ++j) row[m - j] = row[j];

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> eig;
  fft.fwd(eig, row);

  double max_eig = 0.0, min_eig = 0.0;
  for (const auto& e : eig) {
    max_eig = std::max(max_eig, e.real());
    min_eig = std::min(min_eig, e.real());
  }
  if (min_eig < -1e-10 * max_eig) return simulate_dense(spec, length, rng);

  std::normal_distribution<double> normal;
  std::vector<std::complex<double>> weighted(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double scale =
        std::sqrt(std::max(eig[k].real(), 0.0) / static_cast<double>(m));
    const double re = normal(rng);
    const double im = normal(rng);
    weighted[k] = scale * std::complex<double>(re, im);
  }
  std::vector<std::complex<double>> field;
  fft.fwd(field, weighted);

  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = field[i].real();
  return out;
}

std::vector<double> simulate_fgn(const FgnSpec& spec, std::size_t length,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return simulate_fgn(spec, length, rng);
}

LevelVariance wavelet_level_variance(const FgnSpec& spec, int level,
                                     int coarsest,
                                     VarianceNormalization norm) {
  require(level >= 1 && level <= coarsest, ErrorCode::kInvalidArgument,
          "wavelet level must satisfy 1 <= level <= coarsest");
  const double g = spec.gamma();
  double c = spec.c_gamma();
  if (norm == VarianceNormalization::kWhiteNoiseUnit)
    c *= std::pow(2.0 * kPi, 2.0 * spec.hurst());
  const double denom = std::pow(2.0 * kPi, g) * (1.0 - g);

  LevelVariance out;
  out.detail = spec.variance() * c * std::pow(2.0, level * g) *
               (2.0 - std::pow(2.0, g)) / denom;
  if (level == coarsest)
    out.approx = spec.variance() * c * std::pow(2.0, (coarsest + 1) * g) / denom;
  return out;
}

}  // namespace nsvr
