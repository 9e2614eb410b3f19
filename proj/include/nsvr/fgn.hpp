#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace nsvr {

// Fractional Gaussian noise: increments of fractional Brownian motion with
// Hurst parameter H in (0, 1) and marginal variance sigma^2.
class FgnSpec {
 public:
  explicit FgnSpec(double hurst, double variance = 1.0);

  double hurst() const { return hurst_; }
  double variance() const { return variance_; }

  // gamma = 2H - 1: slope of log2 wavelet level variance against level.
  double gamma() const { return 2.0 * hurst_ - 1.0; }

  // c_gamma = (2 pi)^{-2H} sin(pi H) Gamma(2H + 1).
  double c_gamma() const;

 private:
  double hurst_;
  double variance_;
};

// sigma^2 / 2 [(l+1)^{2H} - 2 l^{2H} + |l-1|^{2H}] for l >= 1, sigma^2 at l = 0.
double fgn_autocovariance(const FgnSpec& spec, std::size_t lag);

// Exact simulation by circulant embedding of the autocovariance, falling back
// to a dense Cholesky factor of the Toeplitz covariance when the embedding has
// materially negative eigenvalues.
std::vector<double> simulate_fgn(const FgnSpec& spec, std::size_t length,
                                 std::mt19937_64& rng);
std::vector<double> simulate_fgn(const FgnSpec& spec, std::size_t length,
                                 std::uint64_t seed);

enum class VarianceNormalization {
  // The closed form with c_gamma as defined above. At H = 0.5 this returns
  // sigma^2 / (2 pi) rather than sigma^2.
  kClosedForm,
  // Closed form times (2 pi)^{2H}: returns sigma^2 for white noise and tracks
  // the exact orthonormal-filter level variances across H. Used by the
  // whitened likelihood, where a single sigma is shared by all H values.
  kWhiteNoiseUnit,
};

struct LevelVariance {
  double detail = 0.0;
  // Only meaningful when level == coarsest.
  double approx = 0.0;
};

// Variance of the detail coefficients at `level` (1 = finest) and, when
// level == coarsest, of the approximation coefficients at the coarsest level.
LevelVariance wavelet_level_variance(
    const FgnSpec& spec, int level, int coarsest,
    VarianceNormalization norm = VarianceNormalization::kClosedForm);

}  // namespace nsvr
