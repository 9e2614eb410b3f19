#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nsvr {

enum class WaveletFilter {
  kHaar,
  // Daubechies, 4 vanishing moments (8 taps).
  kDaubechies4,
};

// Orthonormal periodic DWT output. detail[j - 1] holds level j (j = 1 finest),
// of length n / 2^j; approx holds the coarsest-level scaling coefficients.
struct WaveletDecomposition {
  std::vector<std::vector<double>> detail;
  std::vector<double> approx;
  WaveletFilter filter = WaveletFilter::kDaubechies4;
  std::size_t original_length = 0;

  int levels() const { return static_cast<int>(detail.size()); }

  // Coefficients in the order detail level 1, ..., detail level J, approx.
  std::vector<double> flatten() const;
  // Level label for each flattened coefficient: 1..J for details, J + 1 for
  // the approximation block.
  std::vector<int> flat_levels() const;
};

WaveletDecomposition dwt(std::span<const double> series, int levels,
                         WaveletFilter filter = WaveletFilter::kDaubechies4);

std::vector<double> idwt(const WaveletDecomposition& decomp);

// Same coefficient layout as WaveletDecomposition::flatten, written into `out`
// (size n). `work` is scratch space of size n; both may be reused across
// calls to avoid allocation when transforming many series.
void dwt_flat(std::span<const double> series, int levels, WaveletFilter filter,
              std::span<double> out, std::span<double> work);

struct PaddedSeries {
  std::vector<double> values;
  std::size_t original_length = 0;
};

// Extends the series to the next power of two by mirroring it about its last
// sample: [a, b, c] -> [a, b, c, c].
PaddedSeries pad_to_pow2(std::span<const double> series);

struct HurstEstimate {
  double hurst = 0.5;
  double gamma = 0.0;
  int levels_used = 0;
};

// OLS fit of log2(sample variance of detail level j) on j over the levels with
// at least `min_coeffs` coefficients; H = (gamma + 1) / 2 clamped to
// [0.01, 0.99].
HurstEstimate estimate_hurst_slope(const WaveletDecomposition& decomp,
                                   std::size_t min_coeffs = 16);

bool is_pow2(std::size_t n);
int log2_exact(std::size_t n);

}  // namespace nsvr
