#include "nsvr/wavelet.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "nsvr/error.hpp"

namespace nsvr {

namespace {

constexpr std::array<double, 2> kHaarLow = {std::numbers::sqrt2 / 2.0,
                                            std::numbers::sqrt2 / 2.0};

// Scaling filter from the spectral factorization of the degree-4 Daubechies
// polynomial, evaluated in extended precision.
constexpr std::array<double, 8> kDb4Low = {
    0.2303778133088965,    0.7148465705529157,  0.6308807679298589,
    -0.027983769416859854, -0.18703481171909309, 0.030841381835560764,
    0.0328830116668852,    -0.010597401785069032};

std::span<const double> low_pass(WaveletFilter filter) {
  switch (filter) {
    case WaveletFilter::kHaar:
      return kHaarLow;
    case WaveletFilter::kDaubechies4:
      return kDb4Low;
  }
  fail(ErrorCode::kInvalidArgument, "unknown wavelet filter");
}

// g[k] = (-1)^k h[L - 1 - k]
double high_coeff(std::span<const double> h, std::size_t k) {
  const double v = h[h.size() - 1 - k];
  return (k % 2 == 0) ? v : -v;
}

// One analysis step on x[0..n): approx -> out[0..n/2), detail -> out[n/2..n).
void analysis_step(std::span<const double> h, const double* x, std::size_t n,
                   double* out) {
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k < half; ++k) {
    double a = 0.0, d = 0.0;
    for (std::size_t m = 0; m < h.size(); ++m) {
      const double v = x[(2 * k + m) % n];
      a += h[m] * v;
      d += high_coeff(h, m) * v;
    }
    out[k] = a;
    out[half + k] = d;
  }
}

void synthesis_step(std::span<const double> h, const double* approx,
                    const double* detail, std::size_t n, double* out) {
  std::fill(out, out + n, 0.0);
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k < half; ++k) {
    for (std::size_t m = 0; m < h.size(); ++m) {
      out[(2 * k + m) % n] += h[m] * approx[k] + high_coeff(h, m) * detail[k];
    }
  }
}

void check_levels(std::size_t n, int levels) {
  require(n > 0 && is_pow2(n), ErrorCode::kInvalidArgument,
          "DWT input length must be a power of two");
  require(levels >= 1, ErrorCode::kInvalidArgument, "DWT needs levels >= 1");
  require(levels <= log2_exact(n), ErrorCode::kInvalidArgument,
          "DWT levels exceed log2 of the input length");
}

double sample_variance(std::span<const double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

int log2_exact(std::size_t n) {
  require(is_pow2(n), ErrorCode::kInvalidArgument,
          "length " + std::to_string(n) + " is not a power of two");
  int j = 0;
  while ((std::size_t{1} << j) < n) ++j;
  return j;
}

std::vector<double> WaveletDecomposition::flatten() const {
  std::vector<double> out;
  out.reserve(original_length);
  for (const auto& d : detail) out.insert(out.end(), d.begin(), d.end());
  out.insert(out.end(), approx.begin(), approx.end());
  return out;
}

std::vector<int> WaveletDecomposition::flat_levels() const {
  std::vector<int> out;
  for (int j = 0; j < levels(); ++j)
    out.insert(out.end(), detail[j].size(), j + 1);
  out.insert(out.end(), approx.size(), levels() + 1);
  return out;
}

void dwt_flat(std::span<const double> series, int levels, WaveletFilter filter,
              std::span<double> out, std::span<double> work) {
  const std::size_t n = series.size();
  check_levels(n, levels);
  require(out.size() == n && work.size() == n, ErrorCode::kDimensionMismatch,
          "dwt_flat buffers must match the series length");
  const auto h = low_pass(filter);

  // Work in `work`: approximation of the current level occupies [0, len).
  std::copy(series.begin(), series.end(), work.begin());
  std::size_t len = n;
  std::size_t detail_offset = 0;
  std::vector<double> step(n);
  for (int j = 1; j <= levels; ++j) {
    analysis_step(h, work.data(), len, step.data());
    const std::size_t half = len / 2;
    std::copy(step.begin() + half, step.begin() + len,
              out.begin() + detail_offset);
    detail_offset += half;
    std::copy(step.begin(), step.begin() + half, work.begin());
    len = half;
  }
  std::copy(work.begin(), work.begin() + len, out.begin() + detail_offset);
}

WaveletDecomposition dwt(std::span<const double> series, int levels,
                         WaveletFilter filter) {
  const std::size_t n = series.size();
  check_levels(n, levels);
  std::vector<double> flat(n), work(n);
  dwt_flat(series, levels, filter, flat, work);

  WaveletDecomposition out;
  out.filter = filter;
  out.original_length = n;
  std::size_t offset = 0;
  std::size_t len = n;
  for (int j = 1; j <= levels; ++j) {
    len /= 2;
    out.detail.emplace_back(flat.begin() + offset, flat.begin() + offset + len);
    offset += len;
  }
  out.approx.assign(flat.begin() + offset, flat.end());
  return out;
}

std::vector<double> idwt(const WaveletDecomposition& decomp) {
  const std::size_t n = decomp.original_length;
  const int levels = decomp.levels();
  check_levels(n, levels);
  require(decomp.approx.size() == (n >> levels), ErrorCode::kInvalidArgument,
          "malformed decomposition: approximation length");
  for (int j = 1; j <= levels; ++j)
    require(decomp.detail[j - 1].size() == (n >> j),
            ErrorCode::kInvalidArgument,
            "malformed decomposition: detail length at level " +
                std::to_string(j));

  const auto h = low_pass(decomp.filter);
  std::vector<double> current = decomp.approx;
  std::vector<double> next;
  for (int j = levels; j >= 1; --j) {
    const std::size_t len = n >> (j - 1);
    next.assign(len, 0.0);
    synthesis_step(h, current.data(), decomp.detail[j - 1].data(), len,
                   next.data());
    current.swap(next);
  }
  return current;
}

PaddedSeries pad_to_pow2(std::span<const double> series) {
  require(!series.empty(), ErrorCode::kInvalidArgument,
          "cannot pad an empty series");
  const std::size_t n = series.size();
  std::size_t target = 1;
  while (target < n) target <<= 1;

  PaddedSeries out;
  out.original_length = n;
  out.values.assign(series.begin(), series.end());
  // target < 2n, so the mirror image never runs past the first sample.
  for (std::size_t i = 0; n + i < target; ++i)
    out.values.push_back(series[n - 1 - i]);
  return out;
}

HurstEstimate estimate_hurst_slope(const WaveletDecomposition& decomp,
                                   std::size_t min_coeffs) {
  require(min_coeffs >= 2, ErrorCode::kInvalidArgument,
          "min_coeffs must be at least 2");
  std::vector<double> js, logv;
  for (int j = 1; j <= decomp.levels(); ++j) {
    const auto& d = decomp.detail[j - 1];
    if (d.size() < min_coeffs) continue;
    const double v = sample_variance(d);
    require(v > 0.0 && std::isfinite(v), ErrorCode::kDomain,
            "zero detail variance at level " + std::to_string(j));
    js.push_back(j);
    logv.push_back(std::log2(v));
  }
  require(js.size() >= 2, ErrorCode::kInvalidArgument,
          "Hurst slope needs at least two levels with enough coefficients");

  const double m = static_cast<double>(js.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < js.size(); ++i) {
    mx += js[i];
    my += logv[i];
  }
  mx /= m;
  my /= m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < js.size(); ++i) {
    sxy += (js[i] - mx) * (logv[i] - my);
    sxx += (js[i] - mx) * (js[i] - mx);
  }

  HurstEstimate out;
  out.gamma = sxy / sxx;
  out.hurst = std::clamp((out.gamma + 1.0) / 2.0, 0.01, 0.99);
  out.levels_used = static_cast<int>(js.size());
  return out;
}

}  // namespace nsvr
