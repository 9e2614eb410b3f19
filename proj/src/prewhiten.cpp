#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "nsvr/error.hpp"
#include "nsvr/fgn.hpp"
#include "nsvr/harness.hpp"

namespace nsvr {

QuantileSummary summarize(std::vector<double> values) {
  require(!values.empty(), ErrorCode::kInvalidArgument, "cannot summarize an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  auto quantile = [&](double p) {
    const double h = (static_cast<double>(n) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  QuantileSummary s;
  s.n = n;
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  return s;
}

std::vector<double> yule_walker(std::span<const double> x, int order) {
  require(order >= 1, ErrorCode::kInvalidArgument, "AR order must be >= 1");
  const std::size_t n = x.size();
  require(n > static_cast<std::size_t>(order), ErrorCode::kInvalidArgument,
          "series shorter than the AR order");
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::vector<double> r(static_cast<std::size_t>(order) + 1, 0.0);
  for (int k = 0; k <= order; ++k) {
    double acc = 0.0;
    for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t)
      acc += (x[t] - mean) * (x[t - static_cast<std::size_t>(k)] - mean);
    r[static_cast<std::size_t>(k)] = acc / static_cast<double>(n);
  }
  require(r[0] > 0.0, ErrorCode::kDomain, "series has zero variance");

  // Levinson-Durbin recursion.
  std::vector<double> phi(static_cast<std::size_t>(order), 0.0), prev;
  double err = r[0];
  for (int k = 1; k <= order; ++k) {
    double acc = r[static_cast<std::size_t>(k)];
    for (int j = 1; j < k; ++j)
      acc -= phi[static_cast<std::size_t>(j - 1)] * r[static_cast<std::size_t>(k - j)];
    const double refl = acc / err;
    prev = phi;
    phi[static_cast<std::size_t>(k - 1)] = refl;
    for (int j = 1; j < k; ++j)
      phi[static_cast<std::size_t>(j - 1)] =
          prev[static_cast<std::size_t>(j - 1)] - refl * prev[static_cast<std::size_t>(k - j - 1)];
    err *= 1.0 - refl * refl;
    require(err > 0.0, ErrorCode::kDomain, "Yule-Walker recursion lost positivity");
  }
  return phi;
}

bool is_stationary_ar(const std::vector<double>& phi) {
  if (phi.empty()) return true;
  const auto p = static_cast<Eigen::Index>(phi.size());
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) companion(0, j) = phi[static_cast<std::size_t>(j)];
  for (Eigen::Index i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  const Eigen::VectorXcd ev = companion.eigenvalues();
  return ev.cwiseAbs().maxCoeff() < 1.0 - 1e-10;
}

double ar_marginal_variance(const std::vector<double>& phi, double innovation_variance) {
  require(is_stationary_ar(phi), ErrorCode::kDomain, "AR coefficients are not stationary");
  // Sum of squared MA(infinity) weights.
  std::vector<double> psi{1.0};
  double total = 1.0;
  for (std::size_t j = 1; j < 200000; ++j) {
    double v = 0.0;
    for (std::size_t k = 1; k <= phi.size() && k <= j; ++k) v += phi[k - 1] * psi[j - k];
    psi.push_back(v);
    total += v * v;
    bool small = j > phi.size();
    for (std::size_t k = 0; small && k <= phi.size(); ++k)
      small = std::abs(psi[j - k]) < 1e-17;
    if (small) break;
  }
  return innovation_variance * total;
}

std::vector<double> simulate_ar(const std::vector<double>& phi, std::size_t length,
                                std::mt19937_64& rng) {
  const double scale = 1.0 / std::sqrt(ar_marginal_variance(phi));
  const std::size_t burn = 1000;
  std::normal_distribution<double> normal;
  std::vector<double> x(length + burn, 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double v = normal(rng);
    for (std::size_t k = 1; k <= phi.size() && k <= t; ++k) v += phi[k - 1] * x[t - k];
    x[t] = v;
  }
  std::vector<double> out(x.begin() + static_cast<std::ptrdiff_t>(burn), x.end());
  for (double& v : out) v *= scale;
  return out;
}

std::vector<double> default_ar6_coefficients() {
  return {0.20, 0.07, 0.04, 0.02, 0.02, 0.01};
}

namespace {

// Slope of y on [1, x].
double ols_slope(const std::vector<double>& y, const std::vector<double>& x) {
  const auto n = static_cast<double>(y.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    sxy += (x[t] - mx) * (y[t] - my);
    sxx += (x[t] - mx) * (x[t] - mx);
  }
  return sxy / sxx;
}

std::vector<double> ar_filter(const std::vector<double>& v, const std::vector<double>& phi) {
  std::vector<double> out;
  for (std::size_t t = phi.size(); t < v.size(); ++t) {
    double e = v[t];
    for (std::size_t k = 1; k <= phi.size(); ++k) e -= phi[k - 1] * v[t - k];
    out.push_back(e);
  }
  return out;
}

}  // namespace

PrewhitenReport run_prewhitening_experiment(const PrewhitenConfig& config) {
  require(config.runs >= 1 && config.length > static_cast<std::size_t>(config.fit_order) + 2,
          ErrorCode::kInvalidArgument, "prewhitening experiment needs runs >= 1 and T > p + 2");
  require(is_stationary_ar(config.ar_coefficients), ErrorCode::kDomain,
          "configured AR coefficients are not stationary");
  const auto start = std::chrono::steady_clock::now();

  StimulusCourse course;
  course.tr = config.tr;
  course.length = config.length;
  for (double onset = 0.0; onset < static_cast<double>(config.length) * config.tr;
       onset += 2.0 * config.block_on)
    course.blocks.push_back({onset, config.block_on, 1});
  const std::vector<double> x = convolve_design(course);
  const std::vector<double> x_tail(x.begin() + config.fit_order, x.end());

  std::mt19937_64 rng(config.seed);
  const FgnSpec fgn(config.fgn_hurst, 1.0);
  PrewhitenReport report;
  std::vector<double> ord_fgn, pw_fgn, ord_ar, pw_ar;

  auto one = [&](const std::vector<double>& noise, std::vector<double>& ord,
                 std::vector<double>& pw) -> bool {
    const auto phi = yule_walker(noise, config.fit_order);
    if (!is_stationary_ar(phi)) return false;
    std::vector<double> y(noise.size());
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = config.beta * x[t] + noise[t];
    ord.push_back(ols_slope(y, x));
    const auto y_pw = ar_filter(y, phi);
    pw.push_back(ols_slope(y_pw, config.prewhiten_regressor ? ar_filter(x, phi) : x_tail));
    return true;
  };

  for (int run = 0; run < config.runs; ++run) {
    while (!one(simulate_fgn(fgn, config.length, rng), ord_fgn, pw_fgn)) ++report.redraws;
    while (!one(simulate_ar(config.ar_coefficients, config.length, rng), ord_ar, pw_ar))
      ++report.redraws;
  }
  report.ordinary_fgn = summarize(ord_fgn);
  report.prewhitened_fgn = summarize(pw_fgn);
  report.ordinary_ar = summarize(ord_ar);
  report.prewhitened_ar = summarize(pw_ar);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace nsvr
