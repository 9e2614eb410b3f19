#include "nsvr/design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nsvr/error.hpp"

namespace nsvr {

namespace {

double gamma_pdf(double t, double shape, double scale) {
  if (t <= 0.0) return 0.0;
  return std::exp((shape - 1.0) * std::log(t) - t / scale -
                  shape * std::log(scale) - std::lgamma(shape));
}

double hrf_raw(double t, const HrfParams& p) {
  // Shape chosen so that the gamma mode sits at the stated delay.
  const double a1 = p.response_delay / p.response_dispersion + 1.0;
  const double a2 = p.undershoot_delay / p.undershoot_dispersion + 1.0;
  return gamma_pdf(t, a1, p.response_dispersion) -
         p.undershoot_ratio * gamma_pdf(t, a2, p.undershoot_dispersion);
}

double hrf_peak(const HrfParams& p) {
  double best_t = 0.0, best = 0.0;
  for (double t = 0.0; t <= p.support; t += 0.01) {
    const double v = hrf_raw(t, p);
    if (v > best) {
      best = v;
      best_t = t;
    }
  }
  // Golden-section refinement around the grid maximum.
  double lo = std::max(0.0, best_t - 0.01), hi = best_t + 0.01;
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < 60; ++i) {
    const double a = hi - r * (hi - lo), b = lo + r * (hi - lo);
    if (hrf_raw(a, p) > hrf_raw(b, p))
      hi = b;
    else
      lo = a;
  }
  return std::max(best, hrf_raw(0.5 * (lo + hi), p));
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

double canonical_hrf(double t, const HrfParams& params) {
  if (t <= 0.0) return 0.0;
  return hrf_raw(t, params) / hrf_peak(params);
}

bool StimulusCourse::active(double t) const {
  for (const auto& b : blocks)
    if (t >= b.onset && t < b.onset + b.duration) return true;
  return false;
}

std::vector<double> StimulusCourse::sampled() const {
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i)
    out[i] = active(static_cast<double>(i) * tr) ? 1.0 : 0.0;
  return out;
}

std::vector<double> convolve_fine(std::span<const double> fine_stimulus,
                                  double dt, const HrfParams& hrf) {
  require(dt > 0.0, ErrorCode::kInvalidArgument, "sampling step must be > 0");
  const double peak = hrf_peak(hrf);
  const auto taps = static_cast<std::size_t>(std::floor(hrf.support / dt)) + 1;
  std::vector<double> kernel(taps);
  for (std::size_t m = 0; m < taps; ++m)
    kernel[m] = hrf_raw(static_cast<double>(m) * dt, hrf) / peak;

  const std::size_t n = fine_stimulus.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t reach = std::min(taps, i + 1);
    double acc = 0.0;
    for (std::size_t m = 0; m < reach; ++m)
      acc += kernel[m] * fine_stimulus[i - m];
    out[i] = acc * dt;
  }
  return out;
}

std::vector<double> convolve_design(const StimulusCourse& stim,
                                    const HrfParams& hrf) {
  require(stim.tr > 0.0, ErrorCode::kInvalidArgument, "TR must be positive");
  const double dt = stim.tr / kHrfOversampling;
  const std::size_t fine_n = stim.length * kHrfOversampling;
  std::vector<double> fine(fine_n);
  for (std::size_t i = 0; i < fine_n; ++i)
    fine[i] = stim.active(static_cast<double>(i) * dt) ? 1.0 : 0.0;
  const auto conv = convolve_fine(fine, dt, hrf);
  std::vector<double> out(stim.length);
  for (std::size_t t = 0; t < stim.length; ++t)
    out[t] = conv[t * kHrfOversampling];
  return out;
}

DesignMatrix make_design(const std::vector<std::vector<double>>& task_regressors,
                         bool intercept) {
  require(!task_regressors.empty(), ErrorCode::kInvalidArgument,
          "design needs at least one task regressor");
  const auto t = static_cast<Eigen::Index>(task_regressors.front().size());
  const Eigen::Index offset = intercept ? 1 : 0;
  DesignMatrix out;
  out.has_intercept = intercept;
  out.columns.resize(t, offset + static_cast<Eigen::Index>(task_regressors.size()));
  if (intercept) out.columns.col(0).setOnes();
  for (std::size_t k = 0; k < task_regressors.size(); ++k) {
    require(static_cast<Eigen::Index>(task_regressors[k].size()) == t,
            ErrorCode::kDimensionMismatch, "task regressors differ in length");
    for (Eigen::Index i = 0; i < t; ++i)
      out.columns(i, offset + static_cast<Eigen::Index>(k)) = task_regressors[k][i];
  }
  out.task_center.assign(task_regressors.size(), 0.0);
  out.task_scale.assign(task_regressors.size(), 1.0);
  return out;
}

DesignMatrix standardize_columns(const DesignMatrix& design) {
  const Eigen::Index t = design.rows();
  require(t >= 2, ErrorCode::kInvalidArgument,
          "standardization needs at least two time points");
  DesignMatrix out = design;
  const Eigen::Index offset = design.n_nuisance();
  for (Eigen::Index k = 0; k < design.n_tasks(); ++k) {
    auto col = out.columns.col(offset + k);
    const double mean = col.mean();
    const double sd =
        std::sqrt((col.array() - mean).square().sum() / static_cast<double>(t - 1));
    require(sd > 1e-12 * std::max(1.0, std::abs(mean)), ErrorCode::kDomain,
            "task column " + std::to_string(k + 1) + " is constant");
    col = (col.array() - mean) / sd;
    // Compose with any earlier standardization so scales stay relative to
    // the raw regressor.
    const auto idx = static_cast<std::size_t>(k);
    out.task_center[idx] = design.task_center[idx] + mean * design.task_scale[idx];
    out.task_scale[idx] = design.task_scale[idx] * sd;
  }
  return out;
}

std::vector<StimulusBlock> read_stimulus_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open stimulus file " + path);
  std::vector<StimulusBlock> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    std::istringstream ss(line);
    StimulusBlock b;
    require(static_cast<bool>(ss >> b.onset >> b.duration >> b.task),
            ErrorCode::kParse,
            path + ":" + std::to_string(lineno) +
                ": expected 'onset_s duration_s task_id'");
    require(b.duration >= 0.0 && b.task >= 1, ErrorCode::kParse,
            path + ":" + std::to_string(lineno) +
                ": duration must be >= 0 and task_id >= 1");
    out.push_back(b);
  }
  return out;
}

void write_stimulus_file(const std::string& path,
                         const std::vector<StimulusBlock>& blocks) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write stimulus file " + path);
  out << "# onset_s duration_s task_id\n";
  for (const auto& b : blocks)
    out << b.onset << ' ' << b.duration << ' ' << b.task << '\n';
}

std::vector<StimulusCourse> split_by_task(const std::vector<StimulusBlock>& blocks,
                                          double tr, std::size_t length) {
  int n_tasks = 0;
  for (const auto& b : blocks) n_tasks = std::max(n_tasks, b.task);
  require(n_tasks >= 1, ErrorCode::kInvalidArgument, "no stimulus blocks");
  std::vector<StimulusCourse> out(static_cast<std::size_t>(n_tasks));
  for (auto& c : out) {
    c.tr = tr;
    c.length = length;
  }
  for (const auto& b : blocks) out[static_cast<std::size_t>(b.task - 1)].blocks.push_back(b);
  return out;
}

}  // namespace nsvr
