#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nsvr {

// Double-gamma canonical HRF, scaled to a peak value of 1.
struct HrfParams {
  double response_delay = 5.0;    // seconds to the positive peak
  double undershoot_delay = 12.0; // seconds to the undershoot trough
  double response_dispersion = 1.0;
  double undershoot_dispersion = 1.0;
  double undershoot_ratio = 1.0 / 6.0;
  double support = 32.0;          // truncation of the kernel, seconds
};

double canonical_hrf(double t, const HrfParams& params = {});

struct StimulusBlock {
  double onset = 0.0;     // seconds
  double duration = 0.0;  // seconds
  int task = 1;           // 1-based task id
};

// Indicator time course of one task on a TR grid of `length` samples.
struct StimulusCourse {
  std::vector<StimulusBlock> blocks;
  double tr = 1.0;
  std::size_t length = 0;

  bool active(double t) const;
  // s(t) at the TR sample times, values in {0, 1}.
  std::vector<double> sampled() const;
};

// Number of sub-samples per TR used for the convolution integral.
inline constexpr int kHrfOversampling = 16;

// Riemann sum of the convolution integral on a grid of tr / oversample,
// read off at the TR sample times t = 0, tr, 2 tr, ...
std::vector<double> convolve_design(const StimulusCourse& stim,
                                    const HrfParams& hrf = {});

// Convolution of a stimulus sampled on the fine grid (spacing dt) with the
// HRF, returned on the same fine grid. Linear in `fine_stimulus`.
std::vector<double> convolve_fine(std::span<const double> fine_stimulus,
                                  double dt, const HrfParams& hrf = {});

// Column 0 is the intercept when has_intercept; the remaining columns are task
// regressors in task order.
struct DesignMatrix {
  Eigen::MatrixXd columns;
  bool has_intercept = true;
  // Per task column: the original mean and standard deviation when the matrix
  // was produced by standardize_columns, else 0 and 1.
  std::vector<double> task_center;
  std::vector<double> task_scale;

  Eigen::Index rows() const { return columns.rows(); }
  Eigen::Index n_nuisance() const { return has_intercept ? 1 : 0; }
  Eigen::Index n_tasks() const { return columns.cols() - n_nuisance(); }
};

DesignMatrix make_design(const std::vector<std::vector<double>>& task_regressors,
                         bool intercept = true);

// Centers each task column and scales it to unit sample standard deviation.
DesignMatrix standardize_columns(const DesignMatrix& design);

// Plain-text rows "onset_s duration_s task_id"; '#' starts a comment.
std::vector<StimulusBlock> read_stimulus_file(const std::string& path);
void write_stimulus_file(const std::string& path,
                         const std::vector<StimulusBlock>& blocks);

// One StimulusCourse per task id 1..max id found in `blocks`.
std::vector<StimulusCourse> split_by_task(const std::vector<StimulusBlock>& blocks,
                                          double tr, std::size_t length);

}  // namespace nsvr
