#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "nsvr/design.hpp"
#include "nsvr/excursions.hpp"
#include "nsvr/hurst_cluster.hpp"
#include "nsvr/inference.hpp"
#include "nsvr/mesh.hpp"
#include "nsvr/spde.hpp"

namespace nsvr {

// ---------------------------------------------------------------------------
// Summaries

struct QuantileSummary {
  double min = 0.0, q1 = 0.0, median = 0.0, mean = 0.0, q3 = 0.0, max = 0.0, sd = 0.0;
  std::size_t n = 0;
};

// Quartiles by linear interpolation between order statistics (type 7).
QuantileSummary summarize(std::vector<double> values);

// ---------------------------------------------------------------------------
// AR prewhitening experiment

// Yule-Walker AR(p) coefficients by Levinson-Durbin on the biased sample
// autocovariance of the mean-removed series: x_t = sum_k phi_k x_{t-k} + e_t.
std::vector<double> yule_walker(std::span<const double> x, int order);
bool is_stationary_ar(const std::vector<double>& phi);
double ar_marginal_variance(const std::vector<double>& phi, double innovation_variance = 1.0);
// Stationary AR series scaled to unit marginal variance.
std::vector<double> simulate_ar(const std::vector<double>& phi, std::size_t length,
                                std::mt19937_64& rng);

std::vector<double> default_ar6_coefficients();

struct PrewhitenConfig {
  int runs = 500;
  std::size_t length = 256;
  double beta = 2.0;
  double fgn_hurst = 0.8;
  std::vector<double> ar_coefficients = default_ar6_coefficients();
  int fit_order = 6;
  double block_on = 20.0;   // seconds on, then the same off
  double tr = 1.0;
  // Also filter the regressor (the GLS variant). Off reproduces the
  // regression of the prewhitened response on the unfiltered regressor.
  bool prewhiten_regressor = false;
  std::uint64_t seed = 1;
};

struct PrewhitenReport {
  QuantileSummary ordinary_fgn;
  QuantileSummary prewhitened_fgn;
  QuantileSummary ordinary_ar;
  QuantileSummary prewhitened_ar;
  int redraws = 0;
  double seconds = 0.0;
};

PrewhitenReport run_prewhitening_experiment(const PrewhitenConfig& config);

// ---------------------------------------------------------------------------
// Brain-slice simulation

struct Site {
  std::string name;
  double cx = 0.0;
  double cy = 0.0;
  double radius = 1.0;
  double lambda = 0.0;
  double hurst = 0.5;
  std::vector<double> magnitude;  // per task

  // M_k exp(-lambda d) for d < radius, else 0.
  double activation(double x, double y, int task) const;
};

struct SliceSimSpec {
  int width = 46;
  int height = 55;
  std::vector<bool> mask;  // row-major, width x height
  std::vector<Site> sites;
  double background_hurst = 0.5;
  std::size_t length = 512;
  double tr = 1.0;
  double sigma = 1.0;
  int n_tasks = 2;
  std::vector<StimulusBlock> blocks;

  void validate() const;
};

// Ellipse with a central ventricle hole.
std::vector<bool> default_brain_mask(int width = 46, int height = 55);
// Task 1 on [0, 20) s and task 2 on [30, 50) s of every 60 s period.
std::vector<StimulusBlock> default_block_schedule(std::size_t length, double tr);
SliceSimSpec default_slice_spec();
// All magnitudes zero and every Hurst value 0.5.
SliceSimSpec null_slice_spec();

// Plain text: `height` lines of `width` characters '0' / '1'.
std::vector<bool> read_mask(const std::string& path, int* width, int* height);
void write_mask(const std::string& path, const std::vector<bool>& mask, int width, int height);

struct SliceData {
  GridMesh grid;
  TimeSeriesMatrix y;            // V x T
  DesignMatrix design;           // raw regressors with intercept
  Eigen::MatrixXd beta_true;     // V x K
  std::vector<double> hurst_true;
  std::vector<int> site_of_vertex;   // -1 outside every site
  std::vector<int> center_vertex;    // per site
  Parcellation parcellation;     // one region per site plus the background
};

SliceData generate_slice_simulation(const SliceSimSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
  int n_clusters = 3;
  std::uint64_t cluster_seed = 1;
  std::uint64_t sample_seed = 2;
  bool standardize_design = true;
  HurstMapOptions hurst;
  WhitenOptions whiten;
  GridOptions grid;
  HyperPriors priors;
  int alpha = 2;
  double sigma0 = 1.0;
  double rho0 = 0.0;  // 0 selects 5 x the median mesh edge length
  int n_samples = 10000;
  double excursion_alpha = 0.05;
  std::vector<double> extra_alphas;  // further positive sets from the same draws
  bool negative = false;
};

struct StageTimes {
  double preparation = 0.0;  // clustering, local variability, whitening
  double inference = 0.0;
  double excursions = 0.0;
};

struct PipelineResult {
  HurstClustering clustering;
  std::vector<LocalVariability> variability;  // per task
  double rho0 = 0.0;
  FitResult fit;
  Eigen::MatrixXd beta_mean;  // V x K on the raw regressor scale
  Eigen::MatrixXd beta_sd;
  std::vector<ExcursionResult> positive;  // per task at excursion_alpha
  std::vector<ExcursionResult> negative;  // per task, when requested
  std::vector<std::vector<ExcursionResult>> extra;  // [alpha index][task]
  StageTimes seconds;
};

// Everything the inference stage needs, built deterministically from the data
// and the configuration.
struct PreparedModel {
  DesignMatrix design;  // as used for inference (standardized when configured)
  HurstClustering clustering;
  std::vector<LocalVariability> variability;
  double rho0 = 0.0;
  Hyperparameters start;
  std::unique_ptr<PosteriorEngine> engine;
};

PreparedModel prepare_nsvr_model(const TimeSeriesMatrix& y, const DesignMatrix& design,
                                 const TriangularMesh& mesh, const Parcellation& parcellation,
                                 const PipelineConfig& config);

// Draws config.n_samples fields from the grid mixture and fills the
// positive, negative and extra excursion sets of `result`.
void run_excursion_stage(PosteriorEngine& engine, const std::vector<Hyperparameters>& points,
                         const std::vector<double>& weights, const TriangularMesh& mesh,
                         const PipelineConfig& config, PipelineResult& result);

PipelineResult run_nsvr_pipeline(const TimeSeriesMatrix& y, const DesignMatrix& design,
                                 const TriangularMesh& mesh, const Parcellation& parcellation,
                                 const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Map comparison

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  double false_positive_rate() const;
  double sensitivity() const;
};

ConfusionCounts compare_activation_maps(const std::vector<bool>& estimated,
                                        const std::vector<bool>& truth);

struct SiteDetection {
  std::string name;
  bool center_detected = false;
  double sensitivity = 0.0;  // over the site's active vertices
  std::size_t false_negatives = 0;
};

std::vector<SiteDetection> site_detection(const std::vector<bool>& estimated,
                                          const SliceData& data, int task);

// Symmetric difference of two vertex sets relative to the size of the first.
double symmetric_difference_ratio(const std::vector<int>& a, const std::vector<int>& b);

// ---------------------------------------------------------------------------
// Configuration and output

struct ExperimentConfig {
  SliceSimSpec simulation;
  std::uint64_t simulation_seed = 0;
  PipelineConfig pipeline;
  PrewhitenConfig prewhiten;
};

// Sections [design], [sites] (array of tables), [priors], [inference],
// [excursions] and optional [prewhiten]. The keys design.seed,
// inference.seed and excursions.seed are required.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::string& path);
// Effective settings, keyed like the configuration file.
nlohmann::json experiment_config_json(const ExperimentConfig& cfg);

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

// 8-bit binary PGM of per-vertex values on the pixel grid; pixels outside the
// mesh are black, values are scaled linearly from [lo, hi] to [1, 255].
void write_pgm(const std::string& path, const GridMesh& grid, const Eigen::VectorXd& values,
               double lo, double hi);

nlohmann::json summary_json(const QuantileSummary& s);
nlohmann::json prewhiten_report_json(const PrewhitenReport& r);
nlohmann::json excursion_json(const ExcursionResult& e);
nlohmann::json hyper_json(const Hyperparameters& h);
// Results document; `truth` adds confusion counts and site detection.
nlohmann::json pipeline_report_json(const PipelineResult& r, const SliceData* truth);

}  // namespace nsvr
