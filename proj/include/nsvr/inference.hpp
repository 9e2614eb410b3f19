#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nsvr/design.hpp"
#include "nsvr/fgn.hpp"
#include "nsvr/hurst_cluster.hpp"
#include "nsvr/spde.hpp"
#include "nsvr/wavelet.hpp"

namespace nsvr {

struct WhitenOptions {
  WaveletFilter filter = WaveletFilter::kDaubechies4;
  // Deepest level kept has at least this many detail coefficients.
  std::size_t min_coeffs = 16;
  // Subtract each vertex's time-domain mean before transforming.
  bool center_response = true;
};

// Every vertex series and every design column after the same DWT. Coefficients
// are laid out as WaveletDecomposition::flatten; level[i] is 1..J for details
// and J + 1 for the approximation block.
struct WaveletData {
  Eigen::MatrixXd y;  // V x n
  Eigen::MatrixXd x;  // n x P, nuisance columns first
  std::vector<int> level;
  int levels = 0;
  Eigen::Index n_nuisance = 0;
};

WaveletData whiten_data(const TimeSeriesMatrix& y, const DesignMatrix& design,
                        const WhitenOptions& opts = {});

// Per-level cross products; all the likelihood needs once the data are fixed.
struct LevelStatistics {
  int levels = 0;
  Eigen::Index n_vertices = 0;
  Eigen::Index n_nuisance = 0;
  Eigen::Index n_tasks = 0;
  std::vector<int> counts;            // coefficients per level, size J + 1
  std::vector<Eigen::MatrixXd> xtx;   // per level, P x P
  std::vector<Eigen::MatrixXd> ytx;   // per level, V x P
  Eigen::MatrixXd yty;                // V x (J + 1)
};

LevelStatistics level_statistics(const WaveletData& data);

struct HyperPriors {
  double sigma_shape = 1.0;  // Gamma(shape, rate) on sigma
  double sigma_rate = 1.0;
  double theta_precision = 0.3;
  // Near-flat prior precision on nuisance coefficients.
  double nuisance_precision = 1e-8;
};

struct ModelSpec {
  int n_tasks = 1;
  int n_clusters = 1;
  std::vector<int> cluster_of_vertex;
  FemMatrices fem;
  int alpha = 2;
  double nu = 1.0;
  double sigma0 = 1.0;
  double rho0 = 1.0;
  std::vector<Eigen::VectorXd> delta;  // standardized local variability, per task
  HyperPriors priors;
  VarianceNormalization normalization = VarianceNormalization::kWhiteNoiseUnit;

  int dimension() const { return 1 + n_clusters + 2 * n_tasks; }
  void validate(Eigen::Index n_vertices) const;
};

// Natural-scale hyperparameters. The internal vector is
// [log sigma, logit H_1..H_nH, theta_11, theta_12, theta_21, ...].
struct Hyperparameters {
  double sigma = 1.0;
  std::vector<double> hurst;
  std::vector<double> theta1;
  std::vector<double> theta2;

  Eigen::VectorXd to_internal() const;
  static Hyperparameters from_internal(const Eigen::VectorXd& v, int n_clusters,
                                       int n_tasks);
};

struct ConditionalPosterior {
  Eigen::VectorXd mean;      // task-major: index k * V + v
  Eigen::VectorXd variance;  // empty unless requested
  double log_marginal = 0.0;           // determinant route
  double log_marginal_residual = 0.0;  // residual quadratic-form route
  double log_prior = 0.0;              // log density of the internal vector

  double log_posterior() const { return log_marginal + log_prior; }
};

// Exact Gaussian posterior of the stacked task fields given hyperparameters.
// The likelihood is Gaussian with a known diagonal wavelet-domain covariance
// and the prior is a GMRF, so the Laplace approximation is exact here.
// Nuisance coefficients are integrated out per vertex in closed form.
class PosteriorEngine {
 public:
  PosteriorEngine(ModelSpec model, LevelStatistics stats);

  const ModelSpec& model() const { return model_; }
  const LevelStatistics& stats() const { return stats_; }
  Eigen::Index n_vertices() const { return stats_.n_vertices; }

  ConditionalPosterior evaluate(const Hyperparameters& h, bool variances = false);
  double log_hyperprior(const Hyperparameters& h) const;

  // Wavelet-domain noise variance per level 1..J+1 for one cluster.
  std::vector<double> level_variances(const Hyperparameters& h, int cluster) const;
  // Block-diagonal prior precision over tasks.
  SparsePrecision prior_precision(const Hyperparameters& h) const;
  SparsePrecision posterior_precision(const Hyperparameters& h);

  // Appends `n` draws from the conditional posterior at h. Column `offset + s`
  // of out[k] receives task k of draw s.
  void sample(const Hyperparameters& h, int n, std::mt19937_64& rng,
              std::vector<Eigen::MatrixXf>& out, Eigen::Index offset);

 private:
  struct Reduced;
  Reduced reduce(const Hyperparameters& h) const;
  void check(const Hyperparameters& h) const;

  ModelSpec model_;
  LevelStatistics stats_;
  SparseCholesky post_factor_;
  SparseCholesky k_factor_;
};

ConditionalPosterior conditional_posterior(const Hyperparameters& h,
                                           const LevelStatistics& stats,
                                           const ModelSpec& model,
                                           bool variances = false);

struct GridOptions {
  int max_evaluations = 3000;     // mode-search budget
  double mode_tolerance = 1e-4;   // simplex size at convergence
  double hessian_step = 0.05;     // finite-difference step, curvature-scaled units
  int points_per_dim = 3;
  double grid_step = 1.5;         // spacing in standardized units
  int max_grid_points = 729;      // above this the composite design is used
  double ccd_f0 = 1.1;
  double prune_log_weight = 10.0;
};

struct GridPoint {
  Eigen::VectorXd theta;  // internal coordinates
  double log_posterior = 0.0;
  double log_delta = 0.0;  // integration weight of the design point
  double weight = 0.0;     // normalized
};

struct HyperGrid {
  std::vector<GridPoint> points;
  Eigen::VectorXd mode;
  double mode_log_posterior = 0.0;
  Eigen::MatrixXd neg_hessian;
  bool converged = false;
  int evaluations = 0;
  std::string scheme;  // "grid" or "ccd"
};

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

// Mode search (Nelder-Mead), finite-difference curvature at the mode, and a
// design in standardized coordinates z with theta = mode + V Lambda^{-1/2} z
// for the eigen-decomposition of the negative Hessian.
HyperGrid hyperparameter_grid(const LogDensity& log_posterior, const Eigen::VectorXd& start,
                              const GridOptions& opts = {});

// Two-level fractional factorial of resolution at least V in `d` factors with
// the fewest runs found by a generator search; entries are +-1.
Eigen::MatrixXd resolution_v_design(int d);

struct HyperMarginal {
  std::string name;
  std::vector<std::pair<double, double>> values;  // (value, weight), ascending
  double mean = 0.0;
};

struct PosteriorSummary {
  Eigen::MatrixXd mean;  // V x K
  Eigen::MatrixXd sd;    // V x K
  std::vector<Hyperparameters> points;
  std::vector<double> weights;
  std::vector<double> log_marginal;
  std::vector<double> log_posterior;
  Hyperparameters posterior_mean;  // weight-averaged natural-scale values
  std::vector<HyperMarginal> marginals;
};

// Finite mixture over grid points. `conditionals` must carry variances.
PosteriorSummary marginal_posteriors(const std::vector<ConditionalPosterior>& conditionals,
                                     const std::vector<Hyperparameters>& points,
                                     const std::vector<double>& weights,
                                     Eigen::Index n_vertices, int n_tasks);

struct FitResult {
  HyperGrid grid;
  PosteriorSummary summary;
};

// Mode search and grid over the engine's log posterior, then the mixture.
FitResult fit_posterior(PosteriorEngine& engine, const Hyperparameters& start,
                        const GridOptions& opts = {});

}  // namespace nsvr
