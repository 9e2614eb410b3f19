#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsvr/design.hpp"
#include "nsvr/wavelet.hpp"

namespace nsvr {

// V x T responses, one row per vertex.
using TimeSeriesMatrix = Eigen::MatrixXd;

// Assignment of every vertex to exactly one region. Regions are stored as
// dense indices 0..R-1; `labels` keeps the label used in files.
struct Parcellation {
  std::vector<int> region_of_vertex;
  std::vector<int> labels;

  int n_regions() const { return static_cast<int>(labels.size()); }
  std::size_t n_vertices() const { return region_of_vertex.size(); }

  // Builds from arbitrary integer labels; regions ordered by label value.
  static Parcellation from_labels(std::span<const int> vertex_labels);
};

// Plain-text rows "vertex_index region_index".
Parcellation read_parcellation(const std::string& path, std::size_t n_vertices);
void write_parcellation(const std::string& path, const Parcellation& parc);

struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals;
};

OlsFit ols_residuals(const Eigen::VectorXd& y, const DesignMatrix& design);

// Per-vertex OLS against one shared design. Factorizes the design once.
class OlsSolver {
 public:
  explicit OlsSolver(const DesignMatrix& design);
  OlsFit fit(const Eigen::VectorXd& y) const;

 private:
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::MatrixXd x_;
};

struct HurstMapOptions {
  std::size_t min_coeffs = 16;
  WaveletFilter filter = WaveletFilter::kDaubechies4;
};

// Residual Hurst estimate per vertex: OLS residuals, padded to a power of two,
// transformed, and fitted by estimate_hurst_slope.
std::vector<double> preliminary_hurst_map(const TimeSeriesMatrix& y,
                                          const DesignMatrix& design,
                                          const HurstMapOptions& opts = {});

struct KMeansResult {
  std::vector<int> membership;  // cluster index per value, centers ascending
  std::vector<double> centers;  // sorted ascending
  double within_ss = 0.0;
  int iterations = 0;           // of the selected restart
  std::vector<double> objective_trace;  // within-SS per iteration, selected restart
};

struct KMeansOptions {
  int restarts = 25;
  int max_iterations = 100;
};

KMeansResult kmeans_1d(std::span<const double> values, int k, std::uint64_t seed,
                       const KMeansOptions& opts = {});

struct HurstClustering {
  int n_clusters = 0;
  std::vector<int> cluster_of_region;
  std::vector<int> cluster_of_vertex;
  std::vector<double> preliminary;     // per vertex
  std::vector<double> region_medians;  // per region
  std::vector<double> centers;         // per cluster, ascending; starting H values
};

// Midpoint of the two middle values for even counts.
double median(std::vector<double> values);

HurstClustering cluster_regions(std::span<const double> preliminary,
                                const Parcellation& parcellation, int n_clusters,
                                std::uint64_t seed);

HurstClustering build_clustering(const TimeSeriesMatrix& y,
                                 const DesignMatrix& design,
                                 const Parcellation& parcellation, int n_clusters,
                                 std::uint64_t seed,
                                 const HurstMapOptions& opts = {});

}  // namespace nsvr
