#include "nsvr/hurst_cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "nsvr/error.hpp"

namespace nsvr {

Parcellation Parcellation::from_labels(std::span<const int> vertex_labels) {
  std::set<int> unique(vertex_labels.begin(), vertex_labels.end());
  Parcellation out;
  out.labels.assign(unique.begin(), unique.end());
  std::map<int, int> dense;
  for (std::size_t i = 0; i < out.labels.size(); ++i)
    dense[out.labels[i]] = static_cast<int>(i);
  out.region_of_vertex.reserve(vertex_labels.size());
  for (int label : vertex_labels) out.region_of_vertex.push_back(dense[label]);
  return out;
}

Parcellation read_parcellation(const std::string& path, std::size_t n_vertices) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open parcellation file " + path);
  std::vector<int> labels(n_vertices, std::numeric_limits<int>::min());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = line.substr(0, line.find('#'));
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    long long vertex = -1;
    int region = 0;
    require(static_cast<bool>(ss >> vertex >> region), ErrorCode::kParse,
            path + ":" + std::to_string(lineno) +
                ": expected 'vertex_index region_index'");
    require(vertex >= 0 && static_cast<std::size_t>(vertex) < n_vertices,
            ErrorCode::kParse,
            path + ":" + std::to_string(lineno) + ": vertex index out of range");
    require(labels[static_cast<std::size_t>(vertex)] == std::numeric_limits<int>::min(),
            ErrorCode::kParse,
            path + ":" + std::to_string(lineno) + ": vertex assigned twice");
    labels[static_cast<std::size_t>(vertex)] = region;
  }
  for (std::size_t v = 0; v < n_vertices; ++v)
    require(labels[v] != std::numeric_limits<int>::min(), ErrorCode::kParse,
            path + ": vertex " + std::to_string(v) + " has no region");
  return Parcellation::from_labels(labels);
}

void write_parcellation(const std::string& path, const Parcellation& parc) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write parcellation file " + path);
  out << "# vertex_index region_index\n";
  for (std::size_t v = 0; v < parc.n_vertices(); ++v)
    out << v << ' ' << parc.labels[static_cast<std::size_t>(parc.region_of_vertex[v])]
        << '\n';
}

OlsSolver::OlsSolver(const DesignMatrix& design)
    : qr_(design.columns), x_(design.columns) {
  require(design.rows() > design.columns.cols() + 1, ErrorCode::kInvalidArgument,
          "OLS needs more time points than regressors + 1");
  require(qr_.rank() == design.columns.cols(), ErrorCode::kRankDeficient,
          "design matrix is rank deficient");
}

OlsFit OlsSolver::fit(const Eigen::VectorXd& y) const {
  require(y.size() == x_.rows(), ErrorCode::kDimensionMismatch,
          "response length does not match design rows");
  OlsFit out;
  out.beta = qr_.solve(y);
  out.residuals = y - x_ * out.beta;
  return out;
}

OlsFit ols_residuals(const Eigen::VectorXd& y, const DesignMatrix& design) {
  return OlsSolver(design).fit(y);
}

std::vector<double> preliminary_hurst_map(const TimeSeriesMatrix& y,
                                          const DesignMatrix& design,
                                          const HurstMapOptions& opts) {
  const OlsSolver solver(design);
  std::vector<double> out(static_cast<std::size_t>(y.rows()));
  for (Eigen::Index v = 0; v < y.rows(); ++v) {
    const Eigen::VectorXd row = y.row(v).transpose();
    const auto fit = solver.fit(row);
    auto padded = pad_to_pow2({fit.residuals.data(),
                               static_cast<std::size_t>(fit.residuals.size())});
    const std::size_t n = padded.values.size();
    const int max_level = log2_exact(n);
    // Deepest level that still has min_coeffs detail coefficients.
    int levels = 0;
    while (levels < max_level && (n >> (levels + 1)) >= opts.min_coeffs) ++levels;
    require(levels >= 2, ErrorCode::kInvalidArgument,
            "series too short for a wavelet Hurst estimate");
    const auto decomp = dwt(padded.values, levels, opts.filter);
    out[static_cast<std::size_t>(v)] =
        estimate_hurst_slope(decomp, opts.min_coeffs).hurst;
  }
  return out;
}

namespace {

struct LloydRun {
  std::vector<int> membership;
  std::vector<double> centers;
  double ss = 0.0;
  int iterations = 0;
  std::vector<double> trace;
};

// Nearest center with ties to the lower index; centers must be ascending.
int nearest(const std::vector<double>& centers, double x) {
  int best = 0;
  double best_d = std::abs(x - centers[0]);
  for (std::size_t c = 1; c < centers.size(); ++c) {
    const double d = std::abs(x - centers[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

double within_ss(std::span<const double> values, const std::vector<int>& member,
                 const std::vector<double>& centers) {
  double ss = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - centers[static_cast<std::size_t>(member[i])];
    ss += d * d;
  }
  return ss;
}

std::vector<double> plus_plus_init(std::span<const double> values, int k,
                                   std::mt19937_64& rng) {
  std::vector<double> centers;
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  centers.push_back(values[pick(rng)]);
  std::vector<double> d2(values.size());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (values[i] - c) * (values[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) break;
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng), acc = 0.0;
    std::size_t chosen = values.size() - 1;
    for (std::size_t i = 0; i < values.size(); ++i) {
      acc += d2[i];
      if (acc >= r && d2[i] > 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(values[chosen]);
  }
  std::sort(centers.begin(), centers.end());
  return centers;
}

LloydRun lloyd(std::span<const double> values, std::vector<double> centers,
               int max_iterations) {
  const std::size_t n = values.size();
  const std::size_t k = centers.size();
  LloydRun run;
  run.membership.assign(n, -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = nearest(centers, values[i]);
      if (c != run.membership[i]) {
        run.membership[i] = c;
        changed = true;
      }
    }
    std::vector<double> sum(k, 0.0);
    std::vector<int> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[static_cast<std::size_t>(run.membership[i])] += values[i];
      ++count[static_cast<std::size_t>(run.membership[i])];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) {
        centers[c] = sum[c] / count[c];
        continue;
      }
      // Empty cluster: take over the point farthest from its own center.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto m = static_cast<std::size_t>(run.membership[i]);
        if (count[m] <= 1) continue;
        const double d = std::abs(values[i] - centers[m]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --count[static_cast<std::size_t>(run.membership[far])];
      run.membership[far] = static_cast<int>(c);
      count[c] = 1;
      centers[c] = values[far];
      changed = true;
    }
    // Keep centers ascending so that index order means value order.
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return centers[a] < centers[b]; });
    std::vector<int> rank(k);
    std::vector<double> sorted(k);
    for (std::size_t r = 0; r < k; ++r) {
      rank[order[r]] = static_cast<int>(r);
      sorted[r] = centers[order[r]];
    }
    centers = sorted;
    for (auto& m : run.membership) m = rank[static_cast<std::size_t>(m)];

    run.trace.push_back(within_ss(values, run.membership, centers));
    run.iterations = it + 1;
    if (!changed) break;
  }
  run.centers = centers;
  run.ss = within_ss(values, run.membership, centers);
  return run;
}

}  // namespace

KMeansResult kmeans_1d(std::span<const double> values, int k, std::uint64_t seed,
                       const KMeansOptions& opts) {
  require(k >= 1, ErrorCode::kInvalidArgument, "k-means needs k >= 1");
  std::set<double> distinct(values.begin(), values.end());
  require(static_cast<std::size_t>(k) <= distinct.size(),
          ErrorCode::kInvalidArgument,
          "k-means: k exceeds the number of distinct values");

  LloydRun best;
  best.ss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(r)};
    std::mt19937_64 rng(seq);
    auto run = lloyd(values, plus_plus_init(values, k, rng), opts.max_iterations);
    if (run.ss < best.ss) best = std::move(run);
  }

  KMeansResult out;
  out.membership = std::move(best.membership);
  out.centers = std::move(best.centers);
  out.within_ss = best.ss;
  out.iterations = best.iterations;
  out.objective_trace = std::move(best.trace);
  return out;
}

double median(std::vector<double> values) {
  require(!values.empty(), ErrorCode::kInvalidArgument, "median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

HurstClustering cluster_regions(std::span<const double> preliminary,
                                const Parcellation& parcellation, int n_clusters,
                                std::uint64_t seed) {
  require(preliminary.size() == parcellation.n_vertices(),
          ErrorCode::kDimensionMismatch,
          "parcellation does not cover the analysed vertices");
  const int r = parcellation.n_regions();
  require(n_clusters >= 1 && n_clusters <= r, ErrorCode::kInvalidArgument,
          "number of Hurst clusters must lie in [1, number of regions]");

  std::vector<std::vector<double>> by_region(static_cast<std::size_t>(r));
  for (std::size_t v = 0; v < preliminary.size(); ++v)
    by_region[static_cast<std::size_t>(parcellation.region_of_vertex[v])].push_back(
        preliminary[v]);

  HurstClustering out;
  out.n_clusters = n_clusters;
  out.preliminary.assign(preliminary.begin(), preliminary.end());
  for (auto& vals : by_region) {
    require(!vals.empty(), ErrorCode::kInvalidArgument, "empty region");
    out.region_medians.push_back(median(vals));
  }
  const auto km = kmeans_1d(out.region_medians, n_clusters, seed);
  out.cluster_of_region = km.membership;
  out.centers = km.centers;
  out.cluster_of_vertex.resize(preliminary.size());
  for (std::size_t v = 0; v < preliminary.size(); ++v)
    out.cluster_of_vertex[v] = out.cluster_of_region[static_cast<std::size_t>(
        parcellation.region_of_vertex[v])];
  return out;
}

HurstClustering build_clustering(const TimeSeriesMatrix& y,
                                 const DesignMatrix& design,
                                 const Parcellation& parcellation, int n_clusters,
                                 std::uint64_t seed, const HurstMapOptions& opts) {
  require(static_cast<std::size_t>(y.rows()) == parcellation.n_vertices(),
          ErrorCode::kDimensionMismatch,
          "parcellation size does not match the number of series");
  const auto prelim = preliminary_hurst_map(y, design, opts);
  return cluster_regions(prelim, parcellation, n_clusters, seed);
}

}  // namespace nsvr
