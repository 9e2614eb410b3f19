#include <algorithm>
#include <chrono>
#include <cmath>
#include <iterator>
#include <limits>

#include "nsvr/error.hpp"
#include "nsvr/harness.hpp"

namespace nsvr {

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

PreparedModel prepare_nsvr_model(const TimeSeriesMatrix& y, const DesignMatrix& design,
                                 const TriangularMesh& mesh, const Parcellation& parcellation,
                                 const PipelineConfig& config) {
  require(static_cast<std::size_t>(y.rows()) == mesh.n_vertices(),
          ErrorCode::kDimensionMismatch, "data rows do not match the mesh vertices");
  PreparedModel out;
  out.design = config.standardize_design ? standardize_columns(design) : design;
  const DesignMatrix& x = out.design;
  const auto k = static_cast<int>(x.n_tasks());

  // Temporal dependence classes.
  out.clustering = build_clustering(y, x, parcellation, config.n_clusters,
                                    config.cluster_seed, config.hurst);

  // Local variability of the preliminary activation estimates.
  const OlsSolver ols(x);
  Eigen::MatrixXd beta_hat(y.rows(), k);
  std::vector<double> resid_sd(static_cast<std::size_t>(y.rows()));
  for (Eigen::Index v = 0; v < y.rows(); ++v) {
    const auto fit = ols.fit(y.row(v).transpose());
    beta_hat.row(v) = fit.beta.tail(k).transpose();
    resid_sd[static_cast<std::size_t>(v)] = std::sqrt(
        fit.residuals.squaredNorm() / static_cast<double>(y.cols() - x.columns.cols()));
  }
  for (int t = 0; t < k; ++t) out.variability.push_back(local_variability(beta_hat.col(t), mesh));

  ModelSpec model;
  model.n_tasks = k;
  model.n_clusters = config.n_clusters;
  model.cluster_of_vertex = out.clustering.cluster_of_vertex;
  model.fem = assemble_fem(mesh);
  model.alpha = config.alpha;
  model.sigma0 = config.sigma0;
  out.rho0 = config.rho0 > 0.0 ? config.rho0 : 5.0 * mesh.median_edge_length();
  model.rho0 = out.rho0;
  for (const auto& lv : out.variability) model.delta.push_back(lv.standardized);
  model.priors = config.priors;
  out.engine = std::make_unique<PosteriorEngine>(std::move(model),
                                                 level_statistics(whiten_data(y, x, config.whiten)));

  out.start.sigma = median(resid_sd);
  for (double c : out.clustering.centers) out.start.hurst.push_back(std::clamp(c, 0.05, 0.95));
  out.start.theta1.assign(static_cast<std::size_t>(k), 0.0);
  out.start.theta2.assign(static_cast<std::size_t>(k), 0.0);
  return out;
}

void run_excursion_stage(PosteriorEngine& engine, const std::vector<Hyperparameters>& points,
                         const std::vector<double>& weights, const TriangularMesh& mesh,
                         const PipelineConfig& config, PipelineResult& result) {
  result.positive.clear();
  result.negative.clear();
  result.extra.clear();
  if (config.n_samples <= 0) return;
  const int k = engine.model().n_tasks;
  const auto samples =
      sample_posterior_field(engine, points, weights, config.n_samples, config.sample_seed);
  const auto adj = mesh.adjacency();
  for (int t = 0; t < k; ++t) {
    const auto& s = samples.task[static_cast<std::size_t>(t)];
    result.positive.push_back(
        excursion_set(s, config.excursion_alpha, ExcursionSign::kPositive, adj));
    if (config.negative)
      result.negative.push_back(
          excursion_set(s, config.excursion_alpha, ExcursionSign::kNegative, adj));
  }
  for (double a : config.extra_alphas) {
    std::vector<ExcursionResult> per_task;
    for (int t = 0; t < k; ++t)
      per_task.push_back(excursion_set(samples.task[static_cast<std::size_t>(t)], a,
                                       ExcursionSign::kPositive, adj));
    result.extra.push_back(std::move(per_task));
  }
}

PipelineResult run_nsvr_pipeline(const TimeSeriesMatrix& y, const DesignMatrix& design,
                                 const TriangularMesh& mesh, const Parcellation& parcellation,
                                 const PipelineConfig& config) {
  PipelineResult out;
  Stopwatch clock;
  auto prepared = prepare_nsvr_model(y, design, mesh, parcellation, config);
  out.clustering = std::move(prepared.clustering);
  out.variability = std::move(prepared.variability);
  out.rho0 = prepared.rho0;
  out.seconds.preparation = clock.lap();

  out.fit = fit_posterior(*prepared.engine, prepared.start, config.grid);
  out.beta_mean = out.fit.summary.mean;
  out.beta_sd = out.fit.summary.sd;
  for (Eigen::Index t = 0; t < out.beta_mean.cols(); ++t) {
    const double scale = prepared.design.task_scale[static_cast<std::size_t>(t)];
    out.beta_mean.col(t) /= scale;
    out.beta_sd.col(t) /= scale;
  }
  out.seconds.inference = clock.lap();

  run_excursion_stage(*prepared.engine, out.fit.summary.points, out.fit.summary.weights, mesh,
                      config, out);
  out.seconds.excursions = clock.lap();
  return out;
}

double ConfusionCounts::false_positive_rate() const {
  return fp + tn == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(fp + tn);
}

double ConfusionCounts::sensitivity() const {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

ConfusionCounts compare_activation_maps(const std::vector<bool>& estimated,
                                        const std::vector<bool>& truth) {
  require(estimated.size() == truth.size(), ErrorCode::kDimensionMismatch,
          "activation maps differ in size");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i])
      estimated[i] ? ++c.tp : ++c.fn;
    else
      estimated[i] ? ++c.fp : ++c.tn;
  }
  return c;
}

std::vector<SiteDetection> site_detection(const std::vector<bool>& estimated,
                                          const SliceData& data, int task) {
  require(estimated.size() == data.site_of_vertex.size(), ErrorCode::kDimensionMismatch,
          "activation map does not match the simulation");
  std::vector<SiteDetection> out(data.center_vertex.size());
  std::vector<std::size_t> active(out.size(), 0), hit(out.size(), 0);
  for (std::size_t v = 0; v < estimated.size(); ++v) {
    const int s = data.site_of_vertex[v];
    if (s < 0 || data.beta_true(static_cast<Eigen::Index>(v), task) == 0.0) continue;
    ++active[static_cast<std::size_t>(s)];
    if (estimated[v]) ++hit[static_cast<std::size_t>(s)];
  }
  for (std::size_t s = 0; s < out.size(); ++s) {
    out[s].name = "site" + std::to_string(s + 1);
    out[s].center_detected = estimated[static_cast<std::size_t>(data.center_vertex[s])];
    out[s].sensitivity =
        active[s] == 0 ? 0.0 : static_cast<double>(hit[s]) / static_cast<double>(active[s]);
    out[s].false_negatives = active[s] - hit[s];
  }
  return out;
}

double symmetric_difference_ratio(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> sa = a, sb = b, diff;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::set_symmetric_difference(sa.begin(), sa.end(), sb.begin(), sb.end(),
                                std::back_inserter(diff));
  if (sa.empty()) return diff.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  return static_cast<double>(diff.size()) / static_cast<double>(sa.size());
}

}  // namespace nsvr
