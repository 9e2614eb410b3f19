#include "nsvr/workflow.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "nsvr/error.hpp"

namespace nsvr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::kIo, "cannot create directory " + dir);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path);
  out << doc.dump(2) << '\n';
}

std::vector<std::string> task_header(Eigen::Index k, const char* prefix) {
  std::vector<std::string> h;
  for (Eigen::Index t = 0; t < k; ++t) h.push_back(prefix + std::to_string(t + 1));
  return h;
}

Hyperparameters hyper_from_json(const json& j) {
  Hyperparameters h;
  h.sigma = j.at("sigma").get<double>();
  h.hurst = j.at("hurst").get<std::vector<double>>();
  h.theta1 = j.at("theta1").get<std::vector<double>>();
  h.theta2 = j.at("theta2").get<std::vector<double>>();
  return h;
}

std::vector<bool> as_mask(const std::vector<int>& included, std::size_t n) {
  std::vector<bool> m(n, false);
  for (int v : included) m.at(static_cast<std::size_t>(v)) = true;
  return m;
}

}  // namespace

Dataset dataset_from_simulation(const SliceSimSpec& spec, SliceData data) {
  Dataset ds;
  ds.data = std::move(data);
  ds.has_grid = true;
  ds.has_truth = true;
  for (const auto& s : spec.sites) ds.site_names.push_back(s.name);
  return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds, const SliceSimSpec* spec) {
  ensure_dir(dir);
  const auto& d = ds.data;
  const Eigen::Index k = d.design.n_tasks();
  write_matrix_csv(join(dir, "y.csv"), d.y, {});
  auto header = task_header(k, "task");
  header.insert(header.begin(), "intercept");
  write_matrix_csv(join(dir, "design.csv"), d.design.columns, header);
  write_mesh(join(dir, "mesh.txt"), d.grid.mesh);
  write_parcellation(join(dir, "parcellation.txt"), d.parcellation);
  if (ds.has_grid) {
    std::vector<bool> mask(d.grid.vertex_of_pixel.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = d.grid.vertex_of_pixel[i] >= 0;
    write_mask(join(dir, "mask.txt"), mask, d.grid.width, d.grid.height);
  }
  if (spec != nullptr) write_stimulus_file(join(dir, "stimulus.txt"), spec->blocks);
  if (ds.has_truth) {
    const Eigen::Index v = d.y.rows();
    Eigen::MatrixXd truth(v, k + 2);
    truth.leftCols(k) = d.beta_true;
    for (Eigen::Index i = 0; i < v; ++i) {
      truth(i, k) = d.hurst_true[static_cast<std::size_t>(i)];
      truth(i, k + 1) = d.site_of_vertex[static_cast<std::size_t>(i)];
    }
    auto th = task_header(k, "beta_task");
    th.push_back("hurst");
    th.push_back("site");
    write_matrix_csv(join(dir, "truth.csv"), truth, th);
    write_json_file(join(dir, "truth.json"),
                    {{"site_names", ds.site_names}, {"center_vertex", d.center_vertex}});
  }
}

Dataset load_dataset(const std::string& dir) {
  require(fs::is_directory(dir), ErrorCode::kIo, "dataset directory " + dir + " not found");
  Dataset ds;
  auto& d = ds.data;
  d.y = read_matrix_csv(join(dir, "y.csv"));
  d.design.columns = read_matrix_csv(join(dir, "design.csv"));
  d.design.has_intercept = true;
  require(d.design.columns.cols() >= 2, ErrorCode::kParse,
          "design.csv needs an intercept and at least one task column");
  require(d.design.rows() == d.y.cols(), ErrorCode::kDimensionMismatch,
          "design rows do not match the time points of y.csv");
  const auto k = static_cast<std::size_t>(d.design.n_tasks());
  d.design.task_center.assign(k, 0.0);
  d.design.task_scale.assign(k, 1.0);

  const TriangularMesh mesh = read_mesh(join(dir, "mesh.txt"));
  if (fs::exists(join(dir, "mask.txt"))) {
    int w = 0, h = 0;
    const auto mask = read_mask(join(dir, "mask.txt"), &w, &h);
    d.grid = make_grid_mesh(mask, w, h);
    require(d.grid.mesh.n_vertices() == mesh.n_vertices(), ErrorCode::kDimensionMismatch,
            "mask.txt and mesh.txt describe different vertex sets");
    ds.has_grid = true;
  } else {
    d.grid = GridMesh{};
    d.grid.mesh = mesh;
  }
  require(static_cast<std::size_t>(d.y.rows()) == d.grid.mesh.n_vertices(),
          ErrorCode::kDimensionMismatch, "y.csv rows do not match the mesh vertices");
  d.parcellation = read_parcellation(join(dir, "parcellation.txt"), d.grid.mesh.n_vertices());

  if (fs::exists(join(dir, "truth.csv"))) {
    const Eigen::MatrixXd truth = read_matrix_csv(join(dir, "truth.csv"));
    require(truth.rows() == d.y.rows() && truth.cols() == static_cast<Eigen::Index>(k) + 2,
            ErrorCode::kDimensionMismatch, "truth.csv has the wrong shape");
    d.beta_true = truth.leftCols(static_cast<Eigen::Index>(k));
    d.hurst_true.resize(static_cast<std::size_t>(truth.rows()));
    d.site_of_vertex.resize(static_cast<std::size_t>(truth.rows()));
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
      d.hurst_true[static_cast<std::size_t>(i)] = truth(i, static_cast<Eigen::Index>(k));
      d.site_of_vertex[static_cast<std::size_t>(i)] =
          static_cast<int>(truth(i, static_cast<Eigen::Index>(k) + 1));
    }
    const json meta = read_json_file(join(dir, "truth.json"));
    ds.site_names = meta.at("site_names").get<std::vector<std::string>>();
    d.center_vertex = meta.at("center_vertex").get<std::vector<int>>();
    ds.has_truth = true;
  }
  return ds;
}

PipelineResult fit_dataset(const Dataset& ds, const PipelineConfig& config) {
  PipelineConfig c = config;
  c.n_samples = 0;
  return run_nsvr_pipeline(ds.data.y, ds.data.design, ds.data.grid.mesh, ds.data.parcellation, c);
}

void save_fit(const std::string& dir, const PipelineResult& fit, const Dataset& ds) {
  ensure_dir(dir);
  json doc = pipeline_report_json(fit, nullptr);
  doc["dataset"] = {{"n_vertices", ds.data.y.rows()},
                    {"n_times", ds.data.y.cols()},
                    {"n_tasks", ds.data.design.n_tasks()}};
  write_json_file(join(dir, "results.json"), doc);
  const auto k = fit.beta_mean.cols();
  write_matrix_csv(join(dir, "beta_mean.csv"), fit.beta_mean, task_header(k, "task"));
  write_matrix_csv(join(dir, "beta_sd.csv"), fit.beta_sd, task_header(k, "task"));
  const auto v = static_cast<Eigen::Index>(fit.clustering.cluster_of_vertex.size());
  Eigen::MatrixXd clusters(v, 2);
  for (Eigen::Index i = 0; i < v; ++i) {
    clusters(i, 0) = fit.clustering.cluster_of_vertex[static_cast<std::size_t>(i)];
    clusters(i, 1) = fit.clustering.preliminary[static_cast<std::size_t>(i)];
  }
  write_matrix_csv(join(dir, "clusters.csv"), clusters, {"cluster", "preliminary_hurst"});
}

PipelineResult load_fit(const std::string& dir) {
  const json doc = read_json_file(join(dir, "results.json"));
  PipelineResult r;
  try {
    auto& s = r.fit.summary;
    for (const auto& g : doc.at("grid")) {
      s.points.push_back(hyper_from_json(g.at("point")));
      s.weights.push_back(g.at("weight").get<double>());
      s.log_marginal.push_back(g.at("log_marginal_likelihood").get<double>());
      s.log_posterior.push_back(g.at("log_posterior").get<double>());
    }
    const auto& hp = doc.at("hyperparameters");
    s.posterior_mean = hyper_from_json(hp.at("posterior_mean"));
    const auto mode = hp.at("mode").get<std::vector<double>>();
    r.fit.grid.mode = Eigen::Map<const Eigen::VectorXd>(mode.data(),
                                                        static_cast<Eigen::Index>(mode.size()));
    r.fit.grid.converged = hp.at("converged").get<bool>();
    r.fit.grid.evaluations = hp.at("evaluations").get<int>();
    r.fit.grid.scheme = hp.at("scheme").get<std::string>();
    r.rho0 = hp.at("rho0").get<double>();
    const auto& hu = doc.at("hurst");
    r.clustering.centers = hu.at("preliminary_centers").get<std::vector<double>>();
    r.clustering.region_medians = hu.at("region_medians").get<std::vector<double>>();
    r.clustering.cluster_of_region = hu.at("cluster_of_region").get<std::vector<int>>();
    r.clustering.n_clusters = static_cast<int>(r.clustering.centers.size());
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, join(dir, "results.json") + ": " + e.what());
  }
  r.beta_mean = read_matrix_csv(join(dir, "beta_mean.csv"));
  r.beta_sd = read_matrix_csv(join(dir, "beta_sd.csv"));
  r.fit.summary.mean = r.beta_mean;
  r.fit.summary.sd = r.beta_sd;
  const Eigen::MatrixXd clusters = read_matrix_csv(join(dir, "clusters.csv"));
  require(clusters.cols() == 2 && clusters.rows() == r.beta_mean.rows(),
          ErrorCode::kDimensionMismatch, "clusters.csv does not match beta_mean.csv");
  for (Eigen::Index i = 0; i < clusters.rows(); ++i) {
    r.clustering.cluster_of_vertex.push_back(static_cast<int>(clusters(i, 0)));
    r.clustering.preliminary.push_back(clusters(i, 1));
  }
  return r;
}

PipelineResult run_excursions(const Dataset& ds, const PipelineResult& fit,
                              const PipelineConfig& config, const std::string& dir) {
  const auto& d = ds.data;
  require(fit.beta_mean.rows() == d.y.rows(), ErrorCode::kDimensionMismatch,
          "fit and dataset differ in vertex count");
  require(!fit.fit.summary.points.empty(), ErrorCode::kInvalidArgument, "fit has no grid points");
  PipelineConfig c = config;
  c.n_clusters = fit.clustering.n_clusters;  // as fitted
  auto prepared = prepare_nsvr_model(d.y, d.design, d.grid.mesh, d.parcellation, c);
  require(prepared.clustering.cluster_of_vertex == fit.clustering.cluster_of_vertex,
          ErrorCode::kInvalidArgument,
          "the configuration does not reproduce the clustering stored with the fit");
  PipelineResult out = fit;
  run_excursion_stage(*prepared.engine, fit.fit.summary.points, fit.fit.summary.weights,
                      d.grid.mesh, c, out);
  require(!out.positive.empty(), ErrorCode::kInvalidArgument, "n_samples must be positive");

  ensure_dir(dir);
  const auto n = static_cast<std::size_t>(d.y.rows());
  json tasks = json::array();
  for (std::size_t t = 0; t < out.positive.size(); ++t) {
    const ExcursionResult* neg = out.negative.empty() ? nullptr : &out.negative[t];
    const auto labels = activation_labels(n, out.positive[t], neg);
    const std::string name = "activation_task" + std::to_string(t + 1) + ".csv";
    write_activation_map(join(dir, name.c_str()), labels, out.positive[t], neg);
    json j = {{"task", t + 1}, {"positive", excursion_json(out.positive[t])}};
    if (neg != nullptr) j["negative"] = excursion_json(*neg);
    json extra = json::array();
    for (const auto& per_alpha : out.extra) extra.push_back(excursion_json(per_alpha[t]));
    j["extra"] = extra;
    tasks.push_back(j);
  }
  write_json_file(join(dir, "excursions.json"),
                  {{"seed", config.sample_seed}, {"tasks", tasks},
                   {"timing", {{"seconds", out.seconds.excursions}}}});
  return out;
}

json write_report(const Dataset& ds, const std::string& fit_dir, const std::string& dir) {
  ensure_dir(dir);
  const auto& d = ds.data;
  const PipelineResult fit = load_fit(fit_dir);
  require(fit.beta_mean.rows() == d.y.rows(), ErrorCode::kDimensionMismatch,
          "fit and dataset differ in vertex count");
  const auto n = static_cast<std::size_t>(d.y.rows());
  const Eigen::Index k = fit.beta_mean.cols();

  json doc;
  doc["hurst"] = {{"estimates", fit.fit.summary.posterior_mean.hurst},
                  {"preliminary_centers", fit.clustering.centers}};
  if (ds.has_truth) {
    std::vector<double> levels = d.hurst_true;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    doc["hurst"]["true_levels"] = levels;
  }

  json exc;
  const std::string exc_path = join(fit_dir, "excursions.json");
  if (fs::exists(exc_path)) exc = read_json_file(exc_path);

  json tasks = json::array();
  for (Eigen::Index t = 0; t < k; ++t) {
    json j;
    j["task"] = t + 1;
    std::vector<double> mean(fit.beta_mean.col(t).data(),
                             fit.beta_mean.col(t).data() + fit.beta_mean.rows());
    j["beta_mean_summary"] = summary_json(summarize(mean));
    std::vector<bool> est;
    if (!exc.is_null()) {
      const auto& e = exc.at("tasks").at(static_cast<std::size_t>(t));
      const auto& pos = e.at("positive");
      const auto included = pos.at("included").get<std::vector<int>>();
      est = as_mask(included, n);
      j["excursion"] = {{"alpha", pos.at("alpha")},
                        {"size", included.size()},
                        {"n_components", pos.at("n_components")},
                        {"joint_probability", pos.at("joint_probability")},
                        {"standard_error", pos.at("standard_error")},
                        {"warning", pos.at("warning")}};
      json sens = json::array();
      for (const auto& x : e.at("extra"))
        sens.push_back({{"alpha", x.at("alpha")},
                        {"size", x.at("size")},
                        {"symmetric_difference_ratio",
                         symmetric_difference_ratio(included,
                                                    x.at("included").get<std::vector<int>>())}});
      j["alpha_sensitivity"] = sens;
    }
    if (ds.has_truth && !est.empty()) {
      std::vector<bool> act(n);
      for (std::size_t v = 0; v < n; ++v) act[v] = d.beta_true(static_cast<Eigen::Index>(v), t) != 0.0;
      const auto c = compare_activation_maps(est, act);
      j["confusion"] = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn},
                        {"false_positive_rate", c.false_positive_rate()},
                        {"sensitivity", c.sensitivity()}};
      json sites = json::array();
      const auto det = site_detection(est, d, static_cast<int>(t));
      for (std::size_t s = 0; s < det.size(); ++s)
        sites.push_back({{"site", s < ds.site_names.size() ? ds.site_names[s] : det[s].name},
                         {"center_detected", det[s].center_detected},
                         {"sensitivity", det[s].sensitivity},
                         {"false_negatives", det[s].false_negatives}});
      j["sites"] = sites;

      if (ds.has_grid) {
        // 0 true negative, 1 true positive, 2 false positive, 3 false negative.
        Eigen::VectorXd err(static_cast<Eigen::Index>(n));
        for (std::size_t v = 0; v < n; ++v)
          err(static_cast<Eigen::Index>(v)) = act[v] ? (est[v] ? 1 : 3) : (est[v] ? 2 : 0);
        write_pgm(join(dir, ("errors_task" + std::to_string(t + 1) + ".pgm").c_str()), d.grid,
                  err, 0.0, 3.0);
      }
    }
    if (ds.has_grid) {
      const Eigen::VectorXd m = fit.beta_mean.col(t);
      const double hi = std::max(m.maxCoeff(), 1e-12), lo = std::min(m.minCoeff(), 0.0);
      write_pgm(join(dir, ("beta_mean_task" + std::to_string(t + 1) + ".pgm").c_str()), d.grid,
                m, lo, hi);
      if (!est.empty()) {
        Eigen::VectorXd a(static_cast<Eigen::Index>(n));
        for (std::size_t v = 0; v < n; ++v) a(static_cast<Eigen::Index>(v)) = est[v] ? 1.0 : 0.0;
        write_pgm(join(dir, ("activation_task" + std::to_string(t + 1) + ".pgm").c_str()),
                  d.grid, a, 0.0, 1.0);
      }
    }
    tasks.push_back(j);
  }
  doc["tasks"] = tasks;
  if (ds.has_grid) {
    Eigen::VectorXd h(static_cast<Eigen::Index>(n));
    for (std::size_t v = 0; v < n; ++v)
      h(static_cast<Eigen::Index>(v)) =
          fit.fit.summary.posterior_mean.hurst.at(
              static_cast<std::size_t>(fit.clustering.cluster_of_vertex[v]));
    write_pgm(join(dir, "hurst.pgm"), d.grid, h, 0.0, 1.0);
  }
  write_json_file(join(dir, "report.json"), doc);
  return doc;
}

}  // namespace nsvr
