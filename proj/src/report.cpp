#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nsvr/config.hpp"
#include "nsvr/error.hpp"
#include "nsvr/harness.hpp"

namespace nsvr {

namespace {

using nlohmann::json;

const json& section(const json& doc, const char* name) {
  static const json empty = json::object();
  if (!doc.contains(name)) return empty;
  const json& s = doc.at(name);
  require(s.is_object(), ErrorCode::kParse, std::string("[") + name + "] must be a table");
  return s;
}

template <typename T>
T get(const json& table, const char* key, T fallback, const char* where) {
  if (!table.contains(key)) return fallback;
  try {
    return table.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::kParse, std::string("[") + where + "] " + key + " has the wrong type");
  }
}

std::uint64_t required_seed(const json& table, const char* where) {
  require(table.contains("seed"), ErrorCode::kParse,
          std::string(where) + ".seed is required");
  const json& s = table.at("seed");
  require(s.is_number_integer() && s.get<long long>() >= 0, ErrorCode::kParse,
          std::string(where) + ".seed must be a nonnegative integer");
  return s.get<std::uint64_t>();
}

WaveletFilter parse_filter(const std::string& name) {
  if (name == "db4") return WaveletFilter::kDaubechies4;
  if (name == "haar") return WaveletFilter::kHaar;
  fail(ErrorCode::kParse, "unknown wavelet filter '" + name + "' (use db4 or haar)");
}

}  // namespace

ExperimentConfig experiment_config_from_json(const json& doc) {
  require(doc.is_object(), ErrorCode::kParse, "config must be a table");
  ExperimentConfig cfg;
  auto& sim = cfg.simulation;

  const json& design = section(doc, "design");
  cfg.simulation_seed = required_seed(design, "design");
  const bool null_sim = get<bool>(design, "null", false, "design");
  sim = null_sim ? null_slice_spec() : default_slice_spec();
  if (design.contains("mask_file")) {
    sim.mask = read_mask(design.at("mask_file").get<std::string>(), &sim.width, &sim.height);
  } else {
    sim.width = get<int>(design, "width", sim.width, "design");
    sim.height = get<int>(design, "height", sim.height, "design");
    sim.mask = default_brain_mask(sim.width, sim.height);
  }
  sim.length = get<std::size_t>(design, "length", sim.length, "design");
  sim.tr = get<double>(design, "tr", sim.tr, "design");
  sim.sigma = get<double>(design, "sigma", sim.sigma, "design");
  sim.n_tasks = get<int>(design, "n_tasks", sim.n_tasks, "design");
  sim.background_hurst = get<double>(design, "background_hurst", sim.background_hurst, "design");
  if (design.contains("stimulus_file"))
    sim.blocks = read_stimulus_file(design.at("stimulus_file").get<std::string>());
  else
    sim.blocks = default_block_schedule(sim.length, sim.tr);

  if (doc.contains("sites")) {
    const json& sites = doc.at("sites");
    require(sites.is_array(), ErrorCode::kParse, "[[sites]] must be an array of tables");
    sim.sites.clear();
    for (const auto& s : sites) {
      Site site;
      site.name = get<std::string>(s, "name", "site" + std::to_string(sim.sites.size() + 1),
                                   "sites");
      const auto center = get<std::vector<double>>(s, "center", {}, "sites");
      require(center.size() == 2, ErrorCode::kParse, "[[sites]] center must be [x, y]");
      site.cx = center[0];
      site.cy = center[1];
      site.radius = get<double>(s, "radius", 0.0, "sites");
      site.lambda = get<double>(s, "lambda", 0.0, "sites");
      site.hurst = get<double>(s, "hurst", 0.5, "sites");
      site.magnitude = get<std::vector<double>>(s, "magnitude", {}, "sites");
      if (null_sim) {
        site.hurst = sim.background_hurst;
        std::fill(site.magnitude.begin(), site.magnitude.end(), 0.0);
      }
      sim.sites.push_back(site);
    }
  }
  sim.validate();

  auto& pipe = cfg.pipeline;
  const json& priors = section(doc, "priors");
  pipe.priors.sigma_shape = get<double>(priors, "sigma_shape", 1.0, "priors");
  pipe.priors.sigma_rate = get<double>(priors, "sigma_rate", 1.0, "priors");
  pipe.priors.theta_precision = get<double>(priors, "theta_precision", 0.3, "priors");
  pipe.priors.nuisance_precision = get<double>(priors, "nuisance_precision", 1e-8, "priors");
  pipe.sigma0 = get<double>(priors, "sigma0", 1.0, "priors");
  pipe.rho0 = get<double>(priors, "rho0", 0.0, "priors");
  pipe.alpha = get<int>(priors, "alpha", 2, "priors");

  const json& inf = section(doc, "inference");
  pipe.cluster_seed = required_seed(inf, "inference");
  pipe.n_clusters = get<int>(inf, "n_clusters", 3, "inference");
  pipe.standardize_design = get<bool>(inf, "standardize_design", true, "inference");
  pipe.hurst.min_coeffs = get<std::size_t>(inf, "min_coeffs", 16, "inference");
  pipe.hurst.filter = parse_filter(get<std::string>(inf, "filter", "db4", "inference"));
  pipe.whiten.min_coeffs = pipe.hurst.min_coeffs;
  pipe.whiten.filter = pipe.hurst.filter;
  pipe.whiten.center_response = get<bool>(inf, "center_response", true, "inference");
  pipe.grid.max_evaluations = get<int>(inf, "max_evaluations", 3000, "inference");
  pipe.grid.points_per_dim = get<int>(inf, "points_per_dim", 3, "inference");
  pipe.grid.grid_step = get<double>(inf, "grid_step", 1.5, "inference");
  pipe.grid.max_grid_points = get<int>(inf, "max_grid_points", 729, "inference");
  pipe.grid.ccd_f0 = get<double>(inf, "ccd_f0", 1.1, "inference");
  pipe.grid.prune_log_weight = get<double>(inf, "prune_log_weight", 10.0, "inference");

  const json& exc = section(doc, "excursions");
  pipe.sample_seed = required_seed(exc, "excursions");
  pipe.excursion_alpha = get<double>(exc, "alpha", 0.05, "excursions");
  pipe.n_samples = get<int>(exc, "n_samples", 10000, "excursions");
  pipe.negative = get<bool>(exc, "negative", false, "excursions");
  pipe.extra_alphas = get<std::vector<double>>(exc, "extra_alphas", {}, "excursions");
  for (double a : pipe.extra_alphas)
    require(a > 0.0 && a < 1.0, ErrorCode::kDomain, "excursions.extra_alphas must lie in (0, 1)");
  require(pipe.excursion_alpha > 0.0 && pipe.excursion_alpha < 1.0, ErrorCode::kDomain,
          "excursions.alpha must lie in (0, 1)");
  require(pipe.n_samples >= kMinExcursionSamples, ErrorCode::kDomain,
          "excursions.n_samples must be at least " + std::to_string(kMinExcursionSamples));

  auto& pw = cfg.prewhiten;
  const json& p = section(doc, "prewhiten");
  pw.seed = p.contains("seed") ? required_seed(p, "prewhiten") : cfg.simulation_seed;
  pw.runs = get<int>(p, "runs", pw.runs, "prewhiten");
  pw.length = get<std::size_t>(p, "length", pw.length, "prewhiten");
  pw.beta = get<double>(p, "beta", pw.beta, "prewhiten");
  pw.fgn_hurst = get<double>(p, "hurst", pw.fgn_hurst, "prewhiten");
  pw.ar_coefficients =
      get<std::vector<double>>(p, "ar_coefficients", pw.ar_coefficients, "prewhiten");
  pw.fit_order = get<int>(p, "fit_order", pw.fit_order, "prewhiten");
  pw.block_on = get<double>(p, "block_on", pw.block_on, "prewhiten");
  pw.prewhiten_regressor =
      get<bool>(p, "prewhiten_regressor", pw.prewhiten_regressor, "prewhiten");
  require(is_stationary_ar(pw.ar_coefficients), ErrorCode::kDomain,
          "[prewhiten] ar_coefficients are not stationary");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  json doc = read_toml_file(path);
  // Relative file references are resolved against the configuration's directory.
  if (doc.contains("design") && doc["design"].is_object()) {
    const auto base = std::filesystem::path(path).parent_path();
    for (const char* key : {"mask_file", "stimulus_file"}) {
      auto& d = doc["design"];
      if (!d.contains(key) || !d[key].is_string()) continue;
      const std::filesystem::path p = d[key].get<std::string>();
      if (p.is_relative()) d[key] = (base / p).string();
    }
  }
  return experiment_config_from_json(doc);
}

json experiment_config_json(const ExperimentConfig& cfg) {
  const auto& sim = cfg.simulation;
  const auto& pipe = cfg.pipeline;
  const auto& pw = cfg.prewhiten;
  json sites = json::array();
  for (const auto& s : sim.sites)
    sites.push_back({{"name", s.name},
                     {"center", {s.cx, s.cy}},
                     {"radius", s.radius},
                     {"lambda", s.lambda},
                     {"hurst", s.hurst},
                     {"magnitude", s.magnitude}});
  json blocks = json::array();
  for (const auto& b : sim.blocks)
    blocks.push_back({{"onset", b.onset}, {"duration", b.duration}, {"task", b.task}});
  return {
      {"design",
       {{"seed", cfg.simulation_seed},
        {"width", sim.width},
        {"height", sim.height},
        {"mask_pixels", std::count(sim.mask.begin(), sim.mask.end(), true)},
        {"length", sim.length},
        {"tr", sim.tr},
        {"sigma", sim.sigma},
        {"n_tasks", sim.n_tasks},
        {"background_hurst", sim.background_hurst},
        {"blocks", blocks}}},
      {"sites", sites},
      {"priors",
       {{"sigma_shape", pipe.priors.sigma_shape},
        {"sigma_rate", pipe.priors.sigma_rate},
        {"theta_precision", pipe.priors.theta_precision},
        {"nuisance_precision", pipe.priors.nuisance_precision},
        {"sigma0", pipe.sigma0},
        {"rho0", pipe.rho0},
        {"alpha", pipe.alpha}}},
      {"inference",
       {{"seed", pipe.cluster_seed},
        {"n_clusters", pipe.n_clusters},
        {"standardize_design", pipe.standardize_design},
        {"min_coeffs", pipe.hurst.min_coeffs},
        {"filter", pipe.hurst.filter == WaveletFilter::kHaar ? "haar" : "db4"},
        {"center_response", pipe.whiten.center_response},
        {"max_evaluations", pipe.grid.max_evaluations},
        {"points_per_dim", pipe.grid.points_per_dim},
        {"grid_step", pipe.grid.grid_step},
        {"max_grid_points", pipe.grid.max_grid_points},
        {"ccd_f0", pipe.grid.ccd_f0},
        {"prune_log_weight", pipe.grid.prune_log_weight}}},
      {"excursions",
       {{"seed", pipe.sample_seed},
        {"alpha", pipe.excursion_alpha},
        {"n_samples", pipe.n_samples},
        {"negative", pipe.negative},
        {"extra_alphas", pipe.extra_alphas}}},
      {"prewhiten",
       {{"seed", pw.seed},
        {"runs", pw.runs},
        {"length", pw.length},
        {"beta", pw.beta},
        {"hurst", pw.fgn_hurst},
        {"ar_coefficients", pw.ar_coefficients},
        {"fit_order", pw.fit_order},
        {"block_on", pw.block_on},
        {"prewhiten_regressor", pw.prewhiten_regressor}}}};
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header) {
  require(header.empty() || static_cast<Eigen::Index>(header.size()) == m.cols(),
          ErrorCode::kDimensionMismatch, "CSV header does not match the column count");
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path);
  out.precision(17);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  if (!header.empty()) out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        numeric = numeric && used == cell.size();
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (first && !numeric) {  // header line
      first = false;
      continue;
    }
    first = false;
    require(numeric, ErrorCode::kParse, path + ": non-numeric cell in '" + line + "'");
    require(rows.empty() || row.size() == rows.front().size(), ErrorCode::kParse,
            path + ": rows differ in length");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::kParse, path + ": no data rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

void write_pgm(const std::string& path, const GridMesh& grid, const Eigen::VectorXd& values,
               double lo, double hi) {
  require(values.size() == static_cast<Eigen::Index>(grid.pixel_of_vertex.size()),
          ErrorCode::kDimensionMismatch, "map size does not match the mesh");
  require(hi > lo, ErrorCode::kInvalidArgument, "PGM range must satisfy hi > lo");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::kIo, "cannot write " + path);
  out << "P5\n" << grid.width << ' ' << grid.height << "\n255\n";
  // Image rows run top to bottom; y grows upwards in the grid.
  for (int y = grid.height - 1; y >= 0; --y) {
    for (int x = 0; x < grid.width; ++x) {
      const int v = grid.vertex_of_pixel[static_cast<std::size_t>(y * grid.width + x)];
      unsigned char px = 0;
      if (v >= 0) {
        const double t = std::clamp((values(v) - lo) / (hi - lo), 0.0, 1.0);
        px = static_cast<unsigned char>(1 + std::lround(254.0 * t));
      }
      out.put(static_cast<char>(px));
    }
  }
}

json summary_json(const QuantileSummary& s) {
  return {{"min", s.min}, {"q1", s.q1},   {"median", s.median}, {"mean", s.mean},
          {"q3", s.q3},   {"max", s.max}, {"sd", s.sd},         {"n", s.n}};
}

json prewhiten_report_json(const PrewhitenReport& r) {
  return {{"long_range", {{"ordinary", summary_json(r.ordinary_fgn)},
                          {"ar6_prewhitened", summary_json(r.prewhitened_fgn)}}},
          {"autoregressive", {{"ordinary", summary_json(r.ordinary_ar)},
                              {"ar6_prewhitened", summary_json(r.prewhitened_ar)}}},
          {"redraws", r.redraws},
          {"timing", {{"seconds", r.seconds}}}};
}

json excursion_json(const ExcursionResult& e) {
  return {{"alpha", e.alpha},
          {"sign", e.sign == ExcursionSign::kPositive ? "positive" : "negative"},
          {"included", e.included},
          {"size", e.included.size()},
          {"n_components", e.n_components},
          {"joint_probability", e.joint_probability},
          {"standard_error", e.standard_error},
          {"n_samples", e.n_samples},
          {"warning", e.warning}};
}

json hyper_json(const Hyperparameters& h) {
  return {{"sigma", h.sigma}, {"hurst", h.hurst}, {"theta1", h.theta1}, {"theta2", h.theta2}};
}

json pipeline_report_json(const PipelineResult& r, const SliceData* truth) {
  const auto& s = r.fit.summary;
  json doc;
  doc["hurst"] = {{"estimates", s.posterior_mean.hurst},
                  {"preliminary_centers", r.clustering.centers},
                  {"region_medians", r.clustering.region_medians},
                  {"cluster_of_region", r.clustering.cluster_of_region}};
  doc["hyperparameters"] = {{"posterior_mean", hyper_json(s.posterior_mean)},
                            {"mode", r.fit.grid.mode},
                            {"converged", r.fit.grid.converged},
                            {"evaluations", r.fit.grid.evaluations},
                            {"scheme", r.fit.grid.scheme},
                            {"rho0", r.rho0}};
  json grid = json::array();
  for (std::size_t i = 0; i < s.points.size(); ++i)
    grid.push_back({{"point", hyper_json(s.points[i])},
                    {"weight", s.weights[i]},
                    {"log_marginal_likelihood", s.log_marginal[i]},
                    {"log_posterior", s.log_posterior[i]}});
  doc["grid"] = grid;
  json marg = json::object();
  for (const auto& m : s.marginals) marg[m.name] = {{"values", m.values}, {"mean", m.mean}};
  doc["marginals"] = marg;

  json tasks = json::array();
  for (Eigen::Index k = 0; k < r.beta_mean.cols(); ++k) {
    json t;
    std::vector<double> mean(r.beta_mean.col(k).data(),
                             r.beta_mean.col(k).data() + r.beta_mean.rows());
    std::vector<double> sd(r.beta_sd.col(k).data(), r.beta_sd.col(k).data() + r.beta_sd.rows());
    t["task"] = k + 1;
    t["beta_summary"] = summary_json(summarize(mean));
    t["mean"] = mean;
    t["sd"] = sd;
    t["local_variability_degenerate"] = r.variability[static_cast<std::size_t>(k)].degenerate;
    t["local_variability_max_edge_jump"] =
        r.variability[static_cast<std::size_t>(k)].max_edge_jump;
    if (static_cast<std::size_t>(k) < r.positive.size())
      t["excursions_positive"] = excursion_json(r.positive[static_cast<std::size_t>(k)]);
    if (static_cast<std::size_t>(k) < r.negative.size())
      t["excursions_negative"] = excursion_json(r.negative[static_cast<std::size_t>(k)]);
    json extra = json::array();
    for (const auto& per_alpha : r.extra) extra.push_back(excursion_json(per_alpha[static_cast<std::size_t>(k)]));
    t["excursions_extra"] = extra;

    if (truth != nullptr && static_cast<std::size_t>(k) < r.positive.size()) {
      const auto n = static_cast<std::size_t>(r.beta_mean.rows());
      std::vector<bool> est(n, false), act(n, false);
      for (int v : r.positive[static_cast<std::size_t>(k)].included)
        est[static_cast<std::size_t>(v)] = true;
      for (std::size_t v = 0; v < n; ++v)
        act[v] = truth->beta_true(static_cast<Eigen::Index>(v), k) != 0.0;
      const auto c = compare_activation_maps(est, act);
      t["confusion"] = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn},
                        {"false_positive_rate", c.false_positive_rate()},
                        {"sensitivity", c.sensitivity()}};
      json sites = json::array();
      for (const auto& d : site_detection(est, *truth, static_cast<int>(k)))
        sites.push_back({{"site", d.name},
                         {"center_detected", d.center_detected},
                         {"sensitivity", d.sensitivity},
                         {"false_negatives", d.false_negatives}});
      t["sites"] = sites;
    }
    tasks.push_back(t);
  }
  doc["tasks"] = tasks;
  doc["timing"] = {{"preparation_s", r.seconds.preparation},
                   {"inference_s", r.seconds.inference},
                   {"excursions_s", r.seconds.excursions}};
  return doc;
}

}  // namespace nsvr
