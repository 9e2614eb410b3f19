#pragma once

#include <string>

#include "nsvr/harness.hpp"

namespace nsvr {

// A dataset directory holds
//   y.csv             V x T responses
//   design.csv        T x (1 + K) raw regressors, intercept first
//   mesh.txt          triangular mesh
//   parcellation.txt  vertex -> region
//   mask.txt          optional pixel mask; the mesh is then the grid mesh
//   truth.csv         optional: beta_task1..K, hurst, site per vertex
//   truth.json        optional: site names and centre vertices
struct Dataset {
  SliceData data;  // data.grid.mesh is the analysed mesh
  bool has_grid = false;
  bool has_truth = false;
  std::vector<std::string> site_names;
};

Dataset dataset_from_simulation(const SliceSimSpec& spec, SliceData data);
void save_dataset(const std::string& dir, const Dataset& ds, const SliceSimSpec* spec);
Dataset load_dataset(const std::string& dir);

// Inference without sampling. The fit directory holds results.json,
// beta_mean.csv, beta_sd.csv and clusters.csv.
PipelineResult fit_dataset(const Dataset& ds, const PipelineConfig& config);
void save_fit(const std::string& dir, const PipelineResult& fit, const Dataset& ds);
// Restores the grid, posterior summaries and clustering from a fit directory.
PipelineResult load_fit(const std::string& dir);

// Rebuilds the model, resamples from the saved grid mixture and writes
// activation_task<k>.csv plus excursions.json into `dir`.
PipelineResult run_excursions(const Dataset& ds, const PipelineResult& fit,
                              const PipelineConfig& config, const std::string& dir);

// Confusion counts, per-site detection and alpha sensitivity against the
// truth (when present) plus PGM previews of the maps. Returns the document
// written to <dir>/report.json.
nlohmann::json write_report(const Dataset& ds, const std::string& fit_dir,
                            const std::string& dir);

}  // namespace nsvr
