#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nsvr/nsvr.h"

namespace {

int report_failure(nsvr_status st, const char* step) {
  std::fprintf(stderr, "nsvr: %s failed: %s (%s)\n", step, nsvr_last_error(),
               nsvr_status_string(st));
  return 1;
}

// Owning wrappers over the C handles.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};

using Config = Handle<nsvr_config, nsvr_config_free>;
using Dataset = Handle<nsvr_dataset, nsvr_dataset_free>;
using Fit = Handle<nsvr_fit, nsvr_fit_free>;

void print_and_free(char* text) {
  if (text == nullptr) return;
  std::printf("%s\n", text);
  nsvr_string_free(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet-domain Bayesian GLM with non-stationary spatial priors"};
  app.set_version_flag("--version", std::string(nsvr_version()));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, data_dir, fit_dir, out_path;
  int runs = 0, samples = 0, clusters = 0;
  bool quiet = false;

  auto* sim = app.add_subcommand("simulate-slice", "Generate the brain-slice simulation");
  sim->add_option("-c,--config", config_path, "TOML configuration")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--out", out_path, "Dataset directory to write")->required();

  auto* bench = app.add_subcommand("prewhiten-bench", "AR(6) prewhitening bias experiment");
  bench->add_option("-c,--config", config_path, "TOML configuration")->required()->check(CLI::ExistingFile);
  bench->add_option("-o,--out", out_path, "JSON report path");
  bench->add_option("--runs", runs, "Override the number of runs")->check(CLI::PositiveNumber);

  auto* fit = app.add_subcommand("fit", "Posterior inference on a dataset directory");
  fit->add_option("-c,--config", config_path, "TOML configuration")->required()->check(CLI::ExistingFile);
  fit->add_option("-d,--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  fit->add_option("-o,--out", out_path, "Fit directory to write")->required();
  fit->add_option("--clusters", clusters, "Override the number of Hurst clusters")->check(CLI::PositiveNumber);

  auto* exc = app.add_subcommand("excursions", "Excursion sets from a saved fit");
  exc->add_option("-c,--config", config_path, "TOML configuration")->required()->check(CLI::ExistingFile);
  exc->add_option("-d,--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  exc->add_option("-f,--fit", fit_dir, "Fit directory")->required()->check(CLI::ExistingDirectory);
  exc->add_option("-o,--out", out_path, "Output directory (default: the fit directory)");
  exc->add_option("--samples", samples, "Override the Monte-Carlo sample count");

  auto* rep = app.add_subcommand("report", "Metrics against the truth and map previews");
  rep->add_option("-d,--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  rep->add_option("-f,--fit", fit_dir, "Fit directory (with excursions.json)")->required()->check(CLI::ExistingDirectory);
  rep->add_option("-o,--out", out_path, "Report directory")->required();

  app.add_flag("-q,--quiet", quiet, "Do not print JSON to stdout");

  CLI11_PARSE(app, argc, argv);

  Config cfg;
  nsvr_status st = NSVR_OK;
  if (!config_path.empty()) {
    st = nsvr_config_load(config_path.c_str(), &cfg.p);
    if (st != NSVR_OK) return report_failure(st, "loading the configuration");
    if (runs > 0 && (st = nsvr_config_set_prewhiten_runs(cfg.p, runs)) != NSVR_OK)
      return report_failure(st, "--runs");
    if (samples > 0 && (st = nsvr_config_set_samples(cfg.p, samples)) != NSVR_OK)
      return report_failure(st, "--samples");
    if (clusters > 0 && (st = nsvr_config_set_clusters(cfg.p, clusters)) != NSVR_OK)
      return report_failure(st, "--clusters");
  }

  if (sim->parsed()) {
    Dataset ds;
    if ((st = nsvr_simulate_slice(cfg.p, &ds.p)) != NSVR_OK) return report_failure(st, "simulation");
    if ((st = nsvr_dataset_save(ds.p, cfg.p, out_path.c_str())) != NSVR_OK)
      return report_failure(st, "writing the dataset");
    size_t v = 0, t = 0, k = 0;
    nsvr_dataset_dims(ds.p, &v, &t, &k);
    std::printf("wrote %s: %zu vertices, %zu time points, %zu tasks\n", out_path.c_str(), v, t, k);
    return 0;
  }

  if (bench->parsed()) {
    char* text = nullptr;
    st = nsvr_prewhiten_bench(cfg.p, out_path.empty() ? nullptr : out_path.c_str(),
                              quiet ? nullptr : &text);
    if (st != NSVR_OK) return report_failure(st, "prewhitening experiment");
    print_and_free(text);
    return 0;
  }

  if (fit->parsed()) {
    Dataset ds;
    Fit f;
    if ((st = nsvr_dataset_load(data_dir.c_str(), &ds.p)) != NSVR_OK)
      return report_failure(st, "reading the dataset");
    if ((st = nsvr_fit_run(cfg.p, ds.p, &f.p)) != NSVR_OK) return report_failure(st, "inference");
    if ((st = nsvr_fit_save(f.p, ds.p, out_path.c_str())) != NSVR_OK)
      return report_failure(st, "writing the fit");
    size_t n = 0;
    nsvr_fit_hurst(f.p, nullptr, 0, &n);
    std::vector<double> h(n);
    nsvr_fit_hurst(f.p, h.data(), h.size(), &n);
    std::printf("wrote %s; Hurst estimates:", out_path.c_str());
    for (double x : h) std::printf(" %.3f", x);
    std::printf("\n");
    return 0;
  }

  if (exc->parsed()) {
    Dataset ds;
    Fit f;
    if ((st = nsvr_dataset_load(data_dir.c_str(), &ds.p)) != NSVR_OK)
      return report_failure(st, "reading the dataset");
    if ((st = nsvr_fit_load(fit_dir.c_str(), &f.p)) != NSVR_OK)
      return report_failure(st, "reading the fit");
    size_t k = 0;
    nsvr_dataset_dims(ds.p, nullptr, nullptr, &k);
    std::vector<size_t> counts(k, 0);
    const std::string dir = out_path.empty() ? fit_dir : out_path;
    if ((st = nsvr_excursions_run(cfg.p, ds.p, f.p, dir.c_str(), counts.data(), counts.size())) !=
        NSVR_OK)
      return report_failure(st, "excursion sets");
    for (size_t t = 0; t < k; ++t)
      std::printf("task %zu: %zu active vertices\n", t + 1, counts[t]);
    return 0;
  }

  if (rep->parsed()) {
    Dataset ds;
    if ((st = nsvr_dataset_load(data_dir.c_str(), &ds.p)) != NSVR_OK)
      return report_failure(st, "reading the dataset");
    char* text = nullptr;
    st = nsvr_report_write(ds.p, fit_dir.c_str(), out_path.c_str(), quiet ? nullptr : &text);
    if (st != NSVR_OK) return report_failure(st, "report");
    print_and_free(text);
    return 0;
  }
  return 0;
}
