#include "nsvr/nsvr.h"

#include <cstring>
#include <new>
#include <string>

#include "nsvr/config.hpp"
#include "nsvr/error.hpp"
#include "nsvr/harness.hpp"
#include "nsvr/workflow.hpp"

struct nsvr_config {
  nsvr::ExperimentConfig value;
};

struct nsvr_dataset {
  nsvr::Dataset value;
  nsvr::SliceSimSpec spec;
  bool simulated = false;
};

struct nsvr_fit {
  nsvr::PipelineResult value;
};

namespace {

thread_local std::string last_error;

template <typename F>
nsvr_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return NSVR_OK;
  } catch (const nsvr::Error& e) {
    last_error = e.what();
    return static_cast<nsvr_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return NSVR_ERR_OUT_OF_MEMORY;
  } catch (const std::exception& e) {
    last_error = e.what();
    return NSVR_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return NSVR_ERR_INTERNAL;
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* nsvr_version(void) { return "0.1.0"; }

const char* nsvr_status_string(nsvr_status status) {
  switch (status) {
    case NSVR_OK: return "ok";
    case NSVR_ERR_INVALID_ARGUMENT: return "invalid argument";
    case NSVR_ERR_DOMAIN: return "domain error";
    case NSVR_ERR_NOT_POSITIVE_DEFINITE: return "matrix not positive definite";
    case NSVR_ERR_RANK_DEFICIENT: return "rank-deficient design";
    case NSVR_ERR_IO: return "i/o error";
    case NSVR_ERR_PARSE: return "parse error";
    case NSVR_ERR_NOT_CONVERGED: return "not converged";
    case NSVR_ERR_OVERFLOW: return "numerical overflow";
    case NSVR_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case NSVR_ERR_NULL_POINTER: return "null pointer";
    case NSVR_ERR_OUT_OF_MEMORY: return "out of memory";
    case NSVR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* nsvr_last_error(void) { return last_error.c_str(); }

nsvr_status nsvr_config_load(const char* path, nsvr_config** out) {
  if (path == nullptr || out == nullptr) return NSVR_ERR_NULL_POINTER;
  *out = nullptr;
  return guarded([&] { *out = new nsvr_config{nsvr::load_experiment_config(path)}; });
}

nsvr_status nsvr_config_parse(const char* toml_text, nsvr_config** out) {
  if (toml_text == nullptr || out == nullptr) return NSVR_ERR_NULL_POINTER;
  *out = nullptr;
  return guarded([&] {
    *out = new nsvr_config{
        nsvr::experiment_config_from_json(nsvr::parse_toml(toml_text, "<string>"))};
  });
}

void nsvr_config_free(nsvr_config* config) { delete config; }

nsvr_status nsvr_config_set_prewhiten_runs(nsvr_config* config, int runs) {
  if (config == nullptr) return NSVR_ERR_NULL_POINTER;
  return guarded([&] {
    nsvr::require(runs >= 1, nsvr::ErrorCode::kInvalidArgument, "runs must be >= 1");
    config->value.prewhiten.runs = runs;
  });
}

nsvr_status nsvr_config_set_samples(nsvr_config* config, int n_samples) {
  if (config == nullptr) return NSVR_ERR_NULL_POINTER;
  return guarded([&] {
    nsvr::require(n_samples >= nsvr::kMinExcursionSamples, nsvr::ErrorCode::kInvalidArgument,
                  "n_samples must be >= " + std::to_string(nsvr::kMinExcursionSamples));
    config->value.pipeline.n_samples = n_samples;
  });
}

nsvr_status nsvr_config_set_clusters(nsvr_config* config, int n_clusters) {
  if (config == nullptr) return NSVR_ERR_NULL_POINTER;
  return guarded([&] {
    nsvr::require(n_clusters >= 1, nsvr::ErrorCode::kInvalidArgument,
                  "cluster count must be >= 1");
    config->value.pipeline.n_clusters = n_clusters;
  });
}

nsvr_status nsvr_config_to_json(const nsvr_config* config, char** out) {
  if (config == nullptr || out == nullptr) return NSVR_ERR_NULL_POINTER;
  *out = nullptr;
  return guarded(
      [&] { *out = copy_string(nsvr::experiment_config_json(config->value).dump(2)); });
}

nsvr_status nsvr_prewhiten_bench(const nsvr_config* config, const char* path, char** json_out) {
  if (config == nullptr) return NSVR_ERR_NULL_POINTER;
  if (json_out != nullptr) *json_out = nullptr;
  return guarded([&] {
    const auto report = nsvr::run_prewhitening_experiment(config->value.prewhiten);
    const std::string text = nsvr::prewhiten_report_json(report).dump(2);
    if (path != nullptr) {
      std::FILE* f = std::fopen(path, "w");
      nsvr::require(f != nullptr, nsvr::ErrorCode::kIo, std::string("cannot write ") + path);
      std::fputs(text.c_str(), f);
      std::fputc('\n', f);
      std::fclose(f);
    }
    if (json_out != nullptr) *json_out = copy_string(text);
  });
}

nsvr_status nsvr_simulate_slice(const nsvr_config* config, nsvr_dataset** out) {
  if (config == nullptr || out == nullptr) return NSVR_ERR_NULL_POINTER;
  *out = nullptr;
  return guarded([&] {
    const auto& c = config->value;
    auto data = nsvr::generate_slice_simulation(c.simulation, c.simulation_seed);
    *out = new nsvr_dataset{nsvr::dataset_from_simulation(c.simulation, std::move(data)),
                            c.simulation, true};
  });
}

nsvr_status nsvr_dataset_save(const nsvr_dataset* dataset, const nsvr_config* config,
                              const char* dir) {
  if (dataset == nullptr || dir == nullptr) return NSVR_ERR_NULL_POINTER;
  return guarded([&] {
    const nsvr::SliceSimSpec* spec = nullptr;
    if (config != nullptr)
      spec = &config->value.simulation;
    else if (dataset->simulated)
      spec = &dataset->spec;
    nsvr::save_dataset(dir, dataset->value, spec);
  });
}

nsvr_status nsvr_dataset_load(const char* dir, nsvr_dataset** out) {
  if (dir == nullptr || out == nullptr) return NSVR_ERR_NULL_POINTER;
  *out = nullptr;
  return guarded([&] { *out = new nsvr_dataset{nsvr::load_dataset(dir), {}, false}; });
}

nsvr_status nsvr_dataset_dims(const nsvr_dataset* dataset, size_t* n_vertices, size_t* n_times,
                              size_t* n_tasks) {
  if (dataset == nullptr) return NSVR_ERR_NULL_POINTER;
  const auto& d = dataset->value.data;
  if (n_vertices != nullptr) *n_vertices = static_cast<size_t>(d.y.rows());
  if (n_times != nullptr) *n_times = static_cast<size_t>(d.y.cols());
  if (n_tasks != nullptr) *n_tasks = static_cast<size_t>(d.design.n_tasks());
  return NSVR_OK;
}

void nsvr_dataset_free(nsvr_dataset* dataset) { delete dataset; }

nsvr_status nsvr_fit_run(const nsvr_config* config, const nsvr_dataset* dataset,
                         nsvr_fit** out) {
  if (config == nullptr || dataset == nullptr || out == nullptr) return NSVR_ERR_NULL_POINTER;
  *out = nullptr;
  return guarded([&] {
    *out = new nsvr_fit{nsvr::fit_dataset(dataset->value, config->value.pipeline)};
  });
}

nsvr_status nsvr_fit_save(const nsvr_fit* fit, const nsvr_dataset* dataset, const char* dir) {
  if (fit == nullptr || dataset == nullptr || dir == nullptr) return NSVR_ERR_NULL_POINTER;
  return guarded([&] { nsvr::save_fit(dir, fit->value, dataset->value); });
}

nsvr_status nsvr_fit_load(const char* dir, nsvr_fit** out) {
  if (dir == nullptr || out == nullptr) return NSVR_ERR_NULL_POINTER;
  *out = nullptr;
  return guarded([&] { *out = new nsvr_fit{nsvr::load_fit(dir)}; });
}

void nsvr_fit_free(nsvr_fit* fit) { delete fit; }

nsvr_status nsvr_fit_hurst(const nsvr_fit* fit, double* values, size_t capacity,
                           size_t* count) {
  if (fit == nullptr) return NSVR_ERR_NULL_POINTER;
  const auto& h = fit->value.fit.summary.posterior_mean.hurst;
  if (count != nullptr) *count = h.size();
  if (values != nullptr)
    for (size_t i = 0; i < h.size() && i < capacity; ++i) values[i] = h[i];
  return NSVR_OK;
}

nsvr_status nsvr_fit_beta(const nsvr_fit* fit, int task, double* mean, double* sd,
                          size_t capacity) {
  if (fit == nullptr) return NSVR_ERR_NULL_POINTER;
  return guarded([&] {
    const auto& r = fit->value;
    nsvr::require(task >= 1 && task <= r.beta_mean.cols(), nsvr::ErrorCode::kInvalidArgument,
                  "task index out of range");
    nsvr::require(capacity >= static_cast<size_t>(r.beta_mean.rows()),
                  nsvr::ErrorCode::kDimensionMismatch, "output buffer too small");
    for (Eigen::Index v = 0; v < r.beta_mean.rows(); ++v) {
      if (mean != nullptr) mean[v] = r.beta_mean(v, task - 1);
      if (sd != nullptr) sd[v] = r.beta_sd(v, task - 1);
    }
  });
}

nsvr_status nsvr_excursions_run(const nsvr_config* config, const nsvr_dataset* dataset,
                                const nsvr_fit* fit, const char* dir, size_t* active_counts,
                                size_t capacity) {
  if (config == nullptr || dataset == nullptr || fit == nullptr || dir == nullptr)
    return NSVR_ERR_NULL_POINTER;
  return guarded([&] {
    const auto r =
        nsvr::run_excursions(dataset->value, fit->value, config->value.pipeline, dir);
    if (active_counts != nullptr)
      for (size_t t = 0; t < r.positive.size() && t < capacity; ++t)
        active_counts[t] = r.positive[t].included.size();
  });
}

nsvr_status nsvr_report_write(const nsvr_dataset* dataset, const char* fit_dir, const char* dir,
                              char** json_out) {
  if (dataset == nullptr || fit_dir == nullptr || dir == nullptr) return NSVR_ERR_NULL_POINTER;
  if (json_out != nullptr) *json_out = nullptr;
  return guarded([&] {
    const auto doc = nsvr::write_report(dataset->value, fit_dir, dir);
    if (json_out != nullptr) *json_out = copy_string(doc.dump(2));
  });
}

void nsvr_string_free(char* s) { delete[] s; }

}  // extern "C"
