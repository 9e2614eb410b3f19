#include "nsvr/nsvr.h"

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

const std::string kSmall = std::string(NSVR_TEST_DATA) + "/small.toml";

TEST(CApi, VersionAndStatusStrings) {
  EXPECT_STREQ(nsvr_version(), "0.1.0");
  EXPECT_STREQ(nsvr_status_string(NSVR_OK), "ok");
  EXPECT_STREQ(nsvr_status_string(NSVR_ERR_PARSE), "parse error");
  EXPECT_STREQ(nsvr_status_string(static_cast<nsvr_status>(99)), "unknown status");
}

TEST(CApi, NullPointersRejected) {
  nsvr_config* cfg = nullptr;
  EXPECT_EQ(nsvr_config_load(nullptr, &cfg), NSVR_ERR_NULL_POINTER);
  EXPECT_EQ(nsvr_config_load(kSmall.c_str(), nullptr), NSVR_ERR_NULL_POINTER);
  EXPECT_EQ(nsvr_fit_hurst(nullptr, nullptr, 0, nullptr), NSVR_ERR_NULL_POINTER);
  EXPECT_EQ(nsvr_dataset_dims(nullptr, nullptr, nullptr, nullptr), NSVR_ERR_NULL_POINTER);
  nsvr_config_free(nullptr);
  nsvr_dataset_free(nullptr);
  nsvr_fit_free(nullptr);
  nsvr_string_free(nullptr);
}

TEST(CApi, ParseErrorsReportMessage) {
  nsvr_config* cfg = nullptr;
  EXPECT_EQ(nsvr_config_parse("[design\n", &cfg), NSVR_ERR_PARSE);
  EXPECT_EQ(cfg, nullptr);
  EXPECT_GT(std::strlen(nsvr_last_error()), 0u);
  EXPECT_EQ(nsvr_config_parse("[design]\nseed = 1\n", &cfg), NSVR_ERR_PARSE);
  EXPECT_NE(std::string(nsvr_last_error()).find("seed"), std::string::npos);
  EXPECT_EQ(nsvr_config_load("/nonexistent.toml", &cfg), NSVR_ERR_IO);
}

TEST(CApi, ConfigOverridesAndJson) {
  nsvr_config* cfg = nullptr;
  ASSERT_EQ(nsvr_config_load(kSmall.c_str(), &cfg), NSVR_OK) << nsvr_last_error();
  EXPECT_STREQ(nsvr_last_error(), "");
  EXPECT_EQ(nsvr_config_set_samples(cfg, 10), NSVR_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(nsvr_config_set_samples(cfg, 3000), NSVR_OK);
  EXPECT_EQ(nsvr_config_set_clusters(cfg, 0), NSVR_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(nsvr_config_set_prewhiten_runs(cfg, 12), NSVR_OK);
  char* json = nullptr;
  ASSERT_EQ(nsvr_config_to_json(cfg, &json), NSVR_OK);
  const std::string text = json;
  nsvr_string_free(json);
  EXPECT_NE(text.find("\"n_samples\": 3000"), std::string::npos) << text;
  EXPECT_NE(text.find("\"runs\": 12"), std::string::npos);

  char* bench = nullptr;
  ASSERT_EQ(nsvr_prewhiten_bench(cfg, nullptr, &bench), NSVR_OK) << nsvr_last_error();
  EXPECT_NE(std::string(bench).find("ar6_prewhitened"), std::string::npos);
  nsvr_string_free(bench);
  nsvr_config_free(cfg);
}

TEST(CApi, SimulateFitExcursionsReport) {
  const auto dir = fs::temp_directory_path() / "nsvr_c_api_test";
  fs::remove_all(dir);
  const std::string data_dir = (dir / "data").string(), fit_dir = (dir / "fit").string(),
                    report_dir = (dir / "report").string();

  nsvr_config* cfg = nullptr;
  ASSERT_EQ(nsvr_config_load(kSmall.c_str(), &cfg), NSVR_OK) << nsvr_last_error();
  nsvr_dataset* sim = nullptr;
  ASSERT_EQ(nsvr_simulate_slice(cfg, &sim), NSVR_OK) << nsvr_last_error();
  ASSERT_EQ(nsvr_dataset_save(sim, cfg, data_dir.c_str()), NSVR_OK) << nsvr_last_error();
  size_t v = 0, t = 0, k = 0;
  ASSERT_EQ(nsvr_dataset_dims(sim, &v, &t, &k), NSVR_OK);
  EXPECT_EQ(t, 128u);
  EXPECT_EQ(k, 2u);
  EXPECT_GT(v, 100u);
  EXPECT_LT(v, 18u * 20u);
  nsvr_dataset_free(sim);

  nsvr_dataset* ds = nullptr;
  ASSERT_EQ(nsvr_dataset_load(data_dir.c_str(), &ds), NSVR_OK) << nsvr_last_error();
  size_t v2 = 0;
  nsvr_dataset_dims(ds, &v2, nullptr, nullptr);
  EXPECT_EQ(v2, v);

  nsvr_fit* fit = nullptr;
  ASSERT_EQ(nsvr_fit_run(cfg, ds, &fit), NSVR_OK) << nsvr_last_error();
  ASSERT_EQ(nsvr_fit_save(fit, ds, fit_dir.c_str()), NSVR_OK) << nsvr_last_error();
  size_t n_h = 0;
  ASSERT_EQ(nsvr_fit_hurst(fit, nullptr, 0, &n_h), NSVR_OK);
  EXPECT_EQ(n_h, 2u);
  std::vector<double> h(n_h);
  nsvr_fit_hurst(fit, h.data(), h.size(), &n_h);
  for (double x : h) {
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  std::vector<double> mean(v), sd(v);
  EXPECT_EQ(nsvr_fit_beta(fit, 0, mean.data(), sd.data(), v), NSVR_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(nsvr_fit_beta(fit, 1, mean.data(), sd.data(), v - 1), NSVR_ERR_DIMENSION_MISMATCH);
  ASSERT_EQ(nsvr_fit_beta(fit, 2, mean.data(), sd.data(), v), NSVR_OK);

  // A reloaded fit carries the same summaries.
  nsvr_fit* loaded = nullptr;
  ASSERT_EQ(nsvr_fit_load(fit_dir.c_str(), &loaded), NSVR_OK) << nsvr_last_error();
  std::vector<double> mean2(v), sd2(v);
  ASSERT_EQ(nsvr_fit_beta(loaded, 2, mean2.data(), sd2.data(), v), NSVR_OK);
  EXPECT_EQ(mean, mean2);
  EXPECT_EQ(sd, sd2);

  std::vector<size_t> counts(k, 0);
  ASSERT_EQ(nsvr_excursions_run(cfg, ds, loaded, fit_dir.c_str(), counts.data(), counts.size()),
            NSVR_OK)
      << nsvr_last_error();
  EXPECT_GT(counts[1], 0u);
  EXPECT_TRUE(fs::exists(dir / "fit" / "excursions.json"));
  EXPECT_TRUE(fs::exists(dir / "fit" / "activation_task1.csv"));

  char* report = nullptr;
  ASSERT_EQ(nsvr_report_write(ds, fit_dir.c_str(), report_dir.c_str(), &report), NSVR_OK)
      << nsvr_last_error();
  EXPECT_NE(std::string(report).find("confusion"), std::string::npos);
  nsvr_string_free(report);
  EXPECT_TRUE(fs::exists(dir / "report" / "hurst.pgm"));

  nsvr_fit_free(loaded);
  nsvr_fit_free(fit);
  nsvr_dataset_free(ds);
  nsvr_config_free(cfg);
  fs::remove_all(dir);
}

TEST(CApi, MissingDatasetDirectory) {
  nsvr_dataset* ds = nullptr;
  EXPECT_EQ(nsvr_dataset_load("/nonexistent/dataset", &ds), NSVR_ERR_IO);
  EXPECT_EQ(ds, nullptr);
}

}  // namespace
