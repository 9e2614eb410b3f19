#include "nsvr/design.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "nsvr/error.hpp"

namespace {

TEST(CanonicalHrf, StartsAtZero) { EXPECT_EQ(nsvr::canonical_hrf(0.0), 0.0); }

TEST(CanonicalHrf, PeakLocationAndScale) {
  double best_t = 0.0, best = -1.0;
  for (double t = 0.0; t <= 30.0; t += 0.01) {
    const double h = nsvr::canonical_hrf(t);
    if (h > best) {
      best = h;
      best_t = t;
    }
  }
  EXPECT_GE(best_t, 4.0);
  EXPECT_LE(best_t, 6.0);
  EXPECT_NEAR(best, 1.0, 1e-6);
  EXPECT_LT(std::abs(nsvr::canonical_hrf(30.0)) / best, 0.01);
  for (double t = 25.5; t <= 40.0; t += 0.5) EXPECT_LT(std::abs(nsvr::canonical_hrf(t)), 0.01);
}

TEST(CanonicalHrf, UndershootIsNegative) {
  EXPECT_LT(nsvr::canonical_hrf(14.0), 0.0);
}

nsvr::StimulusCourse course(std::vector<nsvr::StimulusBlock> blocks, std::size_t length) {
  nsvr::StimulusCourse s;
  s.blocks = std::move(blocks);
  s.tr = 1.0;
  s.length = length;
  return s;
}

TEST(ConvolveDesign, ZeroStimulusGivesZeroRegressor) {
  const auto x = nsvr::convolve_design(course({}, 100));
  ASSERT_EQ(x.size(), 100u);
  for (double v : x) EXPECT_EQ(v, 0.0);
}

TEST(ConvolveDesign, ConstantStimulusReachesSteadyState) {
  const auto x = nsvr::convolve_design(course({{0.0, 200.0, 1}}, 200));
  const double dt = 1.0 / nsvr::kHrfOversampling;
  double area = 0.0;
  for (double u = 0.0; u < 32.0; u += dt) area += nsvr::canonical_hrf(u) * dt;
  EXPECT_NEAR(x[100], area, 1e-3 * std::abs(area));
  EXPECT_NEAR(x[199], area, 1e-3 * std::abs(area));
}

TEST(ConvolveDesign, SingleBlockRisesThenDecays) {
  const auto x = nsvr::convolve_design(course({{10.0, 20.0, 1}}, 80));
  EXPECT_NEAR(x[10], 0.0, 1e-12);
  EXPECT_GT(x[14], x[11]);
  const auto peak = std::max_element(x.begin(), x.end()) - x.begin();
  // Peak lag relative to the block end, where the plateau turns over.
  EXPECT_GE(peak - 30, -16);
  EXPECT_LE(peak, 38);
  // Rises after onset: the first sample above 10% of the peak is 4-8 s later.
  const auto rise = std::find_if(x.begin(), x.end(), [&](double v) { return v > 0.5 * x[peak]; }) - x.begin();
  EXPECT_GE(rise - 10, 2);
  EXPECT_LE(rise - 10, 8);
  EXPECT_LT(x[70], 0.05 * x[peak]);
}

TEST(ConvolveDesign, ShortBlockPeakLag) {
  const auto x = nsvr::convolve_design(course({{10.0, 1.0, 1}}, 60));
  const auto peak = std::max_element(x.begin(), x.end()) - x.begin();
  EXPECT_GE(peak - 10, 4);
  EXPECT_LE(peak - 10, 8);
}

TEST(ConvolveFine, IsLinear) {
  std::vector<double> a(400, 0.0), b(400, 0.0), c(400);
  for (std::size_t i = 50; i < 120; ++i) a[i] = 1.0;
  for (std::size_t i = 200; i < 230; ++i) b[i] = 2.0;
  for (std::size_t i = 0; i < 400; ++i) c[i] = 3.0 * a[i] - b[i];
  const auto xa = nsvr::convolve_fine(a, 0.25), xb = nsvr::convolve_fine(b, 0.25),
             xc = nsvr::convolve_fine(c, 0.25);
  for (std::size_t i = 0; i < 400; ++i) EXPECT_NEAR(xc[i], 3.0 * xa[i] - xb[i], 1e-12);
}

TEST(StandardizeColumns, SmallColumn) {
  const auto d = nsvr::standardize_columns(nsvr::make_design({{1.0, 2.0, 3.0}}));
  EXPECT_NEAR(d.columns(0, 1), -1.0, 1e-15);
  EXPECT_NEAR(d.columns(1, 1), 0.0, 1e-15);
  EXPECT_NEAR(d.columns(2, 1), 1.0, 1e-15);
  EXPECT_EQ(d.columns(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(d.task_center[0], 2.0);
  EXPECT_DOUBLE_EQ(d.task_scale[0], 1.0);
}

TEST(StandardizeColumns, ArbitraryAndIdempotent) {
  std::vector<double> a(97), b(97);
  for (std::size_t i = 0; i < 97; ++i) {
    a[i] = std::sin(0.3 * double(i)) * 5.0 + 2.0;
    b[i] = double(i * i) / 100.0;
  }
  const auto d = nsvr::standardize_columns(nsvr::make_design({a, b}));
  for (int k = 1; k <= 2; ++k) {
    const Eigen::VectorXd c = d.columns.col(k);
    const double sd = std::sqrt((c.array() - c.mean()).square().sum() / 96.0);
    EXPECT_LT(std::abs(c.mean()), 1e-12);
    EXPECT_LT(std::abs(sd - 1.0), 1e-12);
  }
  const auto again = nsvr::standardize_columns(d);
  EXPECT_LT((again.columns - d.columns).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(StandardizeColumns, ConstantColumnFails) {
  EXPECT_THROW(nsvr::standardize_columns(nsvr::make_design({{2.0, 2.0, 2.0}})), nsvr::Error);
}

TEST(StimulusFile, RoundTripAndSplit) {
  const auto path = std::filesystem::temp_directory_path() / "nsvr_stimulus_test.txt";
  const std::vector<nsvr::StimulusBlock> blocks = {{0.0, 20.0, 1}, {30.0, 20.0, 2}, {60.0, 20.0, 1}};
  nsvr::write_stimulus_file(path.string(), blocks);
  const auto back = nsvr::read_stimulus_file(path.string());
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].task, 2);
  EXPECT_DOUBLE_EQ(back[2].onset, 60.0);
  const auto courses = nsvr::split_by_task(back, 1.0, 90);
  ASSERT_EQ(courses.size(), 2u);
  const auto s1 = courses[0].sampled();
  EXPECT_EQ(s1[0], 1.0);
  EXPECT_EQ(s1[25], 0.0);
  EXPECT_EQ(s1[65], 1.0);
  EXPECT_EQ(courses[1].sampled()[35], 1.0);
  std::filesystem::remove(path);
}

}  // namespace
