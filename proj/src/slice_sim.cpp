#include <cmath>
#include <fstream>
#include <random>

#include "nsvr/error.hpp"
#include "nsvr/fgn.hpp"
#include "nsvr/harness.hpp"

namespace nsvr {

double Site::activation(double x, double y, int task) const {
  const double d = std::hypot(x - cx, y - cy);
  if (d >= radius) return 0.0;
  return magnitude.at(static_cast<std::size_t>(task)) * std::exp(-lambda * d);
}

void SliceSimSpec::validate() const {
  require(width >= 2 && height >= 2, ErrorCode::kInvalidArgument, "image too small");
  require(mask.size() == static_cast<std::size_t>(width * height),
          ErrorCode::kDimensionMismatch, "mask size does not match the image");
  require(length >= 32 && tr > 0.0 && sigma > 0.0, ErrorCode::kInvalidArgument,
          "need T >= 32, TR > 0 and sigma > 0");
  require(n_tasks >= 1, ErrorCode::kInvalidArgument, "need at least one task");
  require(background_hurst > 0.0 && background_hurst < 1.0, ErrorCode::kDomain,
          "background Hurst value must lie in (0, 1)");
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto& s = sites[i];
    require(s.radius > 0.0 && s.lambda >= 0.0 && s.hurst > 0.0 && s.hurst < 1.0,
            ErrorCode::kInvalidArgument, "site '" + s.name + "' has invalid parameters");
    require(static_cast<int>(s.magnitude.size()) == n_tasks, ErrorCode::kDimensionMismatch,
            "site '" + s.name + "' needs one magnitude per task");
    for (std::size_t j = 0; j < i; ++j) {
      const auto& o = sites[j];
      require(std::hypot(s.cx - o.cx, s.cy - o.cy) >= s.radius + o.radius,
              ErrorCode::kInvalidArgument,
              "sites '" + o.name + "' and '" + s.name + "' overlap");
    }
  }
  for (const auto& b : blocks)
    require(b.task >= 1 && b.task <= n_tasks, ErrorCode::kInvalidArgument,
            "stimulus block refers to an unknown task");
}

std::vector<bool> default_brain_mask(int width, int height) {
  const double cx = 0.5 * (width - 1), cy = 0.5 * (height - 1);
  const double ax = 0.5 * (width - 3), ay = 0.5 * (height - 3);
  std::vector<bool> mask(static_cast<std::size_t>(width * height), false);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double ex = (x - cx) / ax, ey = (y - cy) / ay;
      const double vx = (x - cx) / 2.5, vy = (y - cy) / 4.0;
      mask[static_cast<std::size_t>(y * width + x)] =
          ex * ex + ey * ey <= 1.0 && vx * vx + vy * vy > 1.0;
    }
  }
  return mask;
}

std::vector<StimulusBlock> default_block_schedule(std::size_t length, double tr) {
  std::vector<StimulusBlock> blocks;
  const double total = static_cast<double>(length) * tr;
  for (double t0 = 0.0; t0 < total; t0 += 60.0) {
    blocks.push_back({t0, 20.0, 1});
    if (t0 + 30.0 < total) blocks.push_back({t0 + 30.0, 20.0, 2});
  }
  return blocks;
}

SliceSimSpec default_slice_spec() {
  SliceSimSpec spec;
  spec.mask = default_brain_mask(spec.width, spec.height);
  spec.sites = {
      {"top", 22.0, 45.0, 6.0, 0.2, 0.8, {2.0, 3.0}},
      {"right", 36.0, 27.0, 6.0, 0.2, 0.4, {2.0, 3.0}},
      {"bottom", 22.0, 9.0, 7.0, 0.05, 0.4, {2.0, 3.0}},
      {"left", 9.0, 27.0, 7.0, 0.05, 0.8, {2.0, 3.0}},
  };
  spec.blocks = default_block_schedule(spec.length, spec.tr);
  return spec;
}

SliceSimSpec null_slice_spec() {
  SliceSimSpec spec = default_slice_spec();
  for (auto& s : spec.sites) {
    s.hurst = 0.5;
    for (double& m : s.magnitude) m = 0.0;
  }
  spec.background_hurst = 0.5;
  return spec;
}

std::vector<bool> read_mask(const std::string& path, int* width, int* height) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open mask file " + path);
  std::vector<bool> mask;
  std::string line;
  int w = -1, h = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (w < 0) w = static_cast<int>(line.size());
    require(static_cast<int>(line.size()) == w, ErrorCode::kParse,
            path + ": mask rows differ in length");
    for (char c : line) {
      require(c == '0' || c == '1', ErrorCode::kParse, path + ": mask characters must be 0 or 1");
      mask.push_back(c == '1');
    }
    ++h;
  }
  require(w > 0 && h > 0, ErrorCode::kParse, path + ": empty mask");
  *width = w;
  *height = h;
  return mask;
}

void write_mask(const std::string& path, const std::vector<bool>& mask, int width, int height) {
  require(mask.size() == static_cast<std::size_t>(width * height),
          ErrorCode::kDimensionMismatch, "mask size does not match the image");
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write mask file " + path);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out << (mask[static_cast<std::size_t>(y * width + x)] ? '1' : '0');
    out << '\n';
  }
}

SliceData generate_slice_simulation(const SliceSimSpec& spec, std::uint64_t seed) {
  spec.validate();
  SliceData data;
  data.grid = make_grid_mesh(spec.mask, spec.width, spec.height);
  const auto n_vertices = static_cast<Eigen::Index>(data.grid.pixel_of_vertex.size());
  const Eigen::Index k = spec.n_tasks;

  std::vector<std::vector<double>> regressors;
  for (const auto& course : split_by_task(spec.blocks, spec.tr, spec.length))
    regressors.push_back(convolve_design(course));
  require(static_cast<Eigen::Index>(regressors.size()) == k, ErrorCode::kInvalidArgument,
          "every task needs at least one stimulus block");
  data.design = make_design(regressors, true);

  data.beta_true = Eigen::MatrixXd::Zero(n_vertices, k);
  data.hurst_true.assign(static_cast<std::size_t>(n_vertices), spec.background_hurst);
  data.site_of_vertex.assign(static_cast<std::size_t>(n_vertices), -1);
  std::vector<int> region(static_cast<std::size_t>(n_vertices), 0);
  for (Eigen::Index v = 0; v < n_vertices; ++v) {
    const int pixel = data.grid.pixel_of_vertex[static_cast<std::size_t>(v)];
    const double x = pixel % spec.width, y = pixel / spec.width;
    for (std::size_t s = 0; s < spec.sites.size(); ++s) {
      const auto& site = spec.sites[s];
      if (std::hypot(x - site.cx, y - site.cy) >= site.radius) continue;
      data.site_of_vertex[static_cast<std::size_t>(v)] = static_cast<int>(s);
      data.hurst_true[static_cast<std::size_t>(v)] = site.hurst;
      region[static_cast<std::size_t>(v)] = static_cast<int>(s) + 1;
      for (Eigen::Index t = 0; t < k; ++t)
        data.beta_true(v, t) = site.activation(x, y, static_cast<int>(t));
    }
  }
  data.parcellation = Parcellation::from_labels(region);

  for (const auto& site : spec.sites) {
    const int px = static_cast<int>(std::lround(site.cx));
    const int py = static_cast<int>(std::lround(site.cy));
    require(px >= 0 && px < spec.width && py >= 0 && py < spec.height,
            ErrorCode::kInvalidArgument, "site '" + site.name + "' centre lies off the image");
    const int v = data.grid.vertex_of_pixel[static_cast<std::size_t>(py * spec.width + px)];
    require(v >= 0, ErrorCode::kInvalidArgument,
            "site '" + site.name + "' centre lies outside the analysed mesh");
    data.center_vertex.push_back(v);
  }

  std::mt19937_64 rng(seed);
  const auto t_len = static_cast<Eigen::Index>(spec.length);
  data.y.resize(n_vertices, t_len);
  const Eigen::MatrixXd x = data.design.columns.rightCols(k);
  for (Eigen::Index v = 0; v < n_vertices; ++v) {
    const FgnSpec noise_spec(data.hurst_true[static_cast<std::size_t>(v)],
                             spec.sigma * spec.sigma);
    const auto noise = simulate_fgn(noise_spec, spec.length, rng);
    const Eigen::VectorXd signal = x * data.beta_true.row(v).transpose();
    for (Eigen::Index t = 0; t < t_len; ++t)
      data.y(v, t) = signal(t) + noise[static_cast<std::size_t>(t)];
  }
  return data;
}

}  // namespace nsvr
