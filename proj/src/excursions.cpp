#include "nsvr/excursions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

#include "nsvr/error.hpp"

namespace nsvr {

PosteriorSamples sample_posterior_field(PosteriorEngine& engine,
                                        const std::vector<Hyperparameters>& points,
                                        const std::vector<double>& weights, int n_samples,
                                        std::uint64_t seed) {
  require(n_samples >= 1, ErrorCode::kInvalidArgument, "need at least one sample");
  require(!points.empty() && points.size() == weights.size(), ErrorCode::kInvalidArgument,
          "need one weight per grid point");
  // Allocation has its own stream so the field draws do not depend on the mixture size.
  std::seed_seq alloc_seed{seed, std::uint64_t{1}};
  std::mt19937_64 alloc(alloc_seed);
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::vector<int> counts(points.size(), 0);
  for (int s = 0; s < n_samples; ++s) ++counts[pick(alloc)];

  PosteriorSamples out;
  out.n_samples = n_samples;
  const Eigen::Index n = engine.n_vertices();
  out.task.assign(static_cast<std::size_t>(engine.model().n_tasks),
                  Eigen::MatrixXf(n, n_samples));
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (counts[i] == 0) continue;
    engine.sample(points[i], counts[i], rng, out.task, offset);
    offset += counts[i];
  }
  return out;
}

ExcursionResult excursion_set(const Eigen::MatrixXf& samples, double alpha,
                              ExcursionSign sign,
                              const std::vector<std::vector<int>>& adjacency) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidArgument,
          "alpha must lie in (0, 1)");
  const Eigen::Index v = samples.rows();
  const Eigen::Index n = samples.cols();
  require(n >= kMinExcursionSamples, ErrorCode::kInvalidArgument,
          "excursion sets need at least 1000 samples");
  require(static_cast<Eigen::Index>(adjacency.size()) == v, ErrorCode::kDimensionMismatch,
          "adjacency does not match the number of vertices");
  const float s = sign == ExcursionSign::kPositive ? 1.0f : -1.0f;

  ExcursionResult out;
  out.alpha = alpha;
  out.sign = sign;
  out.n_samples = static_cast<int>(n);
  out.marginal.resize(static_cast<std::size_t>(v));
  for (Eigen::Index i = 0; i < v; ++i)
    out.marginal[static_cast<std::size_t>(i)] =
        static_cast<double>((s * samples.row(i).array() > 0.0f).count()) /
        static_cast<double>(n);
  out.order.resize(static_cast<std::size_t>(v));
  std::iota(out.order.begin(), out.order.end(), 0);
  std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) {
    return out.marginal[static_cast<std::size_t>(a)] > out.marginal[static_cast<std::size_t>(b)];
  });

  std::vector<char> alive(static_cast<std::size_t>(n), 1);
  Eigen::Index alive_count = n;
  const double threshold = 1.0 - alpha;
  for (int vertex : out.order) {
    Eigen::Index next = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (alive[static_cast<std::size_t>(j)] && s * samples(vertex, j) > 0.0f) ++next;
    if (static_cast<double>(next) / static_cast<double>(n) <= threshold) break;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!(s * samples(vertex, j) > 0.0f)) alive[static_cast<std::size_t>(j)] = 0;
    alive_count = next;
    out.included.push_back(vertex);
  }
  std::sort(out.included.begin(), out.included.end());
  out.joint_probability = static_cast<double>(alive_count) / static_cast<double>(n);
  out.standard_error = std::sqrt(out.joint_probability * (1.0 - out.joint_probability) /
                                 static_cast<double>(n));
  out.warning = out.standard_error > 0.01;

  out.component.assign(static_cast<std::size_t>(v), -1);
  std::vector<char> in_set(static_cast<std::size_t>(v), 0);
  for (int i : out.included) in_set[static_cast<std::size_t>(i)] = 1;
  for (int start : out.included) {
    if (out.component[static_cast<std::size_t>(start)] >= 0) continue;
    std::queue<int> q;
    q.push(start);
    out.component[static_cast<std::size_t>(start)] = out.n_components;
    while (!q.empty()) {
      const int a = q.front();
      q.pop();
      for (int b : adjacency[static_cast<std::size_t>(a)]) {
        if (in_set[static_cast<std::size_t>(b)] && out.component[static_cast<std::size_t>(b)] < 0) {
          out.component[static_cast<std::size_t>(b)] = out.n_components;
          q.push(b);
        }
      }
    }
    ++out.n_components;
  }
  return out;
}

std::vector<int> activation_labels(std::size_t n_vertices, const ExcursionResult& positive,
                                   const ExcursionResult* negative) {
  std::vector<int> labels(n_vertices, 0);
  for (int v : positive.included) {
    require(v >= 0 && static_cast<std::size_t>(v) < n_vertices, ErrorCode::kDimensionMismatch,
            "excursion set vertex out of range");
    labels[static_cast<std::size_t>(v)] = 1;
  }
  if (negative != nullptr) {
    for (int v : negative->included) {
      require(v >= 0 && static_cast<std::size_t>(v) < n_vertices,
              ErrorCode::kDimensionMismatch, "excursion set vertex out of range");
      labels[static_cast<std::size_t>(v)] = -1;
    }
  }
  return labels;
}

void write_activation_map(const std::string& path, const std::vector<int>& labels,
                          const ExcursionResult& positive,
                          const ExcursionResult* negative) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write activation map " + path);
  out << "# alpha=" << positive.alpha << '\n';
  out << "# n_samples=" << positive.n_samples << '\n';
  out << "# joint_probability_positive=" << positive.joint_probability
      << " se=" << positive.standard_error << '\n';
  if (negative != nullptr)
    out << "# joint_probability_negative=" << negative->joint_probability
        << " se=" << negative->standard_error << '\n';
  out << "vertex,label\n";
  for (std::size_t v = 0; v < labels.size(); ++v) out << v << ',' << labels[v] << '\n';
}

std::vector<int> read_activation_map(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open activation map " + path);
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("vertex", 0) == 0) continue;
    std::istringstream ss(line);
    long long v = 0;
    char comma = 0;
    int label = 0;
    require(static_cast<bool>(ss >> v >> comma >> label) && comma == ',' &&
                v == static_cast<long long>(labels.size()) && label >= -1 && label <= 1,
            ErrorCode::kParse, path + ": malformed activation map row '" + line + "'");
    labels.push_back(label);
  }
  return labels;
}

}  // namespace nsvr
