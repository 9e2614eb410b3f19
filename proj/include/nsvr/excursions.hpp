#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsvr/inference.hpp"

namespace nsvr {

// Joint draws of every task field, one column per draw.
struct PosteriorSamples {
  std::vector<Eigen::MatrixXf> task;  // V x n per task
  int n_samples = 0;
};

// Draws from the grid mixture: each draw picks a grid point with probability
// equal to its weight (multinomial allocation), then solves against the
// Cholesky factor of that point's posterior precision.
PosteriorSamples sample_posterior_field(PosteriorEngine& engine,
                                        const std::vector<Hyperparameters>& points,
                                        const std::vector<double>& weights, int n_samples,
                                        std::uint64_t seed);

enum class ExcursionSign { kPositive, kNegative };

struct ExcursionResult {
  std::vector<int> included;      // ascending vertex indices
  std::vector<int> component;     // per vertex: component id within D, -1 outside
  int n_components = 0;
  double joint_probability = 1.0; // Monte-Carlo estimate for `included`
  double standard_error = 0.0;
  double alpha = 0.05;
  int n_samples = 0;
  std::vector<int> order;         // vertices by decreasing marginal probability
  std::vector<double> marginal;   // per vertex P(sign * beta > 0)
  ExcursionSign sign = ExcursionSign::kPositive;
  bool warning = false;           // standard error above 0.01
};

inline constexpr int kMinExcursionSamples = 1000;

// Grows D along `order` while the estimated P(sign * beta_v > 0 for all v in
// D) stays above 1 - alpha. Components are labelled over `adjacency`.
ExcursionResult excursion_set(const Eigen::MatrixXf& samples, double alpha,
                              ExcursionSign sign,
                              const std::vector<std::vector<int>>& adjacency);

// Per-vertex labels +1 / -1 / 0 from a positive set and an optional negative
// set (pass nullptr to skip).
std::vector<int> activation_labels(std::size_t n_vertices, const ExcursionResult& positive,
                                   const ExcursionResult* negative);

// CSV "vertex,label" with '#' metadata lines carrying the joint probabilities.
void write_activation_map(const std::string& path, const std::vector<int>& labels,
                          const ExcursionResult& positive,
                          const ExcursionResult* negative);
std::vector<int> read_activation_map(const std::string& path);

}  // namespace nsvr
