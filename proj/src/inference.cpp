#include "nsvr/inference.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "nsvr/error.hpp"

namespace nsvr {

namespace {

using Triplet = Eigen::Triplet<double>;

double logit(double p) { return std::log(p / (1.0 - p)); }
double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

int levels_for(std::size_t n, std::size_t min_coeffs) {
  int levels = 0;
  const int max_level = log2_exact(n);
  while (levels < max_level && (n >> (levels + 1)) >= min_coeffs) ++levels;
  return levels;
}

}  // namespace

WaveletData whiten_data(const TimeSeriesMatrix& y, const DesignMatrix& design,
                        const WhitenOptions& opts) {
  require(y.cols() == design.rows(), ErrorCode::kDimensionMismatch,
          "series length does not match the design");
  require(y.cols() >= 2, ErrorCode::kInvalidArgument, "series too short");
  std::size_t n = 1;
  while (n < static_cast<std::size_t>(y.cols())) n <<= 1;
  const int levels = levels_for(n, opts.min_coeffs);
  require(levels >= 1, ErrorCode::kInvalidArgument,
          "series too short for the requested minimum coefficient count");

  WaveletData out;
  out.levels = levels;
  out.n_nuisance = design.n_nuisance();
  out.y.resize(y.rows(), static_cast<Eigen::Index>(n));
  out.x.resize(static_cast<Eigen::Index>(n), design.columns.cols());
  std::vector<double> coeffs(n), work(n);

  auto transform = [&](const Eigen::VectorXd& series) {
    const auto padded = pad_to_pow2({series.data(), static_cast<std::size_t>(series.size())});
    dwt_flat(padded.values, levels, opts.filter, coeffs, work);
  };
  for (Eigen::Index v = 0; v < y.rows(); ++v) {
    Eigen::VectorXd row = y.row(v).transpose();
    if (opts.center_response) row.array() -= row.mean();
    transform(row);
    for (std::size_t i = 0; i < n; ++i) out.y(v, static_cast<Eigen::Index>(i)) = coeffs[i];
  }
  for (Eigen::Index c = 0; c < design.columns.cols(); ++c) {
    transform(design.columns.col(c));
    for (std::size_t i = 0; i < n; ++i) out.x(static_cast<Eigen::Index>(i), c) = coeffs[i];
  }
  out.level.reserve(n);
  for (int j = 1; j <= levels; ++j) out.level.insert(out.level.end(), n >> j, j);
  out.level.insert(out.level.end(), n >> levels, levels + 1);
  return out;
}

LevelStatistics level_statistics(const WaveletData& data) {
  LevelStatistics s;
  s.levels = data.levels;
  s.n_vertices = data.y.rows();
  s.n_nuisance = data.n_nuisance;
  s.n_tasks = data.x.cols() - data.n_nuisance;
  require(s.n_tasks >= 1, ErrorCode::kInvalidArgument, "no task regressors");
  const int nl = data.levels + 1;
  s.counts.assign(static_cast<std::size_t>(nl), 0);
  for (int l : data.level) ++s.counts[static_cast<std::size_t>(l - 1)];
  s.yty.resize(s.n_vertices, nl);
  Eigen::Index offset = 0;
  for (int l = 0; l < nl; ++l) {
    const Eigen::Index len = s.counts[static_cast<std::size_t>(l)];
    const auto xb = data.x.middleRows(offset, len);
    const auto yb = data.y.middleCols(offset, len);
    s.xtx.push_back(xb.transpose() * xb);
    s.ytx.push_back(yb * xb);
    s.yty.col(l) = yb.rowwise().squaredNorm();
    offset += len;
  }
  return s;
}

void ModelSpec::validate(Eigen::Index n_vertices) const {
  require(n_tasks >= 1 && n_clusters >= 1, ErrorCode::kInvalidArgument,
          "model needs at least one task and one cluster");
  require(dimension() <= 10, ErrorCode::kInvalidArgument,
          "more than 10 hyperparameters");
  require(static_cast<Eigen::Index>(cluster_of_vertex.size()) == n_vertices &&
              fem.size() == n_vertices,
          ErrorCode::kDimensionMismatch, "model size does not match the data");
  for (int c : cluster_of_vertex)
    require(c >= 0 && c < n_clusters, ErrorCode::kInvalidArgument,
            "cluster index out of range");
  require(static_cast<int>(delta.size()) == n_tasks, ErrorCode::kDimensionMismatch,
          "need one local variability field per task");
  for (const auto& d : delta)
    require(d.size() == n_vertices && d.allFinite(), ErrorCode::kDimensionMismatch,
            "local variability field has the wrong size or non-finite values");
  require(sigma0 > 0.0 && rho0 > 0.0 && nu > 0.0, ErrorCode::kInvalidArgument,
          "sigma0, rho0 and nu must be positive");
}

Eigen::VectorXd Hyperparameters::to_internal() const {
  Eigen::VectorXd v(1 + static_cast<Eigen::Index>(hurst.size() + 2 * theta1.size()));
  Eigen::Index i = 0;
  v(i++) = std::log(sigma);
  for (double h : hurst) v(i++) = logit(h);
  for (std::size_t k = 0; k < theta1.size(); ++k) {
    v(i++) = theta1[k];
    v(i++) = theta2[k];
  }
  return v;
}

Hyperparameters Hyperparameters::from_internal(const Eigen::VectorXd& v, int n_clusters,
                                               int n_tasks) {
  require(v.size() == 1 + n_clusters + 2 * n_tasks, ErrorCode::kDimensionMismatch,
          "hyperparameter vector has the wrong length");
  Hyperparameters h;
  Eigen::Index i = 0;
  h.sigma = std::exp(v(i++));
  for (int c = 0; c < n_clusters; ++c) h.hurst.push_back(inv_logit(v(i++)));
  for (int k = 0; k < n_tasks; ++k) {
    h.theta1.push_back(v(i++));
    h.theta2.push_back(v(i++));
  }
  return h;
}

struct PosteriorEngine::Reduced {
  std::vector<Eigen::MatrixXd> m_task;  // per cluster, K x K after elimination
  Eigen::VectorXd b;                    // task-major, K V
  Eigen::VectorXd q;                    // per vertex
  double log_const = 0.0;               // summed over vertices
};

PosteriorEngine::PosteriorEngine(ModelSpec model, LevelStatistics stats)
    : model_(std::move(model)), stats_(std::move(stats)) {
  model_.validate(stats_.n_vertices);
  require(stats_.n_tasks == model_.n_tasks, ErrorCode::kDimensionMismatch,
          "task count differs between data and model");
}

void PosteriorEngine::check(const Hyperparameters& h) const {
  require(h.sigma > 0.0 && std::isfinite(h.sigma), ErrorCode::kDomain,
          "sigma must be positive");
  require(static_cast<int>(h.hurst.size()) == model_.n_clusters &&
              static_cast<int>(h.theta1.size()) == model_.n_tasks &&
              static_cast<int>(h.theta2.size()) == model_.n_tasks,
          ErrorCode::kDimensionMismatch, "hyperparameter sizes do not match the model");
  for (double hv : h.hurst)
    require(hv > 0.0 && hv < 1.0, ErrorCode::kDomain, "Hurst values must lie in (0, 1)");
}

std::vector<double> PosteriorEngine::level_variances(const Hyperparameters& h,
                                                     int cluster) const {
  const FgnSpec spec(h.hurst[static_cast<std::size_t>(cluster)], h.sigma * h.sigma);
  const int j = stats_.levels;
  std::vector<double> out(static_cast<std::size_t>(j + 1));
  for (int l = 1; l <= j; ++l) {
    const auto lv = wavelet_level_variance(spec, l, j, model_.normalization);
    out[static_cast<std::size_t>(l - 1)] = lv.detail;
    if (l == j) out[static_cast<std::size_t>(j)] = lv.approx;
  }
  return out;
}

PosteriorEngine::Reduced PosteriorEngine::reduce(const Hyperparameters& h) const {
  const Eigen::Index v_count = stats_.n_vertices;
  const Eigen::Index p0 = stats_.n_nuisance;
  const Eigen::Index k = stats_.n_tasks;
  const Eigen::Index p = p0 + k;
  const int nl = stats_.levels + 1;
  const double eps = model_.priors.nuisance_precision;

  Reduced r;
  r.b.resize(k * v_count);
  r.q.resize(v_count);
  std::vector<Eigen::VectorXd> w(static_cast<std::size_t>(model_.n_clusters));
  std::vector<Eigen::MatrixXd> n_inv(static_cast<std::size_t>(model_.n_clusters));
  std::vector<Eigen::MatrixXd> f(static_cast<std::size_t>(model_.n_clusters));
  std::vector<double> const_c(static_cast<std::size_t>(model_.n_clusters));
  std::size_t n_total = 0;
  for (int c : stats_.counts) n_total += static_cast<std::size_t>(c);

  for (int c = 0; c < model_.n_clusters; ++c) {
    const auto s = level_variances(h, c);
    auto& wc = w[static_cast<std::size_t>(c)];
    wc.resize(nl);
    double log_det_noise = 0.0;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
    for (int l = 0; l < nl; ++l) {
      const double var = s[static_cast<std::size_t>(l)];
      require(var > 0.0 && std::isfinite(var), ErrorCode::kDomain,
              "non-positive wavelet level variance");
      wc(l) = 1.0 / var;
      log_det_noise += stats_.counts[static_cast<std::size_t>(l)] * std::log(var);
      m += wc(l) * stats_.xtx[static_cast<std::size_t>(l)];
    }
    double cst = -0.5 * static_cast<double>(n_total) * std::log(2.0 * std::numbers::pi) -
                 0.5 * log_det_noise;
    Eigen::MatrixXd mt = m.bottomRightCorner(k, k);
    if (p0 > 0) {
      const Eigen::MatrixXd nn =
          m.topLeftCorner(p0, p0) + eps * Eigen::MatrixXd::Identity(p0, p0);
      Eigen::LLT<Eigen::MatrixXd> llt(nn);
      require(llt.info() == Eigen::Success, ErrorCode::kNotPositiveDefinite,
              "nuisance block is not positive definite");
      const Eigen::MatrixXd fc = llt.solve(m.topRightCorner(p0, k));
      mt -= m.bottomLeftCorner(k, p0) * fc;
      n_inv[static_cast<std::size_t>(c)] = llt.solve(Eigen::MatrixXd::Identity(p0, p0));
      f[static_cast<std::size_t>(c)] = fc;
      const Eigen::MatrixXd lm = llt.matrixL();
      cst += 0.5 * (static_cast<double>(p0) * std::log(eps) -
                    2.0 * lm.diagonal().array().log().sum());
    }
    r.m_task.push_back(0.5 * (mt + mt.transpose()));
    const_c[static_cast<std::size_t>(c)] = cst;
  }

  for (Eigen::Index v = 0; v < v_count; ++v) {
    const auto c = static_cast<std::size_t>(model_.cluster_of_vertex[static_cast<std::size_t>(v)]);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    double q = 0.0;
    for (int l = 0; l < nl; ++l) {
      b += w[c](l) * stats_.ytx[static_cast<std::size_t>(l)].row(v).transpose();
      q += w[c](l) * stats_.yty(v, l);
    }
    Eigen::VectorXd bt = b.tail(k);
    if (p0 > 0) {
      const Eigen::VectorXd bn = b.head(p0);
      bt -= f[c].transpose() * bn;
      q -= bn.dot(n_inv[c] * bn);
    }
    for (Eigen::Index t = 0; t < k; ++t) r.b(t * v_count + v) = bt(t);
    r.q(v) = q;
    r.log_const += const_c[c];
  }
  return r;
}

double PosteriorEngine::log_hyperprior(const Hyperparameters& h) const {
  const auto& pr = model_.priors;
  const double a = pr.sigma_shape, b = pr.sigma_rate;
  // Densities of the internal coordinates (log sigma, logit H, theta).
  double lp = a * std::log(b) - std::lgamma(a) + a * std::log(h.sigma) - b * h.sigma;
  for (double hv : h.hurst) lp += std::log(hv) + std::log1p(-hv);
  const double norm = 0.5 * std::log(pr.theta_precision / (2.0 * std::numbers::pi));
  for (std::size_t k = 0; k < h.theta1.size(); ++k) {
    lp += 2.0 * norm - 0.5 * pr.theta_precision *
                           (h.theta1[k] * h.theta1[k] + h.theta2[k] * h.theta2[k]);
  }
  return lp;
}

SparsePrecision PosteriorEngine::prior_precision(const Hyperparameters& h) const {
  check(h);
  const Eigen::Index n = stats_.n_vertices;
  std::vector<Triplet> t;
  for (int k = 0; k < model_.n_tasks; ++k) {
    NonstatField field;
    field.theta1 = h.theta1[static_cast<std::size_t>(k)];
    field.theta2 = h.theta2[static_cast<std::size_t>(k)];
    field.delta = model_.delta[static_cast<std::size_t>(k)];
    field.sigma0 = model_.sigma0;
    field.rho0 = model_.rho0;
    field.nu = model_.nu;
    const SparsePrecision q = precision_nonstationary(model_.fem, field, model_.alpha);
    for (Eigen::Index j = 0; j < q.outerSize(); ++j)
      for (SparsePrecision::InnerIterator it(q, j); it; ++it)
        t.emplace_back(k * n + it.row(), k * n + it.col(), it.value());
  }
  SparsePrecision out(model_.n_tasks * n, model_.n_tasks * n);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

namespace {

SparsePrecision add_likelihood(const SparsePrecision& prior,
                               const std::vector<Eigen::MatrixXd>& m_task,
                               const std::vector<int>& cluster_of_vertex, Eigen::Index n,
                               Eigen::Index k) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(prior.nonZeros() + n * k * k));
  for (Eigen::Index j = 0; j < prior.outerSize(); ++j)
    for (SparsePrecision::InnerIterator it(prior, j); it; ++it)
      t.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index v = 0; v < n; ++v) {
    const auto& m = m_task[static_cast<std::size_t>(cluster_of_vertex[static_cast<std::size_t>(v)])];
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b) t.emplace_back(a * n + v, b * n + v, m(a, b));
  }
  SparsePrecision out(prior.rows(), prior.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

}  // namespace

SparsePrecision PosteriorEngine::posterior_precision(const Hyperparameters& h) {
  const auto r = reduce(h);
  return add_likelihood(prior_precision(h), r.m_task, model_.cluster_of_vertex,
                        stats_.n_vertices, stats_.n_tasks);
}

ConditionalPosterior PosteriorEngine::evaluate(const Hyperparameters& h, bool variances) {
  check(h);
  const Eigen::Index n = stats_.n_vertices;
  const Eigen::Index k = stats_.n_tasks;
  const auto r = reduce(h);
  const SparsePrecision prior = prior_precision(h);
  const SparsePrecision post =
      add_likelihood(prior, r.m_task, model_.cluster_of_vertex, n, k);

  post_factor_.factorize(post);
  ConditionalPosterior out;
  out.mean = post_factor_.solve(r.b);
  if (variances) out.variance = post_factor_.inverse_diagonal();

  double log_det_prior = 0.0;
  for (int t = 0; t < model_.n_tasks; ++t) {
    NonstatField field;
    field.theta1 = h.theta1[static_cast<std::size_t>(t)];
    field.theta2 = h.theta2[static_cast<std::size_t>(t)];
    field.delta = model_.delta[static_cast<std::size_t>(t)];
    field.sigma0 = model_.sigma0;
    field.rho0 = model_.rho0;
    field.nu = model_.nu;
    log_det_prior += 2.0 * field.log_tau().sum() +
                     log_det_stationary(model_.fem, field.kappa(), model_.alpha, k_factor_);
  }
  const double log_det_post = post_factor_.log_determinant();
  const double common = r.log_const + 0.5 * log_det_prior - 0.5 * log_det_post;

  out.log_marginal = common - 0.5 * r.q.sum() + 0.5 * r.b.dot(out.mean);

  // The same Gaussian integral through the weighted residual sum of squares
  // and the prior quadratic form at the posterior mode.
  double resid = r.q.sum() + out.mean.dot(prior * out.mean);
  for (Eigen::Index v = 0; v < n; ++v) {
    Eigen::VectorXd mv(k), bv(k);
    for (Eigen::Index t = 0; t < k; ++t) {
      mv(t) = out.mean(t * n + v);
      bv(t) = r.b(t * n + v);
    }
    const auto& m =
        r.m_task[static_cast<std::size_t>(model_.cluster_of_vertex[static_cast<std::size_t>(v)])];
    resid += mv.dot(m * mv) - 2.0 * bv.dot(mv);
  }
  out.log_marginal_residual = common - 0.5 * resid;
  out.log_prior = log_hyperprior(h);
  return out;
}

void PosteriorEngine::sample(const Hyperparameters& h, int n_draws, std::mt19937_64& rng,
                             std::vector<Eigen::MatrixXf>& out, Eigen::Index offset) {
  const Eigen::Index n = stats_.n_vertices;
  const Eigen::Index k = stats_.n_tasks;
  require(static_cast<Eigen::Index>(out.size()) == k, ErrorCode::kDimensionMismatch,
          "sample buffer needs one matrix per task");
  for (const auto& m : out)
    require(m.rows() == n && m.cols() >= offset + n_draws, ErrorCode::kDimensionMismatch,
            "sample buffer too small");
  const auto r = reduce(h);
  post_factor_.factorize(
      add_likelihood(prior_precision(h), r.m_task, model_.cluster_of_vertex, n, k));
  const Eigen::VectorXd mean = post_factor_.solve(r.b);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(k * n);
  for (int s = 0; s < n_draws; ++s) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    const Eigen::VectorXd x = mean + post_factor_.sample_solve(z);
    for (Eigen::Index t = 0; t < k; ++t)
      out[static_cast<std::size_t>(t)].col(offset + s) = x.segment(t * n, n).cast<float>();
  }
}

ConditionalPosterior conditional_posterior(const Hyperparameters& h,
                                           const LevelStatistics& stats,
                                           const ModelSpec& model, bool variances) {
  PosteriorEngine engine(model, stats);
  return engine.evaluate(h, variances);
}

// ---------------------------------------------------------------------------
// Hyperparameter integration

namespace {

struct NmContext {
  const LogDensity* f;
  Eigen::VectorXd origin;
  Eigen::VectorXd scale;
  int evaluations = 0;
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x;
};

double nm_objective(const gsl_vector* y, void* params) {
  auto* ctx = static_cast<NmContext*>(params);
  Eigen::VectorXd x = ctx->origin;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x(i) += ctx->scale(i) * gsl_vector_get(y, static_cast<std::size_t>(i));
  ++ctx->evaluations;
  const double v = (*ctx->f)(x);
  if (!std::isfinite(v)) return 1e100;
  if (v > ctx->best) {
    ctx->best = v;
    ctx->best_x = x;
  }
  return -v;
}

// Returns true when the simplex shrank below the tolerance.
bool nelder_mead(NmContext& ctx, const Eigen::VectorXd& start, double step, double tol,
                 int budget) {
  const auto d = static_cast<std::size_t>(start.size());
  gsl_set_error_handler_off();
  gsl_multimin_function fn;
  fn.n = d;
  fn.f = nm_objective;
  fn.params = &ctx;
  ctx.origin = start;
  gsl_vector* y0 = gsl_vector_calloc(d);
  gsl_vector* steps = gsl_vector_alloc(d);
  gsl_vector_set_all(steps, step);
  gsl_multimin_fminimizer* s =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, d);
  gsl_multimin_fminimizer_set(s, &fn, y0, steps);
  bool converged = false;
  while (ctx.evaluations < budget) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    const double size = gsl_multimin_fminimizer_size(s);
    if (gsl_multimin_test_size(size, tol) == GSL_SUCCESS) {
      converged = true;
      break;
    }
  }
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(steps);
  gsl_vector_free(y0);
  return converged;
}

// Central-difference gradient of the scaled objective.
void qn_gradient(const gsl_vector* y, void* params, gsl_vector* g) {
  const std::size_t d = y->size;
  gsl_vector* w = gsl_vector_alloc(d);
  gsl_vector_memcpy(w, y);
  const double h = 1e-3;
  for (std::size_t i = 0; i < d; ++i) {
    const double yi = gsl_vector_get(y, i);
    gsl_vector_set(w, i, yi + h);
    const double fp = nm_objective(w, params);
    gsl_vector_set(w, i, yi - h);
    const double fm = nm_objective(w, params);
    gsl_vector_set(w, i, yi);
    gsl_vector_set(g, i, (fp - fm) / (2.0 * h));
  }
  gsl_vector_free(w);
}

void qn_fdf(const gsl_vector* y, void* params, double* f, gsl_vector* g) {
  *f = nm_objective(y, params);
  qn_gradient(y, params, g);
}

// BFGS on the scaled coordinates; the best point seen lands in ctx.
void quasi_newton(NmContext& ctx, const Eigen::VectorXd& start, int budget) {
  const auto d = static_cast<std::size_t>(start.size());
  gsl_set_error_handler_off();
  gsl_multimin_function_fdf fn;
  fn.n = d;
  fn.f = nm_objective;
  fn.df = qn_gradient;
  fn.fdf = qn_fdf;
  fn.params = &ctx;
  ctx.origin = start;
  gsl_vector* y0 = gsl_vector_calloc(d);
  gsl_multimin_fdfminimizer* s =
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, d);
  gsl_multimin_fdfminimizer_set(s, &fn, y0, 0.5, 0.1);
  while (ctx.evaluations < budget) {
    if (gsl_multimin_fdfminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_gradient(gsl_multimin_fdfminimizer_gradient(s), 1e-3) == GSL_SUCCESS)
      break;
  }
  gsl_multimin_fdfminimizer_free(s);
  gsl_vector_free(y0);
}

double safe_eval(const LogDensity& f, const Eigen::VectorXd& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
}

// Every word of the defining relation has length >= 5.
bool resolution_at_least_5(const std::vector<unsigned>& generators) {
  const std::size_t p = generators.size();
  for (unsigned mask = 1; mask < (1u << p); ++mask) {
    unsigned word = 0;
    int extra = 0;
    for (std::size_t g = 0; g < p; ++g) {
      if (mask & (1u << g)) {
        word ^= generators[g];
        ++extra;
      }
    }
    if (std::popcount(word) + extra < 5) return false;
  }
  return true;
}

bool search_generators(int base, int needed, unsigned next, std::vector<unsigned>& chosen) {
  if (static_cast<int>(chosen.size()) == needed) return resolution_at_least_5(chosen);
  for (unsigned cand = next; cand < (1u << base); ++cand) {
    if (std::popcount(cand) < 4) continue;
    chosen.push_back(cand);
    if (resolution_at_least_5(chosen) &&
        search_generators(base, needed, cand + 1, chosen))
      return true;
    chosen.pop_back();
  }
  return false;
}

}  // namespace

Eigen::MatrixXd resolution_v_design(int d) {
  require(d >= 1 && d <= 16, ErrorCode::kInvalidArgument,
          "fractional factorial supports 1..16 factors");
  int base = d;
  std::vector<unsigned> generators;
  for (int b = 1; b <= d; ++b) {
    std::vector<unsigned> chosen;
    if (b == d || search_generators(b, d - b, 0, chosen)) {
      base = b;
      generators = chosen;
      break;
    }
  }
  const Eigen::Index runs = Eigen::Index{1} << base;
  Eigen::MatrixXd out(runs, d);
  for (Eigen::Index r = 0; r < runs; ++r) {
    for (int j = 0; j < base; ++j) out(r, j) = (r >> j) & 1 ? 1.0 : -1.0;
    for (std::size_t g = 0; g < generators.size(); ++g) {
      double v = 1.0;
      for (int j = 0; j < base; ++j)
        if (generators[g] & (1u << j)) v *= out(r, j);
      out(r, base + static_cast<Eigen::Index>(g)) = v;
    }
  }
  return out;
}

HyperGrid hyperparameter_grid(const LogDensity& log_posterior, const Eigen::VectorXd& start,
                              const GridOptions& opts) {
  const Eigen::Index d = start.size();
  require(d >= 1 && d <= 10, ErrorCode::kInvalidArgument,
          "hyperparameter dimension must be 1..10");
  HyperGrid grid;
  int evals = 0;
  auto f = [&](const Eigen::VectorXd& x) {
    ++evals;
    return safe_eval(log_posterior, x);
  };

  // Diagonal curvature at the start sets the coordinate scaling.
  const double f0 = f(start);
  require(std::isfinite(f0), ErrorCode::kDomain,
          "log posterior is not finite at the starting point");
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double h = 0.1;
    Eigen::VectorXd xp = start, xm = start;
    xp(i) += h;
    xm(i) -= h;
    const double curv = -(f(xp) - 2.0 * f0 + f(xm)) / (h * h);
    if (std::isfinite(curv) && curv > 1e-8)
      scale(i) = std::clamp(1.0 / std::sqrt(curv), 1e-3, 10.0);
  }

  NmContext ctx;
  ctx.f = &log_posterior;
  ctx.scale = scale;
  ctx.best = f0;
  ctx.best_x = start;
  const int budget = std::max(10, opts.max_evaluations);
  // Quasi-Newton gets close cheaply; the simplex from its best point then
  // confirms the mode without relying on finite-difference gradients.
  quasi_newton(ctx, start, budget / 2);
  bool converged = nelder_mead(ctx, ctx.best_x, 0.25, opts.mode_tolerance, budget);
  evals += ctx.evaluations;
  grid.mode = ctx.best_x;
  grid.mode_log_posterior = ctx.best;
  grid.converged = converged;

  // Central-difference Hessian of the negative log posterior at the mode.
  Eigen::VectorXd h = opts.hessian_step * scale;
  Eigen::MatrixXd hess(d, d);
  const double fm = grid.mode_log_posterior;
  std::vector<double> fp(static_cast<std::size_t>(d)), fn(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd xp = grid.mode, xm = grid.mode;
    xp(i) += h(i);
    xm(i) -= h(i);
    fp[static_cast<std::size_t>(i)] = f(xp);
    fn[static_cast<std::size_t>(i)] = f(xm);
    hess(i, i) = -(fp[static_cast<std::size_t>(i)] - 2.0 * fm + fn[static_cast<std::size_t>(i)]) /
                 (h(i) * h(i));
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      Eigen::VectorXd x = grid.mode;
      x(i) += h(i);
      x(j) += h(j);
      const double fpp = f(x);
      x(j) -= 2.0 * h(j);
      const double fpm = f(x);
      x(i) -= 2.0 * h(i);
      const double fmm = f(x);
      x(j) += 2.0 * h(j);
      const double fmp = f(x);
      hess(i, j) = hess(j, i) = -(fpp - fpm - fmp + fmm) / (4.0 * h(i) * h(j));
    }
  }
  if (!hess.allFinite()) {
    hess = scale.cwiseInverse().cwiseAbs2().asDiagonal();
  }
  grid.neg_hessian = hess;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double lmax = std::max(lambda.maxCoeff(), 1e-12);
  for (Eigen::Index i = 0; i < d; ++i) {
    // Flat or non-concave directions get the curvature of the start scaling.
    if (!(lambda(i) > 1e-8 * lmax)) {
      const Eigen::VectorXd u = eig.eigenvectors().col(i);
      lambda(i) = (u.array().square() / scale.array().square()).sum();
    }
  }
  const Eigen::MatrixXd map = eig.eigenvectors() * lambda.cwiseSqrt().cwiseInverse().asDiagonal();

  // Design points in standardized coordinates.
  std::vector<Eigen::VectorXd> zs;
  std::vector<double> log_delta;
  const int m = std::max(1, opts.points_per_dim);
  const double total = std::pow(static_cast<double>(m), static_cast<double>(d));
  if (total <= opts.max_grid_points) {
    grid.scheme = "grid";
    const auto count = static_cast<Eigen::Index>(std::llround(total));
    for (Eigen::Index idx = 0; idx < count; ++idx) {
      Eigen::VectorXd z(d);
      Eigen::Index rem = idx;
      for (Eigen::Index i = 0; i < d; ++i) {
        z(i) = (static_cast<double>(rem % m) - 0.5 * (m - 1)) * opts.grid_step;
        rem /= m;
      }
      zs.push_back(z);
      log_delta.push_back(0.0);
    }
  } else {
    grid.scheme = "ccd";
    const double f0c = opts.ccd_f0;
    const double r = f0c * std::sqrt(static_cast<double>(d));
    const Eigen::MatrixXd frac = resolution_v_design(static_cast<int>(d));
    const auto n_sphere = static_cast<double>(2 * d + frac.rows());
    // Equal weights on the sphere chosen so the rule reproduces E|z|^2 = d
    // under a standard Gaussian, with unit weight on the centre.
    const double ld = 0.5 * r * r - std::log(n_sphere * (f0c * f0c - 1.0));
    zs.push_back(Eigen::VectorXd::Zero(d));
    log_delta.push_back(0.0);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (double sgn : {-1.0, 1.0}) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
        z(i) = sgn * r;
        zs.push_back(z);
        log_delta.push_back(ld);
      }
    }
    for (Eigen::Index row = 0; row < frac.rows(); ++row) {
      zs.push_back(f0c * frac.row(row).transpose());
      log_delta.push_back(ld);
    }
  }

  std::vector<GridPoint> pts;
  double best = grid.mode_log_posterior;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    GridPoint p;
    p.theta = grid.mode + map * zs[i];
    p.log_posterior = zs[i].isZero() ? grid.mode_log_posterior : f(p.theta);
    p.log_delta = log_delta[i];
    best = std::max(best, p.log_posterior);
    pts.push_back(std::move(p));
  }
  double norm = 0.0;
  for (auto& p : pts) {
    if (!std::isfinite(p.log_posterior) ||
        p.log_posterior < best - opts.prune_log_weight)
      continue;
    p.weight = std::exp(p.log_posterior - best + p.log_delta);
    norm += p.weight;
    grid.points.push_back(p);
  }
  for (auto& p : grid.points) p.weight /= norm;
  grid.evaluations = evals;
  return grid;
}

PosteriorSummary marginal_posteriors(const std::vector<ConditionalPosterior>& conditionals,
                                     const std::vector<Hyperparameters>& points,
                                     const std::vector<double>& weights,
                                     Eigen::Index n_vertices, int n_tasks) {
  require(!conditionals.empty() && conditionals.size() == weights.size() &&
              points.size() == weights.size(),
          ErrorCode::kInvalidArgument, "need matching conditionals, points and weights");
  const Eigen::Index len = n_vertices * n_tasks;
  double wsum = 0.0;
  for (double w : weights) {
    require(w >= 0.0 && std::isfinite(w), ErrorCode::kInvalidArgument,
            "weights must be nonnegative");
    wsum += w;
  }
  require(wsum > 0.0, ErrorCode::kInvalidArgument, "weights sum to zero");

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(len);
  Eigen::VectorXd second = Eigen::VectorXd::Zero(len);
  for (std::size_t i = 0; i < conditionals.size(); ++i) {
    const auto& c = conditionals[i];
    require(c.mean.size() == len && c.variance.size() == len, ErrorCode::kDimensionMismatch,
            "conditional summaries need means and variances");
    const double w = weights[i] / wsum;
    mean += w * c.mean;
    second += w * (c.variance + c.mean.cwiseAbs2());
  }
  const Eigen::VectorXd var = (second - mean.cwiseAbs2()).cwiseMax(0.0);

  PosteriorSummary out;
  out.mean.resize(n_vertices, n_tasks);
  out.sd.resize(n_vertices, n_tasks);
  for (int k = 0; k < n_tasks; ++k) {
    out.mean.col(k) = mean.segment(k * n_vertices, n_vertices);
    out.sd.col(k) = var.segment(k * n_vertices, n_vertices).cwiseSqrt();
  }
  out.points = points;
  for (std::size_t i = 0; i < conditionals.size(); ++i) {
    out.weights.push_back(weights[i] / wsum);
    out.log_marginal.push_back(conditionals[i].log_marginal);
    out.log_posterior.push_back(conditionals[i].log_posterior());
  }

  // Natural-scale hyperparameter marginals.
  const auto& first = points.front();
  std::vector<std::pair<std::string, std::function<double(const Hyperparameters&)>>> fields;
  fields.emplace_back("sigma", [](const Hyperparameters& h) { return h.sigma; });
  for (std::size_t c = 0; c < first.hurst.size(); ++c)
    fields.emplace_back("H" + std::to_string(c + 1),
                        [c](const Hyperparameters& h) { return h.hurst[c]; });
  for (std::size_t k = 0; k < first.theta1.size(); ++k) {
    fields.emplace_back("theta1_task" + std::to_string(k + 1),
                        [k](const Hyperparameters& h) { return h.theta1[k]; });
    fields.emplace_back("theta2_task" + std::to_string(k + 1),
                        [k](const Hyperparameters& h) { return h.theta2[k]; });
  }
  for (const auto& [name, get] : fields) {
    HyperMarginal hm;
    hm.name = name;
    std::map<double, double> acc;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double v = get(points[i]);
      acc[v] += out.weights[i];
      hm.mean += out.weights[i] * v;
    }
    hm.values.assign(acc.begin(), acc.end());
    out.marginals.push_back(std::move(hm));
  }
  out.posterior_mean = first;
  std::size_t idx = 0;
  out.posterior_mean.sigma = out.marginals[idx++].mean;
  for (auto& hv : out.posterior_mean.hurst) hv = out.marginals[idx++].mean;
  for (std::size_t k = 0; k < first.theta1.size(); ++k) {
    out.posterior_mean.theta1[k] = out.marginals[idx++].mean;
    out.posterior_mean.theta2[k] = out.marginals[idx++].mean;
  }
  return out;
}

FitResult fit_posterior(PosteriorEngine& engine, const Hyperparameters& start,
                        const GridOptions& opts) {
  const int nh = engine.model().n_clusters;
  const int nk = engine.model().n_tasks;
  LogDensity lp = [&](const Eigen::VectorXd& x) {
    try {
      return engine.evaluate(Hyperparameters::from_internal(x, nh, nk)).log_posterior();
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  FitResult out;
  out.grid = hyperparameter_grid(lp, start.to_internal(), opts);
  std::vector<ConditionalPosterior> cond;
  std::vector<Hyperparameters> pts;
  std::vector<double> w;
  for (const auto& p : out.grid.points) {
    pts.push_back(Hyperparameters::from_internal(p.theta, nh, nk));
    cond.push_back(engine.evaluate(pts.back(), true));
    w.push_back(p.weight);
  }
  out.summary = marginal_posteriors(cond, pts, w, engine.n_vertices(), nk);
  return out;
}

}  // namespace nsvr
