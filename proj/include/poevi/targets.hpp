#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "poevi/expert.hpp"

namespace poevi {

/// Black-box target: a log-density with capability flags and evaluation
/// handles. A score handle is always available; when the underlying model has
/// none, central differences of the log-density are wrapped in automatically.
class TargetModel {
 public:
  struct Handles {
    Index dim = 0;
    bool normalized = false;
    std::function<double(const Vector&)> log_density;
    std::function<Vector(const Vector&)> score;
    std::function<Matrix(const Vector&)> hessian;
    std::function<Vector(RngEngine&)> sampler;
    std::function<Matrix(Index, RngEngine&)> batch_sampler;   // rows = draws
    std::function<Matrix(const Matrix&)> batch_score;         // rows = points
    double fd_step = 1e-6;
  };

  explicit TargetModel(Handles handles);

  Index dim() const { return handles_.dim; }
  bool normalized() const { return handles_.normalized; }
  bool has_analytic_score() const { return analytic_score_; }
  bool has_analytic_hessian() const { return static_cast<bool>(handles_.hessian); }
  bool has_exact_sampler() const {
    return static_cast<bool>(handles_.sampler) || static_cast<bool>(handles_.batch_sampler);
  }

  double log_density(const Vector& z) const;
  Vector score(const Vector& z) const;
  Matrix hessian(const Vector& z) const;
  Vector sample(RngEngine& rng) const;
  Matrix sample_n(Index n, RngEngine& rng) const;

  /// Scores for a batch of points (rows); external targets answer this with a
  /// single protocol request.
  Matrix scores(const Matrix& points) const;

 private:
  Handles handles_;
  bool analytic_score_ = false;
};

struct ReferenceSamples {
  Matrix samples;  // N x D
  std::string source;

  Index count() const { return samples.rows(); }
  Index dim() const { return samples.cols(); }
};

/// Central-difference score of the target's log-density; per-coordinate step
/// is `step * (1 + |z_d|)`.
Vector finite_diff_score(const TargetModel& target, const Vector& z, double step);

TargetModel gaussian_target(Vector mean, Matrix cov);
TargetModel gaussian_mixture_target(Vector weights, std::vector<Vector> means,
                                    std::vector<Matrix> covariances);

/// PoE target: exact (unnormalized) log-density and score from the expert
/// pool, normalized lazily with a Monte-Carlo normalizer of the given budget,
/// sampled by importance resampling of weighted batches.
TargetModel poe_target(PoEDensity poe, Index normalizer_budget = 500000);

/// z_1 ~ N(0, sigma2); z_d ~ N(0, exp(z_1/2)) for d >= 2, exp(z_1/2) read as
/// a variance.
TargetModel funnel_target(double sigma2, Index dim);

/// Gaussian base draw pushed coordinate-wise through
/// z_d = sinh((asinh(zt_d) + eps_d) / tau_d); eps skews, tau < 1 fattens tails.
TargetModel sinh_arcsinh_target(Vector epsilon, Vector tau, Index dim, Matrix base_cov);

/// log p(z) = -[(1 - z1)^2 + 2 (z2 - z1^2)^2], unnormalized, no exact sampler.
TargetModel rosenbrock_target();

/// CSV with header z_1..z_D, one sample per row.
ReferenceSamples load_reference_samples(const std::string& path);

}  // namespace poevi
