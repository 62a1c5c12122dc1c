#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poevi/common.hpp"
#include "poevi/rng.hpp"

namespace poevi {

// Weight below which an expert is treated as exactly inactive: it is excluded
// from Dirichlet sampling but keeps its slot everywhere else.
inline constexpr double kPruneThreshold = 1e-10;

// Default slack for the sum constraint 2*sum(alpha) > D + 2*eps.
inline constexpr double kDefaultSlack = 1e-12;

/// One t-expert: location mu and symmetric PSD inverse scale lambda.
/// The unnormalized expert function is q(z) = [1 + (z-mu)' lambda (z-mu)]^-1.
class Expert {
 public:
  Expert(Vector mu, Matrix lambda);

  const Vector& mu() const { return mu_; }
  const Matrix& lambda() const { return lambda_; }
  Index dim() const { return mu_.size(); }
  bool full_rank() const { return full_rank_; }

  // (z-mu)' lambda (z-mu), clamped at 0 against rounding.
  double quad_form(const Vector& z) const;

 private:
  Vector mu_;
  Matrix lambda_;  // eigenvalue-clipped to the PSD cone on construction
  bool full_rank_ = true;
};

using ExpertPool = std::vector<Expert>;

/// Point on the simplex: w_k >= 0, sum w = 1 (within 1e-12).
class SimplexPoint {
 public:
  explicit SimplexPoint(Vector w);

  const Vector& coords() const { return w_; }
  double operator[](Index k) const { return w_[k]; }
  Index size() const { return w_.size(); }

 private:
  Vector w_;
};

/// Expert pool plus nonnegative weights alpha: the unnormalized density
/// prod_k q_k(z)^alpha_k. Construction checks alpha >= 0 and shared dimension;
/// normalizability (the sum constraint) is checked by check_normalizable and
/// enforced only by the sampling entry points, so that score evaluation stays
/// valid for arbitrary nonnegative alpha.
class PoEDensity {
 public:
  PoEDensity(ExpertPool experts, Vector alpha);

  const ExpertPool& experts() const { return experts_; }
  const Vector& alpha() const { return alpha_; }
  Index num_experts() const { return static_cast<Index>(experts_.size()); }
  Index dim() const { return experts_.front().dim(); }

  /// Indices of experts with alpha_k >= prune threshold.
  std::vector<Index> active_indices(double threshold = kPruneThreshold) const;

 private:
  ExpertPool experts_;
  Vector alpha_;
};

/// The w-indexed t-component of the continuous-mixture representation.
struct MixtureComponent {
  Vector mu_w;        // location mu(w)
  Matrix omega_w;     // inverse scale Omega(w), positive definite
  double nu = 0.0;    // degrees of freedom, 2*sum(alpha) - D
  double sigma2_w = 0.0;
  double log_c_w = 0.0;  // log C_alpha(w)

  // Lower Cholesky factor of omega_w, cached for sampling and determinants.
  Matrix omega_chol_lower;
};

struct NormalizabilityCheck {
  bool ok = false;
  std::string reason;
};

double degrees_of_freedom(const Vector& alpha, Index dim);

/// sum_k -alpha_k log(1 + |z - mu_k|^2_{Lambda_k}); finite for all finite z.
double poe_unnorm_log_density(const PoEDensity& poe, const Vector& z);

/// D x K matrix whose column k is grad log q_k(z) = -2 q_k(z) Lambda_k (z - mu_k).
Matrix score_matrix(const ExpertPool& pool, const Vector& z);

/// score_matrix(pool, z) * alpha; by construction the same formula the
/// score-matching system uses, so the linearity identity holds bitwise.
Vector poe_score(const PoEDensity& poe, const Vector& z);

/// Mixture parameters (mu(w), Omega(w), nu, sigma^2(w), log C_alpha(w)) at w.
/// Lambda(w) is factorized as-is; jitter 1e-10*trace/D is added only if that
/// fails, and a condition number beyond 1e14 raises SingularityError naming w.
MixtureComponent mixture_component(const PoEDensity& poe, const SimplexPoint& w);

/// Structured pass/fail: alpha >= 0, 2*sum(alpha) > D + 2*eps, and (when any
/// expert is rank-deficient) an empirical tail check over 1e4 Dirichlet draws
/// requiring Lambda(w) positive definite post-jitter at all of them.
NormalizabilityCheck check_normalizable(const PoEDensity& poe, double epsilon = kDefaultSlack);

struct MonteCarloEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo estimate of prod q_k(z)^alpha_k via the continuous-mixture
/// identity, averaging over n_w Dirichlet(alpha) draws. Identity-testing tool.
MonteCarloEstimate mixture_density_stats(const PoEDensity& poe, const Vector& z,
                                         std::uint64_t n_w, std::uint64_t seed);

double mixture_density_estimate(const PoEDensity& poe, const Vector& z, std::uint64_t n_w,
                                std::uint64_t seed);

}  // namespace poevi
