#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "poevi/expert.hpp"

namespace poevi {

/// One latent-variable draw: simplex point, state, and its log C_alpha(w).
struct WeightedDraw {
  Vector w;       // full length K; zero on pruned experts
  Vector z;       // length D
  double log_c = 0.0;
};

/// Batch of B draws with normalized importance weights pi (sum 1).
struct WeightedBatch {
  std::vector<WeightedDraw> draws;
  Vector pi;
  double log_normalizer_contrib = 0.0;  // logsumexp(log_c) - log B

  Index size() const { return static_cast<Index>(draws.size()); }
};

struct EssReport {
  double ess = 0.0;
  double relative_ess = 0.0;  // ess / B, in [0, 1]
};

/// Dirichlet(alpha) draw; weights below the prune threshold are treated as
/// exactly zero and excluded from the Gamma construction.
SimplexPoint sample_dirichlet(const Vector& alpha, RngEngine& rng);

/// Draw from t(mu(w), Omega(w), nu) via z = mu + L u sqrt(nu/g) with
/// u ~ N(0, I), g ~ chi-square(nu), and L L' = Omega(w)^-1.
Vector sample_student_t(const MixtureComponent& comp, RngEngine& rng);

/// B independent (w_b, z_b) draws from the latent-variable model at the
/// pool's alpha, weighted by pi_b proportional to exp(log C_alpha(w_b)).
/// Draw b uses the substream split_key(seed, b), so the batch is identical
/// however it is partitioned across workers.
WeightedBatch draw_weighted_batch(const PoEDensity& poe, Index batch_size, std::uint64_t seed);

EssReport effective_sample_size(const Vector& pi);

/// Log of the normalizing constant: logsumexp of log C_alpha(w_b) over B
/// Dirichlet draws, minus log B.
double estimate_log_normalizer(const PoEDensity& poe, Index budget, std::uint64_t seed);

/// Self-normalized importance estimate sum_b pi_b h(z_b).
double expectation(const WeightedBatch& batch, const std::function<double(const Vector&)>& h);
Vector expectation_vec(const WeightedBatch& batch,
                       const std::function<Vector(const Vector&)>& h);

/// First m points of the Halton sequence in the first `dim` prime bases
/// (indices 1..m), with per-dimension random digit scrambling keyed by seed.
/// Pass scramble = false for the plain sequence.
Matrix halton_points(Index m, Index dim, std::uint64_t seed, bool scramble = true);

/// CSV dump, header w_1..w_K, z_1..z_D, log_c, pi.
void save_batch_csv(const WeightedBatch& batch, const std::string& path);

}  // namespace poevi
