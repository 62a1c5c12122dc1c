#include "poevi/sampling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace poevi {

namespace detail {
Vector dirichlet_raw(const Vector& alpha, RngEngine& rng);  // expert.cpp
}

namespace {

struct ReducedPool {
  PoEDensity poe;
  std::vector<Index> active;
};

ReducedPool reduce_active(const PoEDensity& poe) {
  const NormalizabilityCheck check = check_normalizable(poe);
  if (!check.ok) throw NormalizabilityError("sampling: " + check.reason);
  std::vector<Index> active = poe.active_indices();
  ExpertPool experts;
  Vector alpha(static_cast<Index>(active.size()));
  for (std::size_t i = 0; i < active.size(); ++i) {
    experts.push_back(poe.experts()[active[i]]);
    alpha[static_cast<Index>(i)] = poe.alpha()[active[i]];
  }
  return {PoEDensity(std::move(experts), std::move(alpha)), std::move(active)};
}

}  // namespace

SimplexPoint sample_dirichlet(const Vector& alpha, RngEngine& rng) {
  std::vector<Index> active;
  for (Index k = 0; k < alpha.size(); ++k) {
    if (alpha[k] >= kPruneThreshold) active.push_back(k);
  }
  if (active.empty()) {
    throw NormalizabilityError("sample_dirichlet: all expert weights pruned, empty model");
  }
  Vector reduced(static_cast<Index>(active.size()));
  for (std::size_t i = 0; i < active.size(); ++i) {
    reduced[static_cast<Index>(i)] = alpha[active[i]];
  }
  const Vector draw = detail::dirichlet_raw(reduced, rng);
  Vector w = Vector::Zero(alpha.size());
  for (std::size_t i = 0; i < active.size(); ++i) {
    w[active[i]] = draw[static_cast<Index>(i)];
  }
  return SimplexPoint(std::move(w));
}

Vector sample_student_t(const MixtureComponent& comp, RngEngine& rng) {
  const Index d = comp.mu_w.size();
  if (comp.omega_chol_lower.rows() != d || !comp.omega_chol_lower.allFinite()) {
    throw SingularityError("sample_student_t: component has no usable factor of Omega(w)");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector u(d);
  for (Index i = 0; i < d; ++i) u[i] = normal(rng);

  std::gamma_distribution<double> chisq(comp.nu / 2.0, 2.0);
  double g = 0.0;
  for (int attempt = 0; attempt < 64 && !(g > 0.0); ++attempt) g = chisq(rng);
  if (!(g > 0.0)) throw std::runtime_error("sample_student_t: chi-square draw underflowed");

  // x = L^-T u has covariance Omega^-1 for Omega = L L'.
  const Vector x =
      comp.omega_chol_lower.triangularView<Eigen::Lower>().transpose().solve(u);
  return comp.mu_w + std::sqrt(comp.nu / g) * x;
}

WeightedBatch draw_weighted_batch(const PoEDensity& poe, Index batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw std::invalid_argument("draw_weighted_batch: batch size must be >= 1");
  const ReducedPool reduced = reduce_active(poe);
  const Index k_full = poe.num_experts();

  WeightedBatch batch;
  batch.draws.resize(batch_size);
  Vector log_c(batch_size);
  for (Index b = 0; b < batch_size; ++b) {
    RngEngine rng = engine_for(seed, static_cast<std::uint64_t>(b));
    const SimplexPoint w(detail::dirichlet_raw(reduced.poe.alpha(), rng));
    const MixtureComponent comp = mixture_component(reduced.poe, w);
    WeightedDraw& draw = batch.draws[b];
    draw.w = Vector::Zero(k_full);
    for (std::size_t i = 0; i < reduced.active.size(); ++i) {
      draw.w[reduced.active[i]] = w[static_cast<Index>(i)];
    }
    draw.z = sample_student_t(comp, rng);
    draw.log_c = comp.log_c_w;
    log_c[b] = comp.log_c_w;
    if (!draw.z.allFinite()) {
      throw std::runtime_error("draw_weighted_batch: non-finite draw at index " +
                               std::to_string(b));
    }
  }

  const double lse = log_sum_exp(log_c);
  batch.pi = (log_c.array() - lse).exp();
  batch.pi /= batch.pi.sum();  // renormalize rounding drift
  batch.log_normalizer_contrib = lse - std::log(static_cast<double>(batch_size));
  return batch;
}

EssReport effective_sample_size(const Vector& pi) {
  if (pi.size() == 0) throw std::invalid_argument("effective_sample_size: empty weight vector");
  const double total = pi.sum();
  const double sum_sq = pi.squaredNorm();
  EssReport report;
  report.ess = total * total / sum_sq;
  report.ess = std::clamp(report.ess, 1.0, static_cast<double>(pi.size()));
  report.relative_ess = report.ess / static_cast<double>(pi.size());
  return report;
}

double estimate_log_normalizer(const PoEDensity& poe, Index budget, std::uint64_t seed) {
  if (budget < 1) throw std::invalid_argument("estimate_log_normalizer: budget must be >= 1");
  const ReducedPool reduced = reduce_active(poe);
  Vector log_c(budget);
  for (Index b = 0; b < budget; ++b) {
    RngEngine rng = engine_for(seed, static_cast<std::uint64_t>(b));
    const SimplexPoint w(detail::dirichlet_raw(reduced.poe.alpha(), rng));
    log_c[b] = mixture_component(reduced.poe, w).log_c_w;
  }
  return log_sum_exp(log_c) - std::log(static_cast<double>(budget));
}

double expectation(const WeightedBatch& batch, const std::function<double(const Vector&)>& h) {
  if (batch.size() == 0) throw std::invalid_argument("expectation: empty batch");
  double total = 0.0;
  for (Index b = 0; b < batch.size(); ++b) {
    const double value = h(batch.draws[b].z);
    if (!std::isfinite(value)) {
      throw std::runtime_error("expectation: h returned non-finite value at sample index " +
                               std::to_string(b));
    }
    total += batch.pi[b] * value;
  }
  return total;
}

Vector expectation_vec(const WeightedBatch& batch,
                       const std::function<Vector(const Vector&)>& h) {
  if (batch.size() == 0) throw std::invalid_argument("expectation: empty batch");
  Vector total;
  for (Index b = 0; b < batch.size(); ++b) {
    const Vector value = h(batch.draws[b].z);
    if (!value.allFinite()) {
      throw std::runtime_error("expectation: h returned non-finite value at sample index " +
                               std::to_string(b));
    }
    if (b == 0) {
      total = batch.pi[b] * value;
    } else {
      total += batch.pi[b] * value;
    }
  }
  return total;
}

namespace {

constexpr std::array<int, 50> kPrimes = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,  59,
    61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131, 137, 139,
    149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229};

// Scrambled radical inverse of n in the given base. The infinite tail of zero
// digits maps to perm[0]; its geometric sum is added in closed form.
double radical_inverse(std::uint64_t n, int base, const std::vector<int>& perm) {
  double x = 0.0;
  double f = 1.0 / base;
  while (n > 0) {
    x += perm[n % base] * f;
    n /= base;
    f /= base;
  }
  if (perm[0] != 0) {
    x += perm[0] * f * static_cast<double>(base) / (base - 1);
  }
  return std::min(x, std::nextafter(1.0, 0.0));
}

}  // namespace

Matrix halton_points(Index m, Index dim, std::uint64_t seed, bool scramble) {
  if (dim < 1 || dim > static_cast<Index>(kPrimes.size())) {
    throw std::invalid_argument("halton_points: dim must be in [1, " +
                                std::to_string(kPrimes.size()) + "]");
  }
  std::vector<std::vector<int>> perms(dim);
  for (Index d = 0; d < dim; ++d) {
    const int base = kPrimes[d];
    perms[d].resize(base);
    std::iota(perms[d].begin(), perms[d].end(), 0);
    if (scramble) {
      RngEngine rng = engine_for(seed, static_cast<std::uint64_t>(d));
      std::shuffle(perms[d].begin(), perms[d].end(), rng);
    }
  }
  Matrix points(m, dim);
  for (Index i = 0; i < m; ++i) {
    for (Index d = 0; d < dim; ++d) {
      points(i, d) = radical_inverse(static_cast<std::uint64_t>(i) + 1, kPrimes[d], perms[d]);
    }
  }
  return points;
}

void save_batch_csv(const WeightedBatch& batch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_batch_csv: cannot write " + path);
  if (batch.size() == 0) throw std::invalid_argument("save_batch_csv: empty batch");
  const Index k = batch.draws.front().w.size();
  const Index d = batch.draws.front().z.size();
  for (Index j = 0; j < k; ++j) out << "w_" << (j + 1) << ",";
  for (Index j = 0; j < d; ++j) out << "z_" << (j + 1) << ",";
  out << "log_c,pi\n";
  char buf[32];
  const auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << sep;
  };
  for (Index b = 0; b < batch.size(); ++b) {
    const WeightedDraw& draw = batch.draws[b];
    for (Index j = 0; j < k; ++j) put(draw.w[j], ',');
    for (Index j = 0; j < d; ++j) put(draw.z[j], ',');
    put(draw.log_c, ',');
    put(batch.pi[b], '\n');
  }
}

}  // namespace poevi
