#include "poevi/expert.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace poevi {

namespace {

constexpr double kConditionLimit = 1e14;

std::string format_simplex(const Vector& w) {
  std::ostringstream oss;
  oss << "(";
  for (Index k = 0; k < w.size(); ++k) oss << (k ? ", " : "") << w[k];
  oss << ")";
  return oss.str();
}

}  // namespace

Expert::Expert(Vector mu, Matrix lambda) : mu_(std::move(mu)), lambda_(std::move(lambda)) {
  const Index d = mu_.size();
  if (d == 0) throw DimensionError("Expert: empty location vector");
  if (lambda_.rows() != d || lambda_.cols() != d) {
    throw DimensionError("Expert: lambda must be " + std::to_string(d) + "x" + std::to_string(d));
  }
  const double scale = std::max(1.0, lambda_.cwiseAbs().maxCoeff());
  if ((lambda_ - lambda_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("Expert: lambda is not symmetric within 1e-10");
  }
  lambda_ = ((lambda_ + lambda_.transpose()) / 2.0).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(lambda_);
  const Vector& ev = eig.eigenvalues();
  if (ev.minCoeff() < -1e-10 * scale) {
    throw std::invalid_argument("Expert: lambda has eigenvalue " + std::to_string(ev.minCoeff()) +
                                " below the PSD tolerance");
  }
  if (ev.minCoeff() < 0.0) {
    // Clip rounding-level negatives to the PSD cone.
    Vector clipped = ev.cwiseMax(0.0);
    lambda_ = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    lambda_ = ((lambda_ + lambda_.transpose()) / 2.0).eval();
  }
  full_rank_ = ev.minCoeff() > 1e-12 * std::max(1.0, ev.maxCoeff());
}

double Expert::quad_form(const Vector& z) const {
  require_length(z, dim(), "Expert::quad_form: z");
  const Vector v = z - mu_;
  return std::max(0.0, v.dot(lambda_ * v));
}

SimplexPoint::SimplexPoint(Vector w) : w_(std::move(w)) {
  if (w_.size() == 0) throw DimensionError("SimplexPoint: empty");
  if (w_.minCoeff() < 0.0) throw std::invalid_argument("SimplexPoint: negative coordinate");
  const double total = w_.sum();
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("SimplexPoint: coordinates sum to " + std::to_string(total));
  }
  w_ /= total;
}

PoEDensity::PoEDensity(ExpertPool experts, Vector alpha)
    : experts_(std::move(experts)), alpha_(std::move(alpha)) {
  if (experts_.empty()) throw DimensionError("PoEDensity: empty expert pool");
  const Index d = experts_.front().dim();
  for (const Expert& e : experts_) {
    if (e.dim() != d) throw DimensionError("PoEDensity: experts disagree on dimension");
  }
  if (alpha_.size() != static_cast<Index>(experts_.size())) {
    throw DimensionError("PoEDensity: alpha length " + std::to_string(alpha_.size()) +
                         " != expert count " + std::to_string(experts_.size()));
  }
  if (alpha_.size() > 0 && alpha_.minCoeff() < 0.0) {
    throw std::invalid_argument("PoEDensity: negative expert weight");
  }
}

std::vector<Index> PoEDensity::active_indices(double threshold) const {
  std::vector<Index> idx;
  for (Index k = 0; k < alpha_.size(); ++k) {
    if (alpha_[k] >= threshold) idx.push_back(k);
  }
  return idx;
}

double degrees_of_freedom(const Vector& alpha, Index dim) {
  return 2.0 * alpha.sum() - static_cast<double>(dim);
}

double poe_unnorm_log_density(const PoEDensity& poe, const Vector& z) {
  require_length(z, poe.dim(), "poe_unnorm_log_density: z");
  double total = 0.0;
  for (Index k = 0; k < poe.num_experts(); ++k) {
    total -= poe.alpha()[k] * std::log1p(poe.experts()[k].quad_form(z));
  }
  return total;
}

Matrix score_matrix(const ExpertPool& pool, const Vector& z) {
  if (pool.empty()) throw DimensionError("score_matrix: empty pool");
  const Index d = pool.front().dim();
  require_length(z, d, "score_matrix: z");
  Matrix q(d, static_cast<Index>(pool.size()));
  for (std::size_t k = 0; k < pool.size(); ++k) {
    const Expert& e = pool[k];
    const Vector v = z - e.mu();
    const Vector lv = e.lambda() * v;
    const double qf = std::max(0.0, v.dot(lv));
    q.col(static_cast<Index>(k)) = (-2.0 / (1.0 + qf)) * lv;
  }
  return q;
}

Vector poe_score(const PoEDensity& poe, const Vector& z) {
  return score_matrix(poe.experts(), z) * poe.alpha();
}

namespace detail {

// Raw Dirichlet draw via normalized Gamma(alpha_k, 1) variates. All entries of
// alpha must be positive. A single retained weight short-circuits to 1 so the
// degenerate simplex is exact.
Vector dirichlet_raw(const Vector& alpha, RngEngine& rng) {
  const Index k = alpha.size();
  if (k == 1) return Vector::Ones(1);
  Vector g(k);
  for (int attempt = 0; attempt < 4; ++attempt) {
    for (Index i = 0; i < k; ++i) {
      std::gamma_distribution<double> gamma(alpha[i], 1.0);
      g[i] = gamma(rng);
    }
    const double total = g.sum();
    if (total > 0.0 && std::isfinite(total)) return g / total;
  }
  throw std::runtime_error("dirichlet_raw: gamma draws underflowed to zero");
}

}  // namespace detail

namespace {

struct LambdaFactor {
  Eigen::LLT<Matrix> llt;
  Matrix lambda_w;       // Lambda(w), including any jitter applied
  double log_det = 0.0;  // log |Lambda(w) (+ jitter)|
  bool ok = false;
};

// Factor Lambda(w) = sum_k w_k Lambda_k; fall back to the jitter policy when
// the raw factorization fails, and reject condition numbers beyond 1e14.
LambdaFactor factor_lambda_w(const ExpertPool& experts, const Vector& w) {
  const Index d = experts.front().dim();
  Matrix lam = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < experts.size(); ++k) {
    const double wk = w[static_cast<Index>(k)];
    if (wk != 0.0) lam += wk * experts[k].lambda();
  }

  LambdaFactor out;
  out.llt.compute(lam);
  if (out.llt.info() != Eigen::Success) {
    const double jitter = 1e-10 * lam.trace() / static_cast<double>(d);
    if (!(jitter > 0.0)) return out;  // Lambda(w) is the zero matrix
    lam.diagonal().array() += jitter;
    out.llt.compute(lam);
    if (out.llt.info() != Eigen::Success) return out;
  }

  const Vector diag = out.llt.matrixLLT().diagonal();
  const double dmin = diag.minCoeff();
  const double dmax = diag.maxCoeff();
  if (!(dmin > 0.0)) return out;
  if ((dmax / dmin) * (dmax / dmin) > kConditionLimit) {
    // Cheap estimate tripped; decide with exact eigenvalues.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(lam, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kConditionLimit) return out;
  }
  out.lambda_w = std::move(lam);
  out.log_det = 2.0 * diag.array().log().sum();
  out.ok = true;
  return out;
}

}  // namespace

MixtureComponent mixture_component(const PoEDensity& poe, const SimplexPoint& w) {
  const Index k = poe.num_experts();
  const Index d = poe.dim();
  require_length(w.coords(), k, "mixture_component: w");

  const double nu = degrees_of_freedom(poe.alpha(), d);
  if (!(nu > 0.0)) {
    throw NormalizabilityError("mixture_component: 2*sum(alpha) <= D, no t-representation");
  }

  LambdaFactor lf = factor_lambda_w(poe.experts(), w.coords());
  if (!lf.ok) {
    throw SingularityError("mixture_component: Lambda(w) singular beyond jitter tolerance at w = " +
                           format_simplex(w.coords()));
  }

  Vector b = Vector::Zero(d);
  for (Index j = 0; j < k; ++j) {
    if (w[j] != 0.0) b += w[j] * (poe.experts()[j].lambda() * poe.experts()[j].mu());
  }

  MixtureComponent comp;
  comp.nu = nu;
  comp.mu_w = lf.llt.solve(b);

  double sigma2 = 0.0;
  for (Index j = 0; j < k; ++j) {
    if (w[j] == 0.0) continue;
    const Vector v = poe.experts()[j].mu() - comp.mu_w;
    sigma2 += w[j] * v.dot(poe.experts()[j].lambda() * v);
  }
  comp.sigma2_w = std::max(0.0, sigma2);

  const double scale = nu / (1.0 + comp.sigma2_w);
  comp.omega_w = scale * lf.lambda_w;
  comp.omega_chol_lower = std::sqrt(scale) * Matrix(lf.llt.matrixL());

  const double log_det_omega = static_cast<double>(d) * std::log(scale) + lf.log_det;
  comp.log_c_w = -0.5 * (log_det_omega + (nu + d) * std::log1p(comp.sigma2_w)) +
                 std::lgamma(nu / 2.0) + 0.5 * d * std::log(std::numbers::pi * nu) -
                 std::lgamma((nu + d) / 2.0);
  return comp;
}

NormalizabilityCheck check_normalizable(const PoEDensity& poe, double epsilon) {
  const Index d = poe.dim();
  const Vector& alpha = poe.alpha();
  if (alpha.minCoeff() < 0.0) {
    return {false, "negative expert weight"};
  }
  const double lhs = 2.0 * alpha.sum();
  const double rhs = static_cast<double>(d) + 2.0 * epsilon;
  if (!(lhs > rhs)) {
    std::ostringstream oss;
    oss << "2*sum(alpha) = " << lhs << " must exceed D + 2*eps = " << rhs;
    return {false, oss.str()};
  }

  const std::vector<Index> active = poe.active_indices();
  if (active.empty()) {
    return {false, "all expert weights below the prune threshold"};
  }

  bool all_full_rank = true;
  for (Index j : active) {
    if (!poe.experts()[j].full_rank()) all_full_rank = false;
  }
  if (all_full_rank) return {true, ""};

  // Rank-deficient experts present: integrability is verified empirically by
  // requiring Lambda(w) to factor (post-jitter) on 1e4 Dirichlet draws.
  ExpertPool reduced;
  Vector reduced_alpha(static_cast<Index>(active.size()));
  for (std::size_t i = 0; i < active.size(); ++i) {
    reduced.push_back(poe.experts()[active[i]]);
    reduced_alpha[static_cast<Index>(i)] = alpha[active[i]];
  }
  constexpr std::uint64_t kTailCheckSeed = 0x7A11C4ECull;
  constexpr int kTailDraws = 10000;
  for (int i = 0; i < kTailDraws; ++i) {
    RngEngine rng = engine_for(kTailCheckSeed, static_cast<std::uint64_t>(i));
    const Vector w = detail::dirichlet_raw(reduced_alpha, rng);
    if (!factor_lambda_w(reduced, w).ok) {
      std::ostringstream oss;
      oss << "Lambda(w) not positive definite at Dirichlet draw " << i
          << ", w = " << format_simplex(w);
      return {false, oss.str()};
    }
  }
  return {true, ""};
}

MonteCarloEstimate mixture_density_stats(const PoEDensity& poe, const Vector& z,
                                         std::uint64_t n_w, std::uint64_t seed) {
  require_length(z, poe.dim(), "mixture_density_estimate: z");
  if (n_w == 0) throw std::invalid_argument("mixture_density_estimate: n_w must be positive");
  const NormalizabilityCheck check = check_normalizable(poe);
  if (!check.ok) throw NormalizabilityError("mixture_density_estimate: " + check.reason);

  const std::vector<Index> active = poe.active_indices();
  ExpertPool reduced;
  Vector reduced_alpha(static_cast<Index>(active.size()));
  for (std::size_t i = 0; i < active.size(); ++i) {
    reduced.push_back(poe.experts()[active[i]]);
    reduced_alpha[static_cast<Index>(i)] = poe.alpha()[active[i]];
  }
  const PoEDensity reduced_poe(reduced, reduced_alpha);
  const double half_exp = (reduced_poe.alpha().sum());  // (nu + D) / 2

  std::vector<double> log_terms(n_w);
  for (std::uint64_t i = 0; i < n_w; ++i) {
    RngEngine rng = engine_for(seed, i);
    const SimplexPoint w(detail::dirichlet_raw(reduced_alpha, rng));
    const MixtureComponent comp = mixture_component(reduced_poe, w);
    const Vector v = z - comp.mu_w;
    const double qf = std::max(0.0, v.dot(comp.omega_w * v));
    log_terms[i] =
        -half_exp * (std::log1p(comp.sigma2_w) + std::log1p(qf / comp.nu));
  }

  // Average in a scaled domain so heavy-weight draws do not overflow.
  const double m = *std::max_element(log_terms.begin(), log_terms.end());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double lt : log_terms) {
    const double t = std::exp(lt - m);
    sum += t;
    sum_sq += t * t;
  }
  const double n = static_cast<double>(n_w);
  const double mean_scaled = sum / n;
  const double var_scaled = std::max(0.0, sum_sq / n - mean_scaled * mean_scaled);

  MonteCarloEstimate est;
  est.value = std::exp(m) * mean_scaled;
  est.standard_error = n_w > 1 ? std::exp(m) * std::sqrt(var_scaled / (n - 1.0)) : 0.0;
  return est;
}

double mixture_density_estimate(const PoEDensity& poe, const Vector& z, std::uint64_t n_w,
                                std::uint64_t seed) {
  return mixture_density_stats(poe, z, n_w, seed).value;
}

}  // namespace poevi
