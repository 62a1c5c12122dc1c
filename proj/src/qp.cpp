#include "poevi/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace poevi {

QuadraticProgram::QuadraticProgram(Matrix g, Vector h)
    : g_matrix(std::move(g)), h_vector(std::move(h)) {
  const Index k = h_vector.size();
  if (g_matrix.rows() != k || g_matrix.cols() != k) {
    throw DimensionError("QuadraticProgram: G must be " + std::to_string(k) + "x" +
                         std::to_string(k));
  }
  const double scale = std::max(1.0, g_matrix.cwiseAbs().maxCoeff());
  if ((g_matrix - g_matrix.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("QuadraticProgram: G is not symmetric within 1e-10");
  }
  g_matrix = ((g_matrix + g_matrix.transpose()) / 2.0).eval();
  if (Eigen::LLT<Matrix>(g_matrix).info() != Eigen::Success) {
    throw std::invalid_argument("QuadraticProgram: G is not positive definite");
  }
}

bool FeasibleSet::contains(const Vector& alpha, double tol) const {
  return alpha.minCoeff() >= -tol && alpha.sum() >= sum_lower_bound() - tol;
}

Vector solve_unconstrained(const QuadraticProgram& qp) {
  Eigen::LLT<Matrix> llt(qp.g_matrix);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("solve_unconstrained: factorization of G failed");
  }
  return llt.solve(qp.h_vector);
}

Vector project_onto_feasible(const Vector& v, const FeasibleSet& c) {
  const double bound = c.sum_lower_bound();
  Vector x = v.cwiseMax(0.0);
  if (x.sum() >= bound) return x;

  // Half-space correction: find theta >= 0 with sum(max(0, v + theta)) = bound.
  const auto shifted_sum = [&](double theta) { return (v.array() + theta).max(0.0).sum(); };
  double lo = 0.0;
  double hi = std::max(1.0, bound);
  while (shifted_sum(hi) < bound) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (shifted_sum(mid) < bound ? lo : hi) = mid;
  }
  x = (v.array() + hi).max(0.0);

  // Land exactly on (or epsilon above) the half-space boundary.
  double total = x.sum();
  if (total > 0.0) x *= bound / total;
  while (x.sum() < bound) x *= 1.0 + std::numeric_limits<double>::epsilon();
  return x;
}

namespace {

struct WorkingSet {
  std::vector<bool> bound;  // bound[k]: alpha_k pinned at 0
  bool sum = false;         // sum(alpha) pinned at the lower bound
};

// Equality-constrained step on the free coordinates. Returns the step p (full
// length, zero on pinned coordinates) and the sum-constraint multiplier.
struct EqStep {
  Vector p;
  double sum_multiplier = 0.0;
};

EqStep equality_step(const QuadraticProgram& qp, const WorkingSet& ws, const Vector& gradient) {
  const Index k = qp.size();
  std::vector<Index> free;
  for (Index i = 0; i < k; ++i) {
    if (!ws.bound[i]) free.push_back(i);
  }
  EqStep step;
  step.p = Vector::Zero(k);
  if (free.empty()) return step;

  const Index f = static_cast<Index>(free.size());
  Matrix gff(f, f);
  Vector gf(f);
  for (Index a = 0; a < f; ++a) {
    gf[a] = gradient[free[a]];
    for (Index b = 0; b < f; ++b) gff(a, b) = qp.g_matrix(free[a], free[b]);
  }
  Eigen::LLT<Matrix> llt(gff);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("solve_constrained: free-block factorization failed");
  }
  Vector pf;
  if (ws.sum) {
    const Vector y1 = llt.solve(gf);
    const Vector y2 = llt.solve(Vector::Ones(f));
    step.sum_multiplier = y1.sum() / y2.sum();
    pf = step.sum_multiplier * y2 - y1;
  } else {
    pf = -llt.solve(gf);
  }
  for (Index a = 0; a < f; ++a) step.p[free[a]] = pf[a];
  return step;
}

}  // namespace

double kkt_residual(const QuadraticProgram& qp, const FeasibleSet& c, const Vector& alpha) {
  require_length(alpha, qp.size(), "kkt_residual: alpha");
  const double bound = c.sum_lower_bound();
  const Vector g = qp.g_matrix * alpha - qp.h_vector;

  double residual = std::max(0.0, -alpha.minCoeff());                 // primal: bounds
  residual = std::max(residual, bound - alpha.sum());                 // primal: half-space
  residual = std::max(residual, 0.0);

  const double a_tol = 1e-10 * (1.0 + alpha.cwiseAbs().maxCoeff());
  const bool sum_active = std::abs(alpha.sum() - bound) <= a_tol * std::max(1.0, bound);

  double free_sum = 0.0;
  Index free_count = 0;
  for (Index i = 0; i < alpha.size(); ++i) {
    if (alpha[i] > a_tol) {
      free_sum += g[i];
      ++free_count;
    }
  }
  const double lambda_sum =
      (sum_active && free_count > 0) ? std::max(0.0, free_sum / free_count) : 0.0;

  for (Index i = 0; i < alpha.size(); ++i) {
    if (alpha[i] > a_tol) {
      residual = std::max(residual, std::abs(g[i] - lambda_sum));  // stationarity, free
    } else {
      const double mult = g[i] - lambda_sum;
      residual = std::max(residual, std::max(0.0, -mult));           // dual feasibility
      residual = std::max(residual, std::abs(std::max(0.0, mult) * alpha[i]));  // comp.
    }
  }
  residual = std::max(residual, std::abs(lambda_sum * (alpha.sum() - bound)));
  return residual;
}

QpSolution solve_constrained(const QuadraticProgram& qp, const FeasibleSet& c, double tol,
                             const Vector* warm_start) {
  const Index k = qp.size();
  const double bound = c.sum_lower_bound();

  Vector alpha = warm_start != nullptr && warm_start->size() == k
                     ? project_onto_feasible(*warm_start, c)
                     : project_onto_feasible(Vector::Constant(k, bound / k), c);

  WorkingSet ws;
  ws.bound.assign(k, false);
  for (Index i = 0; i < k; ++i) ws.bound[i] = alpha[i] == 0.0;
  ws.sum = alpha.sum() <= bound * (1.0 + 1e-14);

  const Index max_iterations = 50 * (k + 1) + 100;
  Index stall = 0;  // iterations without a real move; triggers Bland's rule
  QpSolution best;
  best.alpha = alpha;
  best.kkt_residual = kkt_residual(qp, c, alpha);

  Index it = 0;
  for (; it < max_iterations; ++it) {
    const bool bland = stall > k + 2;
    const Vector gradient = qp.g_matrix * alpha - qp.h_vector;
    const EqStep step = equality_step(qp, ws, gradient);
    const double step_scale = 1e-13 * (1.0 + alpha.cwiseAbs().maxCoeff());

    if (step.p.cwiseAbs().maxCoeff() <= step_scale) {
      // Stationary on the working set: inspect multipliers. Default: release
      // the most negative one; under the cycling guard, the smallest index.
      const double lambda_sum = ws.sum ? step.sum_multiplier : 0.0;
      Index worst = -1;
      double worst_mult = -tol;
      bool worst_is_sum = false;
      for (Index i = 0; i < k; ++i) {
        if (!ws.bound[i]) continue;
        const double mult = gradient[i] - lambda_sum;
        if (bland ? (mult < -tol && worst < 0) : (mult < worst_mult)) {
          worst_mult = mult;
          worst = i;
          worst_is_sum = false;
        }
      }
      if (ws.sum) {
        if (bland ? (lambda_sum < -tol && worst < 0) : (lambda_sum < worst_mult)) {
          worst_is_sum = true;
          worst = k;
        }
      }
      if (worst < 0) break;  // all multipliers acceptable: optimal
      if (worst_is_sum) {
        ws.sum = false;
      } else {
        ws.bound[worst] = false;
      }
      ++stall;
      continue;
    }

    // Ratio test against the constraints outside the working set.
    double t = 1.0;
    Index blocker = -1;
    bool blocker_is_sum = false;
    for (Index i = 0; i < k; ++i) {
      if (ws.bound[i] || step.p[i] >= 0.0) continue;
      const double ti = alpha[i] / -step.p[i];
      if (ti < t) {
        t = ti;
        blocker = i;
        blocker_is_sum = false;
      }
    }
    if (!ws.sum) {
      const double dir_sum = step.p.sum();
      if (dir_sum < 0.0) {
        const double ti = (alpha.sum() - bound) / -dir_sum;
        if (ti < t) {
          t = ti;
          blocker = k;
          blocker_is_sum = true;
        }
      }
    }

    if (t * step.p.cwiseAbs().maxCoeff() <= step_scale) {
      ++stall;  // degenerate pivot: working set changes, iterate does not
    } else {
      stall = 0;
    }

    alpha += t * step.p;
    for (Index i = 0; i < k; ++i) {
      if (ws.bound[i]) alpha[i] = 0.0;
    }
    if (blocker >= 0) {
      if (blocker_is_sum) {
        ws.sum = true;
        const double total = alpha.sum();
        if (total > 0.0) alpha *= bound / total;  // snap onto the face
      } else {
        ws.bound[blocker] = true;
        alpha[blocker] = 0.0;
      }
    }

    const double res = kkt_residual(qp, c, alpha);
    if (res < best.kkt_residual) {
      best.alpha = alpha;
      best.kkt_residual = res;
    }
  }

  // Feasibility cleanup: working bounds are exact zeros already; clamp any
  // rounding-level negatives and restore the half-space exactly.
  alpha = alpha.cwiseMax(0.0);
  if (alpha.sum() < bound) alpha = project_onto_feasible(alpha, c);

  QpSolution solution;
  solution.alpha = alpha;
  solution.iterations = it;
  solution.kkt_residual = kkt_residual(qp, c, alpha);
  for (Index i = 0; i < k; ++i) {
    if (alpha[i] == 0.0) solution.active_set.push_back(i);
  }
  if (alpha.sum() <= bound * (1.0 + 1e-14)) solution.active_set.push_back(k);

  if (solution.kkt_residual > tol) {
    if (best.kkt_residual < solution.kkt_residual) solution = std::move(best);
    if (solution.kkt_residual > tol) {
      throw NonConvergenceError("solve_constrained: KKT residual " +
                                    std::to_string(solution.kkt_residual) +
                                    " above tolerance after " + std::to_string(it) +
                                    " iterations",
                                solution.alpha, solution.kkt_residual);
    }
  }
  return solution;
}

std::string qp_debug_json(const QuadraticProgram& qp, const FeasibleSet& c,
                          const QpSolution& solution) {
  nlohmann::json doc;
  for (Index i = 0; i < qp.size(); ++i) {
    doc["g"].push_back(std::vector<double>(qp.g_matrix.row(i).begin(), qp.g_matrix.row(i).end()));
  }
  doc["h"] = std::vector<double>(qp.h_vector.begin(), qp.h_vector.end());
  doc["dim"] = c.dim;
  doc["epsilon"] = c.epsilon;
  doc["alpha"] = std::vector<double>(solution.alpha.begin(), solution.alpha.end());
  doc["kkt_residual"] = solution.kkt_residual;
  doc["active_set"] = solution.active_set;
  doc["iterations"] = solution.iterations;
  return doc.dump(2);
}

}  // namespace poevi
