#pragma once

#include <string>
#include <vector>

#include "poevi/common.hpp"

namespace poevi {

/// Strictly convex objective (1/2) a' G a - h' a with symmetric PD G.
struct QuadraticProgram {
  QuadraticProgram(Matrix g, Vector h);

  Matrix g_matrix;
  Vector h_vector;

  Index size() const { return h_vector.size(); }
};

/// Feasible cone: alpha >= 0 componentwise, sum(alpha) >= dim/2 + epsilon.
struct FeasibleSet {
  Index dim = 1;
  double epsilon = 1e-12;

  double sum_lower_bound() const { return static_cast<double>(dim) / 2.0 + epsilon; }
  bool contains(const Vector& alpha, double tol = 0.0) const;
};

struct QpSolution {
  Vector alpha;
  double kkt_residual = 0.0;
  std::vector<Index> active_set;  // bound k tight -> k; sum constraint tight -> K
  Index iterations = 0;
};

/// Minimizer of the unconstrained objective, G^-1 h.
Vector solve_unconstrained(const QuadraticProgram& qp);

/// Unique minimizer over the feasible cone, by a primal active-set method on
/// the bound constraints plus the single half-space, warm-started when a
/// feasible guess is supplied. Throws NonConvergenceError (carrying the best
/// iterate and its residual) if the iteration cap is hit above `tol`.
QpSolution solve_constrained(const QuadraticProgram& qp, const FeasibleSet& c, double tol = 1e-8,
                             const Vector* warm_start = nullptr);

/// Infinity norm of the stacked KKT violations (stationarity, feasibility,
/// complementarity) at alpha; zero iff alpha is the constrained minimizer.
double kkt_residual(const QuadraticProgram& qp, const FeasibleSet& c, const Vector& alpha);

/// Euclidean projection onto the feasible cone: nonnegativity clip followed,
/// when the half-space is violated, by a bisection on the shift parameter.
Vector project_onto_feasible(const Vector& v, const FeasibleSet& c);

/// Debug dump of (G, h, solution) for failure triage.
std::string qp_debug_json(const QuadraticProgram& qp, const FeasibleSet& c,
                          const QpSolution& solution);

}  // namespace poevi
