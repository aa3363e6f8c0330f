#pragma once

#include <optional>
#include <vector>

#include "splitls/engine.hpp"
#include "splitls/operators.hpp"

namespace splitls {

struct QuadraticObjective {  // 1/2 x'Px + q'x
  Matrix P;
  Vector q;
};

struct QuadraticOverAffine {  // 1/2 x'Px + q'x + indicator of {Aeq x = beq}
  Matrix P;
  Vector q;
  std::optional<Matrix> Aeq;
  std::optional<Vector> beq;
};

/// Forward-backward splitting for f quadratic, g prox-friendly:
/// T1 = I - gamma*grad f (affine), T2 = prox_{gamma g}, T-form. The implied
/// averaging parameter 2/(4 - gamma*L) is recorded for bound checks.
struct ProblemFBS {
  QuadraticObjective f;
  ProxOperator g;
  double gamma = 1.0;
  std::optional<double> lipschitz;  // computed when absent
};
SplitOperator build_fbs(const ProblemFBS& prob);

/// Largest eigenvalue of a symmetric psd matrix by power iteration with a
/// deterministic start vector; stops when successive Rayleigh quotients
/// agree to 1e-12 relative.
double estimate_lipschitz(const Matrix& P);

/// Douglas-Rachford on f + g with f quadratic-over-affine (affine reflected
/// prox via the cached KKT factorization) and g prox-friendly:
/// S1 = R_{gamma f}, S2 = R_{gamma g}, S-form with averaging = relaxation.
struct ProblemDR {
  QuadraticOverAffine f;
  ProxOperator g;
  double gamma = 1.0;
  double relaxation = 0.5;
};
SplitOperator build_dr(const ProblemDR& prob);

/// Primal extraction x = prox_{gamma f}(z) from the shadow iterate.
Vector dr_solution(const ProblemDR& prob, const Vector& z);

/// DR problem for nonnegative least squares min ||Ax-b||^2 s.t. x >= 0,
/// i.e. f(x) = ||Ax-b||^2 (P = 2A'A, q = -2A'b) and g the orthant indicator.
ProblemDR nnls_dr_problem(const Matrix& A, const Vector& b, double gamma,
                          double relaxation);

/// DR on two set indicators: S1 = reflected projection onto D, S2 = reflected
/// projection onto C. Used for feasibility problems and infeasibility
/// detection fixtures; the fast path needs D's projection to be affine.
SplitOperator build_feasibility_dr(const SetDescriptor& C, const SetDescriptor& D,
                                   double relaxation);

/// ADMM for min f(x) + g(z) s.t. Ax + Bz = c, run as DR on the p-dimensional
/// v variable: S1 = R2 (affine via the KKT system [[P + rho*B'B, L'],[L, 0]]),
/// S2 = R1, averaging = relaxation, rho = 1/gamma. Residual is
/// 2(Ax + Bz - c) in the subproblem variables.
struct ProblemADMM {
  QuadraticObjective f;   // objective in x
  QuadraticOverAffine g;  // objective in z, optional equality constraint
  Matrix A;               // p x n
  Matrix B;               // p x m
  Vector c;               // length p
  double rho = 1.0;
  double relaxation = 0.5;
};
SplitOperator build_admm(const ProblemADMM& prob);

struct AdmmSolution {
  Vector x;
  Vector z;
};

/// Subproblem solutions at a given v iterate: z from the g-argmin at v, then
/// x from the f-argmin at 2Bz + v - c.
AdmmSolution admm_solution(const ProblemADMM& prob, const Vector& v);

/// Standard-form ADMM state and one iteration of the scaled-dual recursion
/// with relaxation. Exists as the independent equivalence oracle for
/// build_admm; shares no solver state with it.
struct AdmmState {
  Vector x;
  Vector x_A;
  Vector z;
  Vector u;
};
AdmmState admm_standard_iterate(const ProblemADMM& prob, const AdmmState& state);

/// Consensus splitting for min sum f_i over the consensus set: S1 = the
/// consensus reflection (affine), S2 = blockwise R_{gamma f_i}, averaging 1/2.
/// The line-search test runs on the stacked residual norm.
SplitOperator build_consensus(const std::vector<ProxOperator>& terms, double gamma);

/// Block average of prox_{gamma f_i}(2 z_av - z_i), the consensus value at an
/// (approximate) fixed point.
Vector consensus_solution(const std::vector<ProxOperator>& terms, const Vector& zs);

/// Alternating projections x+ = P_C P_D x as a T-form operator with recorded
/// averaging 2/3.
SplitOperator build_ap(const SetDescriptor& C, const SetDescriptor& D);

}  // namespace splitls
