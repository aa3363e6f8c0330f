#include "splitls/splitting.hpp"

#include <Eigen/LU>
#include <cmath>
#include <memory>
#include <random>
#include <utility>

namespace splitls {

namespace {

void check_quadratic(const Matrix& P, const Vector& q, const char* what) {
  if (P.rows() != P.cols())
    throw ConfigError(std::string(what) + ": P must be square");
  if (q.size() != P.rows())
    throw ConfigError(std::string(what) + ": q length does not match P");
  const double scale = std::max(1.0, P.lpNorm<Eigen::Infinity>());
  if ((P - P.transpose()).lpNorm<Eigen::Infinity>() > 1e-10 * scale)
    throw ConfigError(std::string(what) + ": P must be symmetric");
}

void check_prox_gamma(const ProxOperator& g, double gamma, const char* what) {
  if (!g.scale_free && std::abs(g.gamma - gamma) > 1e-12 * std::max(1.0, gamma))
    throw ConfigError(std::string(what) + ": g was built with gamma " +
                      std::to_string(g.gamma) + " but the problem uses " +
                      std::to_string(gamma));
}

std::shared_ptr<Eigen::FullPivLU<Matrix>> factorize_or_throw(const Matrix& M,
                                                             const char* what) {
  auto lu = std::make_shared<Eigen::FullPivLU<Matrix>>(M);
  if (!lu->isInvertible()) {
    const Index rank = lu->rank();
    throw SingularMatrixError(
        std::string(what) + ": singular system, rank " + std::to_string(rank) +
            " of " + std::to_string(M.rows()) + " (defect " +
            std::to_string(M.rows() - rank) + "); the subproblem infimum is "
            "not attained",
        rank, M.rows());
  }
  return lu;
}

}  // namespace

double estimate_lipschitz(const Matrix& P) {
  check_quadratic(P, Vector::Zero(P.rows()), "estimate_lipschitz");
  const Index n = P.rows();
  if (n == 0) return 0.0;
  std::mt19937_64 gen(0x9e3779b97f4a7c15ULL);
  Vector v(n);
  for (Index i = 0; i < n; ++i)
    v[i] = static_cast<double>(gen() >> 11) * 0x1.0p-53 - 0.5;
  const double vn = v.norm();
  if (vn == 0.0) return 0.0;
  v /= vn;
  double lambda = v.dot(P * v);
  const long cap = 100000;
  for (long it = 0; it < cap; ++it) {
    Vector w = P * v;
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    const double next = v.dot(P * v);
    if (std::abs(next - lambda) <= 1e-12 * std::max(1.0, std::abs(next)))
      return next;
    lambda = next;
  }
  throw NumericalError("estimate_lipschitz: power iteration did not converge", cap);
}

SplitOperator build_fbs(const ProblemFBS& prob) {
  check_quadratic(prob.f.P, prob.f.q, "build_fbs");
  const Index n = prob.f.P.rows();
  if (prob.g.dim != n)
    throw ConfigError("build_fbs: g dimension " + std::to_string(prob.g.dim) +
                      " does not match f dimension " + std::to_string(n));
  if (!(prob.gamma > 0.0)) throw ConfigError("build_fbs: gamma must be positive");
  check_prox_gamma(prob.g, prob.gamma, "build_fbs");
  const double L = prob.lipschitz ? *prob.lipschitz : estimate_lipschitz(prob.f.P);
  if (L < 0.0) throw ConfigError("build_fbs: Lipschitz constant must be nonnegative");
  if (L > 0.0 && !(prob.gamma < 2.0 / L))
    throw ConfigError("build_fbs: gamma must lie strictly in (0, 2/L), got gamma " +
                      std::to_string(prob.gamma) + " with L " + std::to_string(L));

  SplitOperator op;
  op.form = Form::TForm;
  op.averaging = 2.0 / (4.0 - prob.gamma * L);
  op.s1 = Operator::from_affine(AffineMap::dense(
      Matrix::Identity(n, n) - prob.gamma * prob.f.P, -prob.gamma * prob.f.q));
  op.s2 = prob.g.affine ? Operator::from_affine(*prob.g.affine)
                        : Operator::from_fn(n, prob.g.fn);
  return op;
}

SplitOperator build_dr(const ProblemDR& prob) {
  check_quadratic(prob.f.P, prob.f.q, "build_dr");
  const Index n = prob.f.P.rows();
  if (prob.g.dim != n)
    throw ConfigError("build_dr: g dimension " + std::to_string(prob.g.dim) +
                      " does not match f dimension " + std::to_string(n));
  if (!(prob.gamma > 0.0)) throw ConfigError("build_dr: gamma must be positive");
  check_prox_gamma(prob.g, prob.gamma, "build_dr");

  ProxOperator prox_f =
      prox_quadratic(prob.f.P, prob.f.q, prob.f.Aeq, prob.f.beq, prob.gamma);
  SplitOperator op;
  op.form = Form::SForm;
  op.averaging = prob.relaxation;
  op.s1 = reflect(prox_f);
  op.s2 = reflect(prob.g);
  return op;
}

Vector dr_solution(const ProblemDR& prob, const Vector& z) {
  return prox_quadratic(prob.f.P, prob.f.q, prob.f.Aeq, prob.f.beq, prob.gamma)(z);
}

ProblemDR nnls_dr_problem(const Matrix& A, const Vector& b, double gamma,
                          double relaxation) {
  if (A.rows() != b.size())
    throw ConfigError("nnls_dr_problem: A rows do not match b length");
  ProblemDR prob;
  prob.f.P = 2.0 * A.transpose() * A;
  prob.f.q = -2.0 * A.transpose() * b;
  prob.g = projector(NonnegativeOrthant{A.cols()});
  prob.gamma = gamma;
  prob.relaxation = relaxation;
  return prob;
}

SplitOperator build_feasibility_dr(const SetDescriptor& C, const SetDescriptor& D,
                                   double relaxation) {
  if (set_dim(C) != set_dim(D))
    throw ConfigError("build_feasibility_dr: set dimensions differ");
  SplitOperator op;
  op.form = Form::SForm;
  op.averaging = relaxation;
  op.s1 = reflect(projector(D));
  op.s2 = reflect(projector(C));
  return op;
}

namespace {

struct AdmmDims {
  Index n, m, p, s;
};

AdmmDims check_admm(const ProblemADMM& prob) {
  check_quadratic(prob.f.P, prob.f.q, "build_admm (f)");
  check_quadratic(prob.g.P, prob.g.q, "build_admm (g)");
  AdmmDims d{prob.f.P.rows(), prob.g.P.rows(), prob.A.rows(), 0};
  if (prob.A.cols() != d.n)
    throw ConfigError("build_admm: A columns do not match f dimension");
  if (prob.B.rows() != d.p || prob.B.cols() != d.m)
    throw ConfigError("build_admm: B must be " + std::to_string(d.p) + "x" +
                      std::to_string(d.m));
  if (prob.c.size() != d.p)
    throw ConfigError("build_admm: c length does not match A rows");
  if (prob.g.Aeq.has_value() != prob.g.beq.has_value())
    throw ConfigError("build_admm: g equality constraint needs both matrix and rhs");
  if (prob.g.Aeq) {
    d.s = prob.g.Aeq->rows();
    if (prob.g.Aeq->cols() != d.m)
      throw ConfigError("build_admm: g constraint columns do not match g dimension");
    if (prob.g.beq->size() != d.s)
      throw ConfigError("build_admm: g constraint rhs length mismatch");
  }
  if (!(prob.rho > 0.0)) throw ConfigError("build_admm: rho must be positive");
  return d;
}

Matrix admm_g_kkt(const ProblemADMM& prob, const AdmmDims& d) {
  Matrix K = Matrix::Zero(d.m + d.s, d.m + d.s);
  K.topLeftCorner(d.m, d.m) = prob.g.P + prob.rho * prob.B.transpose() * prob.B;
  if (d.s > 0) {
    K.topRightCorner(d.m, d.s) = prob.g.Aeq->transpose();
    K.bottomLeftCorner(d.s, d.m) = *prob.g.Aeq;
  }
  return K;
}

}  // namespace

SplitOperator build_admm(const ProblemADMM& prob) {
  const AdmmDims d = check_admm(prob);
  const double rho = prob.rho;

  auto lu_f = factorize_or_throw(
      prob.f.P + rho * prob.A.transpose() * prob.A, "build_admm (x subproblem)");
  auto lu_g = factorize_or_throw(admm_g_kkt(prob, d), "build_admm (z subproblem)");

  // S1 = R2: v -> -2B*argmin_z{g(z) + rho/2 ||Bz + v||^2} - v, affine in v.
  auto z_solve = [lu_g, B = prob.B, qg = prob.g.q, beq = prob.g.beq, rho,
                  m = d.m, s = d.s](const Vector& v) -> Vector {
    Vector rhs = Vector::Zero(m + s);
    rhs.head(m) = -qg - rho * (B.transpose() * v);
    if (s > 0) rhs.tail(s) = *beq;
    return lu_g->solve(rhs).head(m);
  };
  auto r2_linear = [lu_g, B = prob.B, rho, m = d.m, s = d.s](const Vector& dv) -> Vector {
    Vector rhs = Vector::Zero(m + s);
    rhs.head(m) = -rho * (B.transpose() * dv);
    return -2.0 * (B * lu_g->solve(rhs).head(m)) - dv;
  };
  Vector r2_offset = -2.0 * (prob.B * z_solve(Vector::Zero(d.p)));

  // S2 = R1: v -> 2A*argmin_x{f(x) + rho/2 ||Ax - v - c||^2} - 2c - v.
  auto r1 = [lu_f, A = prob.A, qf = prob.f.q, c = prob.c, rho](const Vector& v) -> Vector {
    const Vector x = lu_f->solve(-qf + rho * (A.transpose() * (v + c)));
    return 2.0 * (A * x) - 2.0 * c - v;
  };

  SplitOperator op;
  op.form = Form::SForm;
  op.averaging = prob.relaxation;
  op.s1 = Operator::from_affine(
      AffineMap::from_linear(d.p, std::move(r2_linear), std::move(r2_offset)));
  op.s2 = Operator::from_fn(d.p, std::move(r1));
  return op;
}

AdmmSolution admm_solution(const ProblemADMM& prob, const Vector& v) {
  const AdmmDims d = check_admm(prob);
  if (v.size() != d.p)
    throw ConfigError("admm_solution: v length does not match constraint dimension");
  const double rho = prob.rho;
  auto lu_g = factorize_or_throw(admm_g_kkt(prob, d), "admm_solution (z subproblem)");
  Vector rhs = Vector::Zero(d.m + d.s);
  rhs.head(d.m) = -prob.g.q - rho * (prob.B.transpose() * v);
  if (d.s > 0) rhs.tail(d.s) = *prob.g.beq;
  AdmmSolution sol;
  sol.z = lu_g->solve(rhs).head(d.m);
  auto lu_f = factorize_or_throw(
      prob.f.P + rho * prob.A.transpose() * prob.A, "admm_solution (x subproblem)");
  const Vector w = 2.0 * (prob.B * sol.z) + v - prob.c;
  sol.x = lu_f->solve(-prob.f.q - rho * (prob.A.transpose() * w));
  return sol;
}

AdmmState admm_standard_iterate(const ProblemADMM& prob, const AdmmState& state) {
  const AdmmDims d = check_admm(prob);
  if (state.z.size() != d.m || state.u.size() != d.p)
    throw ConfigError("admm_standard_iterate: state dimensions inconsistent");
  const double rho = prob.rho;
  const double alpha = prob.relaxation;

  Eigen::FullPivLU<Matrix> lu_f(prob.f.P + rho * prob.A.transpose() * prob.A);
  if (!lu_f.isInvertible())
    throw SingularMatrixError("admm_standard_iterate: singular x subproblem",
                              lu_f.rank(), d.n);
  Eigen::FullPivLU<Matrix> lu_g(admm_g_kkt(prob, d));
  if (!lu_g.isInvertible())
    throw SingularMatrixError("admm_standard_iterate: singular z subproblem",
                              lu_g.rank(), d.m + d.s);

  AdmmState next;
  const Vector bz_c = prob.B * state.z - prob.c;
  next.x = lu_f.solve(-prob.f.q - rho * (prob.A.transpose() * (bz_c + state.u)));
  next.x_A = 2.0 * alpha * (prob.A * next.x) - (1.0 - 2.0 * alpha) * bz_c;
  Vector rhs = Vector::Zero(d.m + d.s);
  rhs.head(d.m) =
      -prob.g.q - rho * (prob.B.transpose() * (next.x_A - prob.c + state.u));
  if (d.s > 0) rhs.tail(d.s) = *prob.g.beq;
  next.z = lu_g.solve(rhs).head(d.m);
  next.u = state.u + next.x_A + prob.B * next.z - prob.c;
  return next;
}

SplitOperator build_consensus(const std::vector<ProxOperator>& terms, double gamma) {
  if (terms.empty()) throw ConfigError("build_consensus: no terms");
  const Index n = terms.front().dim;
  for (const auto& t : terms) {
    if (t.dim != n)
      throw ConfigError("build_consensus: all terms must share one dimension");
    check_prox_gamma(t, gamma, "build_consensus");
  }
  const Index blocks = static_cast<Index>(terms.size());

  SplitOperator op;
  op.form = Form::SForm;
  op.averaging = 0.5;
  op.s1 = Operator::from_affine(consensus_reflector(blocks, n));
  op.s2 = Operator::from_fn(blocks * n, [terms, blocks, n](const Vector& w) -> Vector {
    Vector out(blocks * n);
    for (Index i = 0; i < blocks; ++i) {
      const Vector wi = w.segment(i * n, n);
      out.segment(i * n, n) = 2.0 * terms[static_cast<std::size_t>(i)](wi) - wi;
    }
    return out;
  });
  return op;
}

Vector consensus_solution(const std::vector<ProxOperator>& terms, const Vector& zs) {
  if (terms.empty()) throw ConfigError("consensus_solution: no terms");
  const Index n = terms.front().dim;
  const Index blocks = static_cast<Index>(terms.size());
  if (zs.size() != blocks * n)
    throw ConfigError("consensus_solution: stacked length mismatch");
  const Vector reflected = consensus_reflect(zs, blocks, n);
  Vector mean = Vector::Zero(n);
  for (Index i = 0; i < blocks; ++i)
    mean += terms[static_cast<std::size_t>(i)](reflected.segment(i * n, n));
  return mean / static_cast<double>(blocks);
}

SplitOperator build_ap(const SetDescriptor& C, const SetDescriptor& D) {
  if (set_dim(C) != set_dim(D))
    throw ConfigError("build_ap: set dimensions differ");
  ProxOperator pd = projector(D);
  ProxOperator pc = projector(C);
  SplitOperator op;
  op.form = Form::TForm;
  op.averaging = 2.0 / 3.0;
  op.s1 = pd.affine ? Operator::from_affine(*pd.affine)
                    : Operator::from_fn(pd.dim, pd.fn);
  op.s2 = pc.affine ? Operator::from_affine(*pc.affine)
                    : Operator::from_fn(pc.dim, pc.fn);
  return op;
}

}  // namespace splitls
