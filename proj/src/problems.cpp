#include "splitls/problems.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace splitls {

Rng::Rng(std::uint64_t seed) : gen_(seed) {}

double Rng::uniform() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

namespace {

Matrix normal_matrix(Rng& rng, Index rows, Index cols) {
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = rng.normal();
  return M;
}

Vector normal_vector(Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

Matrix curvature(Rng& rng, Index n) {
  const Matrix R = normal_matrix(rng, n, n);
  return R.transpose() * R / static_cast<double>(n) +
         0.5 * Matrix::Identity(n, n);
}

void check_objective(const QuadraticObjective& f, const char* what) {
  if (f.P.rows() != f.P.cols())
    throw ConfigError(std::string(what) + ": P must be square");
  if (f.q.size() != f.P.rows())
    throw ConfigError(std::string(what) + ": q length does not match P");
}

}  // namespace

std::string kind_name(const ProblemFile& pf) {
  switch (pf.data.index()) {
    case 0: return "nnls";
    case 1: return "feasibility";
    case 2: return "qp";
    default: return "consensus";
  }
}

void validate(const ProblemFile& pf) {
  if (!(pf.params.gamma > 0.0))
    throw ConfigError("problem: gamma must be positive");
  if (!(pf.params.alpha > 0.0 && pf.params.alpha < 1.0))
    throw ConfigError("problem: alpha must lie in (0, 1)");

  if (const auto* d = std::get_if<NnlsData>(&pf.data)) {
    if (d->A.rows() < 1 || d->A.cols() < 1)
      throw ConfigError("nnls: A must be nonempty");
    if (d->b.size() != d->A.rows())
      throw ConfigError("nnls: b length does not match A rows");
  } else if (const auto* d = std::get_if<FeasibilityData>(&pf.data)) {
    if (set_dim(d->C) != set_dim(d->D))
      throw ConfigError("feasibility: set dimensions differ");
    if (d->x0.size() != set_dim(d->C))
      throw ConfigError("feasibility: x0 length does not match the sets");
  } else if (const auto* d = std::get_if<QpData>(&pf.data)) {
    check_objective(d->f, "qp (f)");
    check_objective({d->g.P, d->g.q}, "qp (g)");
    const Index n = d->f.P.rows(), m = d->g.P.rows(), p = d->A.rows();
    if (d->A.cols() != n) throw ConfigError("qp: A columns do not match f");
    if (d->B.rows() != p || d->B.cols() != m)
      throw ConfigError("qp: B shape does not match A rows and g");
    if (d->c.size() != p) throw ConfigError("qp: c length does not match A rows");
    if (d->g.Aeq.has_value() != d->g.beq.has_value())
      throw ConfigError("qp: g equality constraint needs both matrix and rhs");
    if (d->g.Aeq && (d->g.Aeq->cols() != m || d->g.beq->size() != d->g.Aeq->rows()))
      throw ConfigError("qp: g equality constraint shape mismatch");
    if (d->v0 && d->v0->size() != p)
      throw ConfigError("qp: v0 length does not match A rows");
  } else {
    const auto& cd = std::get<ConsensusData>(pf.data);
    if (cd.terms.empty()) throw ConfigError("consensus: no terms");
    const Index n = cd.terms.front().P.rows();
    for (const auto& t : cd.terms) {
      check_objective(t, "consensus term");
      if (t.P.rows() != n)
        throw ConfigError("consensus: all terms must share one dimension");
    }
    if (cd.x0 && cd.x0->size() != static_cast<Index>(cd.terms.size()) * n)
      throw ConfigError("consensus: x0 length must be terms x dimension");
  }
}

ProblemFile gen_nnls(Index n, Index m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw ConfigError("gen_nnls: dimensions must be >= 1");
  Rng rng(seed);
  NnlsData data;
  data.A = normal_matrix(rng, m, n);
  for (Index i = 0; i < m; ++i) data.A.row(i) *= rng.uniform(0.1, 1.1);
  data.b = normal_vector(rng, m);

  ProblemFile pf;
  pf.data = std::move(data);
  pf.seed = seed;
  pf.params.gamma = 3.0;
  pf.params.schedule = GeometricBacktrack{1.0 / 1.4};
  pf.params.selection = SelectionRule::FirstPassing;
  return pf;
}

ProblemFile gen_circle_line(double angle_deg) {
  const double t = angle_deg * std::numbers::pi / 180.0;
  FeasibilityData data;
  data.C = Ball{Vector::Zero(2), 1.0};
  data.D = Hyperplane{Vector::Unit(2, 0), 1.0};
  data.x0 = Vector(2);
  data.x0 << std::cos(t), std::sin(t);
  ProblemFile pf;
  pf.data = std::move(data);
  return pf;
}

ProblemFile gen_disjoint(double gap) {
  if (!(gap > 0.0)) throw ConfigError("gen_disjoint: gap must be positive");
  FeasibilityData data;
  data.C = Ball{Vector::Zero(2), 1.0};
  data.D = Hyperplane{Vector::Unit(2, 0), 1.0 + gap};
  data.x0 = Vector::Zero(2);
  ProblemFile pf;
  pf.data = std::move(data);
  return pf;
}

ProblemFile gen_qp(Index n, Index m, Index p, std::uint64_t seed) {
  if (n < 1 || m < 1 || p < 1)
    throw ConfigError("gen_qp: dimensions must be >= 1");
  Rng rng(seed);
  QpData data;
  data.f.P = curvature(rng, n);
  data.f.q = normal_vector(rng, n);
  data.g.P = curvature(rng, m);
  data.g.q = normal_vector(rng, m);
  data.A = normal_matrix(rng, p, n);
  data.B = normal_matrix(rng, p, m);
  data.c = normal_vector(rng, p);
  if (seed % 2 == 1) {
    data.g.Aeq = normal_matrix(rng, 1, m);
    data.g.beq = normal_vector(rng, 1);
  }
  data.v0 = normal_vector(rng, p);

  ProblemFile pf;
  pf.data = std::move(data);
  pf.seed = seed;
  return pf;
}

ProblemFile gen_consensus(Index count, Index dim, std::uint64_t seed) {
  if (count < 1 || dim < 1)
    throw ConfigError("gen_consensus: dimensions must be >= 1");
  Rng rng(seed);
  ConsensusData data;
  data.terms.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    QuadraticObjective f;
    f.P = curvature(rng, dim);
    f.q = normal_vector(rng, dim);
    data.terms.push_back(std::move(f));
  }

  ProblemFile pf;
  pf.data = std::move(data);
  pf.seed = seed;
  return pf;
}

}  // namespace splitls
