#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "splitls/engine.hpp"
#include "splitls/operators.hpp"
#include "splitls/splitting.hpp"
#include "splitls/types.hpp"

namespace splitls {

// Deterministic portable random stream: mt19937_64 words mapped to uniforms
// as (x >> 11) * 2^-53, normals via Box-Muller on consecutive uniforms with
// the second sample cached.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct SolverParams {
  double gamma = 1.0;
  double alpha = 0.5;
  double epsilon = 0.03;
  double alpha_max = 50.0;
  CandidateSchedule schedule = GeometricBacktrack{};
  SelectionRule selection = SelectionRule::FirstPassing;
  double tol = 1e-6;
  long max_iter = 100000;
};

struct NnlsData {
  Matrix A;
  Vector b;
};

struct FeasibilityData {
  SetDescriptor C;
  SetDescriptor D;
  Vector x0;
};

struct QpData {
  QuadraticObjective f;
  QuadraticOverAffine g;
  Matrix A;
  Matrix B;
  Vector c;
  std::optional<Vector> v0;
};

struct ConsensusData {
  std::vector<QuadraticObjective> terms;
  std::optional<Vector> x0;
};

using ProblemData = std::variant<NnlsData, FeasibilityData, QpData, ConsensusData>;

struct ProblemFile {
  ProblemData data;
  SolverParams params;
  std::uint64_t seed = 0;
};

std::string kind_name(const ProblemFile& pf);

// Dimension consistency across all stored arrays; throws ConfigError.
void validate(const ProblemFile& pf);

// min ||Ax - b||^2 over x >= 0 with dense A (m rows, n columns). Stream
// order under one Rng(seed): A entries row-major standard normal, then each
// of the m rows scaled by an independent U(0.1, 1.1) draw in row order, then
// b standard normal.
ProblemFile gen_nnls(Index n, Index m, std::uint64_t seed);

// Unit disk vs the vertical line x1 = 1 (touching at (1, 0)), starting from
// (cos angle, sin angle).
ProblemFile gen_circle_line(double angle_deg);

// Unit disk vs the vertical line x1 = 1 + gap: infeasible with set distance
// exactly gap. Rejects gap <= 0.
ProblemFile gen_disjoint(double gap);

// Random two-block QP: f, g strongly convex quadratics coupled by
// Ax + Bz = c, one equality row on g for odd seeds. Stream order: Rf (n x n
// row-major), qf, Rg (m x m), qg, A (p x n), B (p x m), c, [Aeq (1 x m),
// beq], v0 (p). Curvatures are R'R/dim + I/2.
ProblemFile gen_qp(Index n, Index m, Index p, std::uint64_t seed);

// count strongly convex quadratic terms of dimension dim; per term the
// stream yields R (dim x dim, row-major) then q, with P = R'R/dim + I/2.
ProblemFile gen_consensus(Index count, Index dim, std::uint64_t seed);

}  // namespace splitls
