#pragma once

#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "splitls/affine_map.hpp"
#include "splitls/types.hpp"

namespace splitls {

/// A map on R^n, optionally backed by an AffineMap when the map is affine.
struct Operator {
  Index dim = 0;
  std::function<Vector(const Vector&)> fn;
  std::optional<AffineMap> affine;

  static Operator from_fn(Index dim, std::function<Vector(const Vector&)> fn);
  static Operator from_affine(AffineMap map);

  Vector operator()(const Vector& x) const {
    return affine ? (*affine)(x) : fn(x);
  }
};

/// Proximal operator prox_{gamma f}. `scale_free` marks operators that do not
/// depend on gamma (projections onto sets).
struct ProxOperator {
  Index dim = 0;
  double gamma = 1.0;
  bool scale_free = false;
  std::function<Vector(const Vector&)> fn;
  std::optional<AffineMap> affine;

  Vector operator()(const Vector& z) const {
    return affine ? (*affine)(z) : fn(z);
  }
};

/// prox of the zero function: the identity.
ProxOperator prox_zero(Index dim);

/// prox_{gamma f} for f(x) = 1/2 x'Px + q'x over {Aeq x = beq}, wrapped with
/// its AffineMap backing. See prox_quadratic_affine.
ProxOperator prox_quadratic(const Matrix& P, const Vector& q,
                            const std::optional<Matrix>& Aeq,
                            const std::optional<Vector>& beq, double gamma);

/// Reflection 2*prox - id. Affine backing is preserved.
Operator reflect(const ProxOperator& prox);

// Projectable sets.
struct NonnegativeOrthant {
  Index dim = 0;
};
struct Ball {
  Vector center;
  double radius = 1.0;
};
struct AffineSet {  // {x : A x = b}
  Matrix A;
  Vector b;
};
struct Consensus {  // stacked blocks, all equal
  Index blocks = 0;
  Index block_dim = 0;
};
struct Halfspace {  // {x : normal'x <= offset}
  Vector normal;
  double offset = 0.0;
};
struct Hyperplane {  // {x : normal'x = offset}
  Vector normal;
  double offset = 0.0;
};

using SetDescriptor =
    std::variant<NonnegativeOrthant, Ball, AffineSet, Consensus, Halfspace, Hyperplane>;

Index set_dim(const SetDescriptor& set);

/// Euclidean projection onto the set, as a gamma-independent ProxOperator.
/// Affine sets, hyperplanes, and the consensus set carry AffineMap backings;
/// AffineSet projection is realized through a cached KKT factorization and
/// rejects rank-deficient A at construction.
ProxOperator projector(const SetDescriptor& set);

/// One-shot projection.
Vector project(const SetDescriptor& set, const Vector& z);

/// Squared-distance-free membership gap: ||z - project(set, z)||_2.
double distance_to(const SetDescriptor& set, const Vector& z);

/// Blockwise consensus reflection 2*z_av - z_i over N stacked blocks.
Vector consensus_reflect(const Vector& zs, Index blocks, Index block_dim);

/// The same reflection as an AffineMap on R^{N*n}.
AffineMap consensus_reflector(Index blocks, Index block_dim);

}  // namespace splitls
