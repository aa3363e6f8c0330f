#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "splitls/types.hpp"

namespace splitls {

/// Immutable affine operator x -> Fx + h with separate access to the linear
/// part d -> Fd. Backed by an explicit dense matrix, a cached factorization,
/// or a composition of such maps. Safe to share across threads; applying a
/// map never mutates it.
class AffineMap {
 public:
  AffineMap() = default;

  /// Explicit dense backing.
  static AffineMap dense(Matrix F, Vector h);

  /// Identity map.
  static AffineMap identity(Index dim);

  /// Arbitrary linear rule plus offset. `linear` must be a linear function of
  /// its argument; `offset` is the value at zero.
  static AffineMap from_linear(Index dim,
                               std::function<Vector(const Vector&)> linear,
                               Vector offset);

  bool valid() const { return impl_ != nullptr; }
  Index dim() const;

  /// Full application Fx + h.
  Vector operator()(const Vector& x) const;

  /// Linear part only, Fd.
  Vector linear(const Vector& d) const;

  /// Offset h = apply(0).
  const Vector& offset() const;

  /// 2*this - id.
  AffineMap reflected() const;

  /// Composition x -> this(inner(x)).
  AffineMap after(const AffineMap& inner) const;

 private:
  struct Impl {
    Index dim = 0;
    std::function<Vector(const Vector&)> lin;
    Vector h;
  };
  explicit AffineMap(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

/// Affine map z -> prox_{gamma f}(z) for f(x) = 1/2 x'Px + q'x + indicator of
/// {Aeq x = beq} (constraint optional). Builds the KKT factorization
/// [[P + I/gamma, Aeq'], [Aeq, 0]] once; every application is a solve.
/// Throws SingularMatrixError naming the rank defect if the KKT matrix is
/// singular (e.g. Aeq not full row rank), ConfigError on dimension mismatch.
AffineMap prox_quadratic_affine(const Matrix& P, const Vector& q,
                                const std::optional<Matrix>& Aeq,
                                const std::optional<Vector>& beq, double gamma);

}  // namespace splitls
