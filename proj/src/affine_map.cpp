#include "splitls/affine_map.hpp"

#include <Eigen/LU>
#include <utility>

namespace splitls {

AffineMap AffineMap::dense(Matrix F, Vector h) {
  if (F.rows() != h.size())
    throw ConfigError("AffineMap::dense: F has " + std::to_string(F.rows()) +
                      " rows but h has length " + std::to_string(h.size()));
  auto impl = std::make_shared<Impl>();
  impl->dim = F.cols();
  impl->lin = [F = std::move(F)](const Vector& d) -> Vector { return F * d; };
  impl->h = std::move(h);
  return AffineMap(std::move(impl));
}

AffineMap AffineMap::identity(Index dim) {
  auto impl = std::make_shared<Impl>();
  impl->dim = dim;
  impl->lin = [](const Vector& d) -> Vector { return d; };
  impl->h = Vector::Zero(dim);
  return AffineMap(std::move(impl));
}

AffineMap AffineMap::from_linear(Index dim,
                                 std::function<Vector(const Vector&)> linear,
                                 Vector offset) {
  if (!linear) throw ConfigError("AffineMap::from_linear: empty linear rule");
  auto impl = std::make_shared<Impl>();
  impl->dim = dim;
  impl->lin = std::move(linear);
  impl->h = std::move(offset);
  return AffineMap(std::move(impl));
}

Index AffineMap::dim() const {
  if (!impl_) throw ConfigError("AffineMap: used before initialization");
  return impl_->dim;
}

Vector AffineMap::operator()(const Vector& x) const {
  if (!impl_) throw ConfigError("AffineMap: used before initialization");
  if (x.size() != impl_->dim)
    throw ConfigError("AffineMap: input length " + std::to_string(x.size()) +
                      " does not match dimension " + std::to_string(impl_->dim));
  return impl_->lin(x) + impl_->h;
}

Vector AffineMap::linear(const Vector& d) const {
  if (!impl_) throw ConfigError("AffineMap: used before initialization");
  if (d.size() != impl_->dim)
    throw ConfigError("AffineMap: input length " + std::to_string(d.size()) +
                      " does not match dimension " + std::to_string(impl_->dim));
  return impl_->lin(d);
}

const Vector& AffineMap::offset() const {
  if (!impl_) throw ConfigError("AffineMap: used before initialization");
  return impl_->h;
}

AffineMap AffineMap::reflected() const {
  if (!impl_) throw ConfigError("AffineMap: used before initialization");
  auto impl = std::make_shared<Impl>();
  impl->dim = impl_->dim;
  impl->lin = [inner = impl_](const Vector& d) -> Vector {
    return 2.0 * inner->lin(d) - d;
  };
  impl->h = 2.0 * impl_->h;
  return AffineMap(std::move(impl));
}

AffineMap AffineMap::after(const AffineMap& inner) const {
  if (!impl_ || !inner.impl_)
    throw ConfigError("AffineMap::after: used before initialization");
  auto impl = std::make_shared<Impl>();
  impl->dim = inner.impl_->dim;
  impl->lin = [outer = impl_, in = inner.impl_](const Vector& d) -> Vector {
    return outer->lin(in->lin(d));
  };
  impl->h = impl_->lin(inner.impl_->h) + impl_->h;
  return AffineMap(std::move(impl));
}

AffineMap prox_quadratic_affine(const Matrix& P, const Vector& q,
                                const std::optional<Matrix>& Aeq,
                                const std::optional<Vector>& beq, double gamma) {
  const Index n = P.rows();
  if (P.cols() != n)
    throw ConfigError("prox_quadratic_affine: P must be square, got " +
                      std::to_string(P.rows()) + "x" + std::to_string(P.cols()));
  if (q.size() != n)
    throw ConfigError("prox_quadratic_affine: q length " + std::to_string(q.size()) +
                      " does not match P dimension " + std::to_string(n));
  if (!(gamma > 0.0))
    throw ConfigError("prox_quadratic_affine: gamma must be positive");
  const double scale = std::max(1.0, P.lpNorm<Eigen::Infinity>());
  if ((P - P.transpose()).lpNorm<Eigen::Infinity>() > 1e-10 * scale)
    throw ConfigError("prox_quadratic_affine: P must be symmetric");
  if (Aeq.has_value() != beq.has_value())
    throw ConfigError("prox_quadratic_affine: Aeq and beq must be given together");

  const Index m = Aeq ? Aeq->rows() : 0;
  if (Aeq) {
    if (Aeq->cols() != n)
      throw ConfigError("prox_quadratic_affine: Aeq has " + std::to_string(Aeq->cols()) +
                        " columns, expected " + std::to_string(n));
    if (beq->size() != m)
      throw ConfigError("prox_quadratic_affine: beq length " + std::to_string(beq->size()) +
                        " does not match Aeq rows " + std::to_string(m));
  }

  Matrix K = Matrix::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = P + Matrix::Identity(n, n) / gamma;
  if (m > 0) {
    K.topRightCorner(n, m) = Aeq->transpose();
    K.bottomLeftCorner(m, n) = *Aeq;
  }

  auto lu = std::make_shared<Eigen::FullPivLU<Matrix>>(K);
  if (!lu->isInvertible()) {
    const Index rank = lu->rank();
    throw SingularMatrixError(
        "prox_quadratic_affine: singular KKT matrix, rank " + std::to_string(rank) +
            " of " + std::to_string(n + m) + " (defect " +
            std::to_string(n + m - rank) + "); equality constraints rank "
            "deficient or curvature vanishes along the constraint null space",
        rank, n + m);
  }

  auto linear = [lu, n, m, gamma](const Vector& d) -> Vector {
    Vector rhs = Vector::Zero(n + m);
    rhs.head(n) = d / gamma;
    return lu->solve(rhs).head(n);
  };
  Vector rhs0 = Vector::Zero(n + m);
  rhs0.head(n) = -q;
  if (m > 0) rhs0.tail(m) = *beq;
  Vector offset = lu->solve(rhs0).head(n);
  return AffineMap::from_linear(n, std::move(linear), std::move(offset));
}

}  // namespace splitls
