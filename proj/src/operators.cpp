#include "splitls/operators.hpp"

#include <cmath>
#include <utility>

namespace splitls {

Operator Operator::from_fn(Index dim, std::function<Vector(const Vector&)> fn) {
  if (!fn) throw ConfigError("Operator::from_fn: empty function");
  Operator op;
  op.dim = dim;
  op.fn = std::move(fn);
  return op;
}

Operator Operator::from_affine(AffineMap map) {
  Operator op;
  op.dim = map.dim();
  op.fn = [map](const Vector& x) { return map(x); };
  op.affine = std::move(map);
  return op;
}

ProxOperator prox_zero(Index dim) {
  ProxOperator p;
  p.dim = dim;
  p.scale_free = true;
  p.affine = AffineMap::identity(dim);
  p.fn = [](const Vector& z) { return z; };
  return p;
}

ProxOperator prox_quadratic(const Matrix& P, const Vector& q,
                            const std::optional<Matrix>& Aeq,
                            const std::optional<Vector>& beq, double gamma) {
  ProxOperator p;
  p.dim = P.rows();
  p.gamma = gamma;
  p.affine = prox_quadratic_affine(P, q, Aeq, beq, gamma);
  p.fn = [map = *p.affine](const Vector& z) { return map(z); };
  return p;
}

Operator reflect(const ProxOperator& prox) {
  Operator op;
  op.dim = prox.dim;
  if (prox.affine) {
    op.affine = prox.affine->reflected();
    op.fn = [map = *op.affine](const Vector& z) { return map(z); };
  } else {
    op.fn = [prox](const Vector& z) -> Vector { return 2.0 * prox(z) - z; };
  }
  return op;
}

Index set_dim(const SetDescriptor& set) {
  return std::visit(
      [](const auto& s) -> Index {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, NonnegativeOrthant>) return s.dim;
        if constexpr (std::is_same_v<T, Ball>) return s.center.size();
        if constexpr (std::is_same_v<T, AffineSet>) return s.A.cols();
        if constexpr (std::is_same_v<T, Consensus>) return s.blocks * s.block_dim;
        if constexpr (std::is_same_v<T, Halfspace>) return s.normal.size();
        if constexpr (std::is_same_v<T, Hyperplane>) return s.normal.size();
      },
      set);
}

namespace {

void check_normal(const Vector& normal, const char* what) {
  if (normal.size() == 0 || normal.norm() == 0.0)
    throw ConfigError(std::string(what) + ": normal vector must be nonzero");
}

ProxOperator wrap_projection(Index dim, std::function<Vector(const Vector&)> fn) {
  ProxOperator p;
  p.dim = dim;
  p.scale_free = true;
  p.fn = std::move(fn);
  return p;
}

ProxOperator wrap_affine_projection(AffineMap map) {
  ProxOperator p;
  p.dim = map.dim();
  p.scale_free = true;
  p.fn = [map](const Vector& z) { return map(z); };
  p.affine = std::move(map);
  return p;
}

}  // namespace

ProxOperator projector(const SetDescriptor& set) {
  return std::visit(
      [](const auto& s) -> ProxOperator {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, NonnegativeOrthant>) {
          if (s.dim <= 0) throw ConfigError("NonnegativeOrthant: dim must be positive");
          return wrap_projection(s.dim, [](const Vector& z) -> Vector {
            return z.cwiseMax(0.0);
          });
        } else if constexpr (std::is_same_v<T, Ball>) {
          if (s.radius < 0.0) throw ConfigError("Ball: radius must be nonnegative");
          return wrap_projection(s.center.size(), [s](const Vector& z) -> Vector {
            const Vector d = z - s.center;
            const double nrm = d.norm();
            if (nrm <= s.radius) return z;
            return s.center + (s.radius / nrm) * d;
          });
        } else if constexpr (std::is_same_v<T, AffineSet>) {
          const Index n = s.A.cols();
          return wrap_affine_projection(prox_quadratic_affine(
              Matrix::Zero(n, n), Vector::Zero(n), s.A, s.b, 1.0));
        } else if constexpr (std::is_same_v<T, Consensus>) {
          if (s.blocks <= 0 || s.block_dim <= 0)
            throw ConfigError("Consensus: blocks and block_dim must be positive");
          const Index blocks = s.blocks, bd = s.block_dim;
          auto avg_replicate = [blocks, bd](const Vector& z) -> Vector {
            Vector mean = Vector::Zero(bd);
            for (Index i = 0; i < blocks; ++i) mean += z.segment(i * bd, bd);
            mean /= static_cast<double>(blocks);
            Vector out(blocks * bd);
            for (Index i = 0; i < blocks; ++i) out.segment(i * bd, bd) = mean;
            return out;
          };
          return wrap_affine_projection(AffineMap::from_linear(
              blocks * bd, avg_replicate, Vector::Zero(blocks * bd)));
        } else if constexpr (std::is_same_v<T, Halfspace>) {
          check_normal(s.normal, "Halfspace");
          const double nn = s.normal.squaredNorm();
          return wrap_projection(s.normal.size(), [s, nn](const Vector& z) -> Vector {
            const double gap = s.normal.dot(z) - s.offset;
            if (gap <= 0.0) return z;
            return z - (gap / nn) * s.normal;
          });
        } else {  // Hyperplane
          check_normal(s.normal, "Hyperplane");
          const double nn = s.normal.squaredNorm();
          const Index n = s.normal.size();
          auto linear = [normal = s.normal, nn](const Vector& d) -> Vector {
            return d - (normal.dot(d) / nn) * normal;
          };
          Vector offset = (s.offset / nn) * s.normal;
          return wrap_affine_projection(
              AffineMap::from_linear(n, std::move(linear), std::move(offset)));
        }
      },
      set);
}

Vector project(const SetDescriptor& set, const Vector& z) {
  ProxOperator p = projector(set);
  if (z.size() != p.dim)
    throw ConfigError("project: input length " + std::to_string(z.size()) +
                      " does not match set dimension " + std::to_string(p.dim));
  return p(z);
}

double distance_to(const SetDescriptor& set, const Vector& z) {
  return (z - project(set, z)).norm();
}

Vector consensus_reflect(const Vector& zs, Index blocks, Index block_dim) {
  if (blocks <= 0 || block_dim <= 0)
    throw ConfigError("consensus_reflect: blocks and block_dim must be positive");
  if (zs.size() != blocks * block_dim)
    throw ConfigError("consensus_reflect: stacked length " + std::to_string(zs.size()) +
                      " does not match " + std::to_string(blocks) + "x" +
                      std::to_string(block_dim));
  Vector mean = Vector::Zero(block_dim);
  for (Index i = 0; i < blocks; ++i) mean += zs.segment(i * block_dim, block_dim);
  mean /= static_cast<double>(blocks);
  Vector out(zs.size());
  for (Index i = 0; i < blocks; ++i)
    out.segment(i * block_dim, block_dim) = 2.0 * mean - zs.segment(i * block_dim, block_dim);
  return out;
}

AffineMap consensus_reflector(Index blocks, Index block_dim) {
  if (blocks <= 0 || block_dim <= 0)
    throw ConfigError("consensus_reflector: blocks and block_dim must be positive");
  const Index total = blocks * block_dim;
  auto linear = [blocks, block_dim](const Vector& d) -> Vector {
    return consensus_reflect(d, blocks, block_dim);
  };
  return AffineMap::from_linear(total, std::move(linear), Vector::Zero(total));
}

}  // namespace splitls
