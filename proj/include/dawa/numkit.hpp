#pragma once

// Dense numeric core shared by the model, the attacks and the trainer.
// Everything here is a free function over Eigen expressions, templated on
// the scalar type; the rest of the library instantiates it with double.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "dawa/errors.hpp"

namespace dawa::numkit {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

// A value that enters a loss as a constant: no derivative ever flows through
// it. Losses hold their detached factors (logit margin rescale, label weight)
// in this wrapper so the gradient code cannot accidentally differentiate them.
template <typename Scalar>
class StopGrad {
 public:
  constexpr explicit StopGrad(Scalar value) noexcept : value_(value) {}
  constexpr Scalar value() const noexcept { return value_; }
  // d/dz of a detached term is identically zero.
  static constexpr Scalar derivative() noexcept { return Scalar(0); }

 private:
  Scalar value_;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& v) {
  return v.derived().array().isFinite().all();
}

template <typename Derived>
Vector<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  if (z.size() == 0) throw DimensionError("log_softmax: empty input");
  if (!all_finite(z)) throw ArgumentError("log_softmax: non-finite logit");
  const Scalar shift = z.maxCoeff();
  const Vector<Scalar> shifted = z.array() - shift;
  const Scalar log_norm = std::log(shifted.array().exp().sum());
  return shifted.array() - log_norm;
}

template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& z) {
  return log_softmax(z).array().exp();
}

template <typename Scalar>
struct LossGrad {
  Scalar loss;
  Vector<Scalar> grad;  // d loss / d z
};

// Softmax cross-entropy against `label`; grad = softmax(z) - onehot(label).
template <typename Derived>
LossGrad<typename Derived::Scalar> cross_entropy(const Eigen::MatrixBase<Derived>& z, Index label) {
  using Scalar = typename Derived::Scalar;
  if (label < 0 || label >= z.size())
    throw IndexError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                     std::to_string(z.size()) + " logits");
  const Vector<Scalar> logp = log_softmax(z);
  Vector<Scalar> grad = logp.array().exp();
  grad(label) -= Scalar(1);
  return {-logp(label), std::move(grad)};
}

struct Top2 {
  Index first;
  Index second;
};

// Indices of the largest and second-largest entries; ties go to the lower index.
template <typename Derived>
Top2 top2(const Eigen::MatrixBase<Derived>& z) {
  if (z.size() < 2) throw DimensionError("top2: need at least two entries");
  Index a = 0, b = 1;
  if (z(1) > z(0)) std::swap(a, b);
  for (Index i = 2; i < z.size(); ++i) {
    if (z(i) > z(a)) {
      b = a;
      a = i;
    } else if (z(i) > z(b)) {
      b = i;
    }
  }
  return {a, b};
}

// Feasible region for an l-infinity attack: the eps-ball around `center`
// intersected with the box [lo, hi]^d.
template <typename Scalar>
struct ProjectionSpec {
  Vector<Scalar> center;
  Scalar epsilon = 0;
  Scalar lo = 0;
  Scalar hi = 1;

  ProjectionSpec() = default;
  ProjectionSpec(Vector<Scalar> c, Scalar eps, Scalar lo_ = 0, Scalar hi_ = 1)
      : center(std::move(c)), epsilon(eps), lo(lo_), hi(hi_) {
    if (!(epsilon >= 0)) throw ArgumentError("ProjectionSpec: epsilon must be >= 0");
    if (!(lo <= hi)) throw ArgumentError("ProjectionSpec: lo must be <= hi");
  }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& v, Scalar tol = 0) const {
    if (v.size() != center.size()) return false;
    return ((v - center).array().abs() <= epsilon + tol).all() &&
           (v.array() >= lo - tol).all() && (v.array() <= hi + tol).all();
  }
};

// Clamp to the eps-ball first, then to the domain box. The box is applied last
// so the result is always inside [lo, hi] even when the ball pokes outside it.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Vector<Scalar> project(const Eigen::MatrixBase<Derived>& v, const ProjectionSpec<Scalar>& spec) {
  if (v.size() != spec.center.size())
    throw DimensionError("project: vector has " + std::to_string(v.size()) +
                         " entries, center has " + std::to_string(spec.center.size()));
  return v.derived()
      .array()
      .max(spec.center.array() - spec.epsilon)
      .min(spec.center.array() + spec.epsilon)
      .max(spec.lo)
      .min(spec.hi)
      .matrix();
}

// Componentwise sign with sign(0) = 0.
template <typename Derived>
Vector<typename Derived::Scalar> sign(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  return v.unaryExpr([](Scalar x) { return Scalar((x > 0) - (x < 0)); });
}

}  // namespace dawa::numkit
