#pragma once

// Attack objectives over a logit vector. Every function returns the loss and
// its gradient with respect to the logits; the attack engine chains that
// through the network with input_grad(). All objectives are *maximized*.

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "dawa/dummynet.hpp"
#include "dawa/numkit.hpp"

namespace dawa {

enum class LossKind { CE, CW, MIFPE, DAWA, DAWA_TARGETED };

// How the dual-label weight is formed from (z_y - z_dummy).
enum class AlphaMode {
  Smooth,  // sigmoid with sharpness c
  Hard,    // 1 if z_y > z_dummy else 0
};

// Which label pair drives alpha in the targeted objective.
enum class TargetAlphaPair { Target, TrueLabel };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

// Floor on the detached top-2 margin used to rescale logits.
inline constexpr double kMarginFloor = 1e-12;

template <typename Scalar>
struct LossEval {
  Scalar loss = 0;
  numkit::Vector<Scalar> grad;
  Scalar alpha = Scalar(1);         // weight on the y term (1 for single-label losses)
  bool degenerate_margin = false;   // top-2 tie hit the margin floor
};

namespace detail {

template <typename Scalar>
void check_pair(Index y, Index k) {
  if (k < 2) throw ArgumentError("dummy-aware objectives need K >= 2, got K=" + std::to_string(k));
  if (y < 0 || y >= k) throw IndexError("label " + std::to_string(y) + " outside 0.." + std::to_string(k - 1));
}

// Detached rescale t*/(z_pi1 - z_pi2), floored at kMarginFloor.
template <typename Derived>
std::pair<numkit::StopGrad<typename Derived::Scalar>, bool> margin_rescale(const Eigen::MatrixBase<Derived>& z,
                                                                           typename Derived::Scalar t_star) {
  using Scalar = typename Derived::Scalar;
  const auto [p1, p2] = numkit::top2(z);
  const Scalar margin = z(p1) - z(p2);
  const bool degenerate = margin < Scalar(kMarginFloor);
  return {numkit::StopGrad<Scalar>(t_star / std::max(margin, Scalar(kMarginFloor))), degenerate};
}

// Weighted two-label cross-entropy on detached-rescaled logits:
//   w * CE(s*z, a) + (1 - w) * CE(s*z, b), differentiated with s and w held fixed.
template <typename Derived>
LossEval<typename Derived::Scalar> rescaled_pair_ce(const Eigen::MatrixBase<Derived>& z, Index a, Index b,
                                                    numkit::StopGrad<typename Derived::Scalar> weight,
                                                    typename Derived::Scalar t_star) {
  using Scalar = typename Derived::Scalar;
  const auto [scale, degenerate] = margin_rescale(z, t_star);
  // Centering first keeps a large common offset out of the product with the scale.
  const numkit::Vector<Scalar> scaled = scale.value() * (z.array() - z.maxCoeff()).matrix();
  const numkit::Vector<Scalar> logp = numkit::log_softmax(scaled);
  const Scalar w = weight.value();
  LossEval<Scalar> out;
  out.loss = -(w * logp(a) + (Scalar(1) - w) * logp(b));
  out.grad = logp.array().exp();
  out.grad(a) -= w;
  out.grad(b) -= Scalar(1) - w;
  out.grad *= scale.value();
  out.alpha = w;
  out.degenerate_margin = degenerate;
  return out;
}

}  // namespace detail

// Dummy-aware margin: max(z_y, z_{y+K}) - max over every other logit.
// Negative exactly when the folded prediction is an authentic class other than y.
template <typename Scalar>
Scalar margin_value(const LogitVector<Scalar>& z, Index y) {
  const Index k = z.num_classes();
  detail::check_pair<Scalar>(y, k);
  const auto& v = z.values();
  Scalar other = -std::numeric_limits<Scalar>::infinity();
  for (Index i = 0; i < v.size(); ++i)
    if (i != y && i != y + k) other = std::max(other, v(i));
  return std::max(v(y), v(y + k)) - other;
}

// Sigmoid weight on the true-label term, computed from detached logits.
template <typename Scalar>
Scalar alpha_smooth(Scalar z_y, Scalar z_dummy, Scalar c) {
  if (!(c >= 0)) throw ArgumentError("alpha_smooth: c must be >= 0");
  const Scalar gap = z_y - z_dummy;
  // Written two ways so exp() never overflows.
  if (gap >= 0) return Scalar(1) / (Scalar(1) + std::exp(-c * gap));
  const Scalar e = std::exp(c * gap);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Scalar alpha_hard(Scalar z_y, Scalar z_dummy) {
  return z_y - z_dummy > 0 ? Scalar(1) : Scalar(0);
}

template <typename Scalar>
Scalar dual_label_alpha(Scalar z_y, Scalar z_dummy, Scalar c, AlphaMode mode) {
  return mode == AlphaMode::Hard ? alpha_hard(z_y, z_dummy) : alpha_smooth(z_y, z_dummy, c);
}

// Plain softmax cross-entropy on the raw logits (PGD baseline).
template <typename Derived>
LossEval<typename Derived::Scalar> ce_loss(const Eigen::MatrixBase<Derived>& z, Index label) {
  auto ce = numkit::cross_entropy(z, label);
  LossEval<typename Derived::Scalar> out;
  out.loss = ce.loss;
  out.grad = std::move(ce.grad);
  return out;
}

// Cross-entropy of t* z / (z_pi1 - z_pi2), with the margin detached.
template <typename Derived>
LossEval<typename Derived::Scalar> mifpe_loss(const Eigen::MatrixBase<Derived>& z, Index label,
                                              typename Derived::Scalar t_star = 1) {
  using Scalar = typename Derived::Scalar;
  if (label < 0 || label >= z.size()) throw IndexError("mifpe_loss: label out of range");
  return detail::rescaled_pair_ce(z, label, label, numkit::StopGrad<Scalar>(Scalar(1)), t_star);
}

// Negated classification margin -(z_y - max_{i != y} z_i); ties pick the lowest
// competitor index.
template <typename Derived>
LossEval<typename Derived::Scalar> cw_margin_loss(const Eigen::MatrixBase<Derived>& z, Index y) {
  using Scalar = typename Derived::Scalar;
  if (z.size() < 2) throw DimensionError("cw_margin_loss: need at least two logits");
  if (y < 0 || y >= z.size()) throw IndexError("cw_margin_loss: label out of range");
  Index best = -1;
  for (Index i = 0; i < z.size(); ++i)
    if (i != y && (best < 0 || z(i) > z(best))) best = i;
  LossEval<Scalar> out;
  out.loss = z(best) - z(y);
  out.grad = numkit::Vector<Scalar>::Zero(z.size());
  out.grad(best) = Scalar(1);
  out.grad(y) = Scalar(-1);
  return out;
}

// Untargeted dual-label loss: alpha * CE(rescaled, y) + (1 - alpha) * CE(rescaled, y+K).
template <typename Scalar>
LossEval<Scalar> dawa_loss(const LogitVector<Scalar>& z, Index y, Scalar c, Scalar t_star = 1,
                           AlphaMode mode = AlphaMode::Smooth) {
  detail::check_pair<Scalar>(y, z.num_classes());
  const numkit::StopGrad<Scalar> alpha(dual_label_alpha(z.authentic(y), z.dummy(y), c, mode));
  return detail::rescaled_pair_ce(z.values(), y, y + z.num_classes(), alpha, t_star);
}

// Targeted dual-label loss: -alpha * CE(rescaled, y_t) - (1 - alpha) * CE(rescaled, y_t+K).
// Maximizing it pulls mass onto the target class and its dummy partner.
template <typename Scalar>
LossEval<Scalar> dawa_targeted_loss(const LogitVector<Scalar>& z, Index y_t, Index y, Scalar c, Scalar t_star = 1,
                                    AlphaMode mode = AlphaMode::Smooth,
                                    TargetAlphaPair pair = TargetAlphaPair::Target) {
  const Index k = z.num_classes();
  detail::check_pair<Scalar>(y_t, k);
  detail::check_pair<Scalar>(y, k);
  if (y_t == y) throw ArgumentError("dawa_targeted_loss: target equals the true label");
  const Index ref = pair == TargetAlphaPair::Target ? y_t : y;
  const numkit::StopGrad<Scalar> alpha(dual_label_alpha(z.authentic(ref), z.dummy(ref), c, mode));
  auto out = detail::rescaled_pair_ce(z.values(), y_t, y_t + k, alpha, t_star);
  out.loss = -out.loss;
  out.grad = -out.grad;
  return out;
}

}  // namespace dawa
