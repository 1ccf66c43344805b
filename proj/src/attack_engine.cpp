#include "dawa/attack_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace dawa {

void AttackConfig::validate(Index num_classes, std::optional<Index> true_label) const {
  if (!(epsilon >= 0) || !std::isfinite(epsilon)) throw ArgumentError("epsilon: must be finite and >= 0");
  if (iterations < 0) throw ArgumentError("iterations: must be >= 0");
  if (!(nu >= 0 && nu <= 1)) throw ArgumentError("nu: must lie in [0, 1]");
  if (!(c >= 0)) throw ArgumentError("c: must be >= 0");
  if (!std::isfinite(t_star) || t_star <= 0) throw ArgumentError("t_star: must be finite and > 0");
  if (!(lo <= hi)) throw ArgumentError("lo/hi: lo must be <= hi");
  if (loss == LossKind::DAWA_TARGETED) {
    if (!target) throw ArgumentError("target: required for the targeted loss");
    if (*target < 0 || *target >= num_classes) throw ArgumentError("target: outside 0..K-1");
    if (true_label && *target == *true_label) throw ArgumentError("target: must differ from the true label");
  }
}

double cosine_step(int i, int total, double epsilon, StepSchedule schedule) {
  if (total <= 0 || i < 0 || i >= total) throw ArgumentError("cosine_step: need 0 <= i < I");
  const double base = epsilon * (1.0 + std::cos(static_cast<double>(i) * std::numbers::pi / total));
  return schedule == StepSchedule::DoubledCosine ? 2.0 * base : base;
}

LossEval<double> attack_objective(const Logits& z, Index y, const AttackConfig& cfg) {
  switch (cfg.loss) {
    case LossKind::CE: return ce_loss(z.values(), y);
    case LossKind::CW: return cw_margin_loss(z.values(), y);
    case LossKind::MIFPE: return mifpe_loss(z.values(), y, cfg.t_star);
    case LossKind::DAWA: return dawa_loss(z, y, cfg.c, cfg.t_star, cfg.alpha_mode);
    case LossKind::DAWA_TARGETED:
      return dawa_targeted_loss(z, *cfg.target, y, cfg.c, cfg.t_star, cfg.alpha_mode, cfg.target_alpha_pair);
  }
  throw ArgumentError("unknown loss kind");
}

StopRule AttackConfig::resolved_stop() const {
  if (stop != StopRule::Auto) return stop;
  return loss == LossKind::DAWA || loss == LossKind::DAWA_TARGETED ? StopRule::DummyAware : StopRule::Conventional;
}

double conventional_margin(const Logits& z, Index y) {
  const auto& v = z.values();
  double other = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i)
    if (i != y) other = std::max(other, v(i));
  return v(y) - other;
}

AttackResult attack_run(const Model& model, const Vec& x, Index y, const AttackConfig& cfg,
                        std::initializer_list<std::uint64_t> stream, const IterateObserver* observer) {
  cfg.validate(model.num_classes(), y);
  if (x.size() != model.input_dim()) throw DimensionError("attack_run: input dimension mismatch");

  AttackResult res;
  const double clean_margin = margin_value(logits(model, x), y);
  if (clean_margin < 0) {
    res.x_adv = x;
    res.skipped = true;
    res.succeeded = true;
    res.stopped_early = true;
    res.success_iterate = 0;
    res.final_margin = clean_margin;
    return res;
  }

  const bool dummy_aware = cfg.resolved_stop() == StopRule::DummyAware;
  const numkit::ProjectionSpec<double> region(x, cfg.epsilon, cfg.lo, cfg.hi);
  std::vector<std::uint64_t> key{cfg.seed};
  key.insert(key.end(), stream.begin(), stream.end());
  Rng rng(key);
  Vec noise(x.size());
  for (Index j = 0; j < noise.size(); ++j) noise(j) = rng.uniform(-cfg.epsilon, cfg.epsilon);

  Vec x_cur = numkit::project(x + noise, region);
  Vec x_prev = x_cur;
  Vec mu = cfg.mu_init == MuInit::X0 ? x_cur : Vec(Vec::Zero(x.size()));
  Vec best_x = x_cur;
  double best_criterion = std::numeric_limits<double>::infinity();
  double best_margin = 0.0;

  // Scores x_cur; returns the stop-rule margin.
  auto score = [&](int i, const Logits& z) {
    const double v = margin_value(z, y);
    res.margin_trace.push_back(v);
    if (observer) (*observer)(i, x_cur, v);
    if (v < 0 && res.success_iterate < 0) res.success_iterate = i;
    const double crit = dummy_aware ? v : conventional_margin(z, y);
    if (crit < best_criterion) {
      best_criterion = crit;
      best_margin = v;
      best_x = x_cur;
    }
    return crit;
  };

  for (int i = 0; i < cfg.iterations; ++i) {
    auto fwd = forward(model, x_cur);
    if (score(i, fwd.logits) < 0) {
      res.stopped_early = true;
      break;
    }
    const auto obj = attack_objective(fwd.logits, y, cfg);
    res.loss_trace.push_back(obj.loss);
    res.degenerate_margin_events += obj.degenerate_margin;
    const Vec g = numkit::sign(input_grad(model, fwd.tape, obj.grad));
    const double beta = cosine_step(i, cfg.iterations, cfg.epsilon, cfg.schedule);
    mu = numkit::project(mu + beta * g, region);
    const Vec delta = cfg.nu * (mu - x_cur) + (1.0 - cfg.nu) * (x_cur - x_prev);
    Vec x_next = numkit::project(x_cur + delta, region);
    x_prev = std::move(x_cur);
    x_cur = std::move(x_next);
    ++res.iterations_used;
  }
  // The last update produced x_I, which has not been scored yet.
  if (!res.stopped_early && score(cfg.iterations, logits(model, x_cur)) < 0) res.stopped_early = true;

  if (res.stopped_early || !cfg.track_best) {
    res.x_adv = x_cur;
    res.final_margin = res.margin_trace.back();
  } else {
    res.x_adv = best_x;
    res.final_margin = best_margin;
  }
  res.succeeded = res.final_margin < 0;
  return res;
}

std::vector<Index> rank_targets(const Logits& clean, Index y) {
  const Index k = clean.num_classes();
  std::vector<Index> targets;
  for (Index t = 0; t < k; ++t)
    if (t != y) targets.push_back(t);
  auto score = [&](Index t) { return std::max(clean.authentic(t), clean.dummy(t)); };
  std::stable_sort(targets.begin(), targets.end(), [&](Index a, Index b) { return score(a) > score(b); });
  return targets;
}

AttackResult multi_target_run(const Model& model, const Vec& x, Index y, const AttackConfig& base,
                              const MultiTargetPlan& plan, std::uint64_t example_index,
                              const IterateObserver* observer) {
  if (plan.total_budget < 1 || plan.untargeted_divisor < 1)
    throw ArgumentError("multi_target_run: budget and divisor must be positive");

  AttackConfig untargeted = base;
  untargeted.loss = LossKind::DAWA;
  untargeted.target.reset();
  untargeted.iterations = plan.total_budget / plan.untargeted_divisor;
  AttackResult total = attack_run(model, x, y, untargeted, {example_index, 0}, observer);
  if (total.succeeded) return total;

  const auto targets = rank_targets(logits(model, x), y);
  const int remaining = plan.total_budget - untargeted.iterations;
  const int n = static_cast<int>(targets.size());
  int offset = static_cast<int>(total.margin_trace.size());
  for (int j = 0; j < n; ++j) {
    AttackConfig targeted = base;
    targeted.loss = LossKind::DAWA_TARGETED;
    targeted.target = targets[j];
    targeted.iterations = remaining / n + (j < remaining % n ? 1 : 0);
    if (targeted.iterations == 0) continue;

    IterateObserver shifted;
    if (observer) shifted = [&](int i, const Vec& xi, double v) { (*observer)(offset + i, xi, v); };
    AttackResult pass = attack_run(model, x, y, targeted, {example_index, static_cast<std::uint64_t>(j + 1)},
                                   observer ? &shifted : nullptr);

    total.iterations_used += pass.iterations_used;
    total.degenerate_margin_events += pass.degenerate_margin_events;
    total.loss_trace.insert(total.loss_trace.end(), pass.loss_trace.begin(), pass.loss_trace.end());
    total.margin_trace.insert(total.margin_trace.end(), pass.margin_trace.begin(), pass.margin_trace.end());
    if (pass.succeeded) {
      total.succeeded = true;
      total.success_iterate = offset + pass.success_iterate;
      total.x_adv = std::move(pass.x_adv);
      total.final_margin = pass.final_margin;
      return total;
    }
    if (pass.final_margin < total.final_margin) {
      total.x_adv = std::move(pass.x_adv);
      total.final_margin = pass.final_margin;
    }
    offset = static_cast<int>(total.margin_trace.size());
  }
  return total;
}

}  // namespace dawa
