#pragma once

// Sign-gradient l-infinity attack with cosine step decay and projected
// momentum. One engine serves every objective in losses.hpp so baselines and
// the dual-label attack run under identical schedules, seeds and stopping
// rules; only the objective differs.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dawa/dummynet.hpp"
#include "dawa/losses.hpp"

namespace dawa {

// Where the momentum candidate starts.
enum class MuInit {
  X0,    // mu_0 = x_0 (random start); the default
  Zero,  // mu_0 = 0 literally
};

enum class StepSchedule {
  Cosine,         // beta_i = eps (1 + cos(i pi / I))
  DoubledCosine,  // beta_i = 2 eps (1 + cos(i pi / I))
};

// When the engine stops early and which margin "best" minimizes.
enum class StopRule {
  Auto,          // DummyAware for the dual-label losses, Conventional otherwise
  DummyAware,    // max(z_y, z_{y+K}) - max_{i not in {y, y+K}} z_i < 0
  Conventional,  // z_y - max_{i != y} z_i < 0 over all 2K logits (a dummy hit counts)
};

struct AttackConfig {
  double epsilon = 0.03;
  int iterations = 100;
  double nu = 0.75;
  double c = 2.0;
  double t_star = 1.0;
  LossKind loss = LossKind::DAWA;
  std::optional<Index> target;
  std::uint64_t seed = 0;
  bool track_best = true;
  MuInit mu_init = MuInit::X0;
  StepSchedule schedule = StepSchedule::Cosine;
  AlphaMode alpha_mode = AlphaMode::Smooth;
  TargetAlphaPair target_alpha_pair = TargetAlphaPair::Target;
  StopRule stop = StopRule::Auto;
  double lo = 0.0;
  double hi = 1.0;

  // Throws ArgumentError naming the offending field.
  void validate(Index num_classes, std::optional<Index> true_label = std::nullopt) const;
  StopRule resolved_stop() const;
};

struct AttackResult {
  Vec x_adv;
  // Dummy-aware verdict at x_adv: margin_value < 0.
  bool succeeded = false;
  // The configured stop rule fired (for conventional attacks this includes
  // landing in the dummy class, which is not a success).
  bool stopped_early = false;
  // Clean input already fails the dummy-aware criterion; nothing was attacked.
  bool skipped = false;
  // Gradient steps taken.
  int iterations_used = 0;
  // Index of the first iterate with margin_value < 0 (counting x_0 as 0), or -1.
  int success_iterate = -1;
  // margin_value at every evaluated iterate x_0, x_1, ...
  std::vector<double> margin_trace;
  // Objective value at every iterate a gradient was taken from.
  std::vector<double> loss_trace;
  double final_margin = 0.0;  // margin at x_adv
  int degenerate_margin_events = 0;
};

// Called once per evaluated iterate with (iterate index, x_i, margin at x_i).
using IterateObserver = std::function<void(int, const Vec&, double)>;

// z_y - max_{i != y} z_i over every logit.
double conventional_margin(const Logits& z, Index y);

// Step size at iteration i of I.
double cosine_step(int i, int total, double epsilon, StepSchedule schedule = StepSchedule::Cosine);

// Objective selected by cfg.loss evaluated at z, for an example with label y.
LossEval<double> attack_objective(const Logits& z, Index y, const AttackConfig& cfg);

// One attack pass from a random start inside the eps-ball. `stream` selects
// an independent random stream (callers pass the example index and restart).
AttackResult attack_run(const Model& model, const Vec& x, Index y, const AttackConfig& cfg,
                        std::initializer_list<std::uint64_t> stream, const IterateObserver* observer = nullptr);

struct MultiTargetPlan {
  int total_budget = 1000;
  // Fraction of the budget given to the opening untargeted pass.
  int untargeted_divisor = 10;
};

// Untargeted dual-label pass, then targeted passes over the other classes in
// descending order of max(z_t, z_{t+K}) at the clean point. Stops at the first
// success; otherwise returns the lowest-margin point across all passes.
AttackResult multi_target_run(const Model& model, const Vec& x, Index y, const AttackConfig& base,
                              const MultiTargetPlan& plan, std::uint64_t example_index,
                              const IterateObserver* observer = nullptr);

// Target order used by multi_target_run.
std::vector<Index> rank_targets(const Logits& clean, Index y);

}  // namespace dawa
