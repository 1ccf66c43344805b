#pragma once

// Robust-accuracy evaluation under the folded (dummy-aware) prediction rule,
// plus convergence traces and the alpha-sharpness sweep.

#include <cstdint>
#include <string>
#include <vector>

#include "dawa/attack_engine.hpp"
#include "dawa/dataset.hpp"

namespace dawa {

enum class Protocol {
  Single,           // `restarts` independent passes of one objective
  MultiTarget,      // untargeted + targeted dual-label passes
  AutoAttackProxy,  // CE restarts followed by one margin-loss pass
};

struct AttackSpec {
  std::string name;
  AttackConfig config;
  Protocol protocol = Protocol::Single;
  int restarts = 1;
  MultiTargetPlan plan;          // MultiTarget only
  int proxy_margin_iterations = 200;  // AutoAttackProxy only

  // Total gradient-step budget per example.
  int budget() const;
};

// Named attacks used throughout: pgd, cw, mifpe, dawa (100 steps each),
// dawa-mt (1000 steps), aa-proxy (5 x 200 CE restarts + 200 margin steps).
// `shared` supplies eps, nu, c, t*, seed and schedule options.
AttackSpec standard_attack(const std::string& name, const AttackConfig& shared);
const std::vector<std::string>& standard_attack_names();

struct ExampleOutcome {
  bool clean_correct = false;
  bool succeeded = false;
  int success_iterate = -1;
  int iterations_used = 0;
  Index raw_argmax = 0;  // at the returned point
  double final_margin = 0.0;
  bool sound = true;     // an independent forward pass agrees with the reported verdict
  std::size_t infeasible_iterates = 0;
  Vec x_adv;
};

struct AttackEvaluation {
  AttackSpec spec;
  std::vector<ExampleOutcome> outcomes;
  double clean_accuracy = 0.0;
  double robust_accuracy = 0.0;
  double mean_iterations_to_success = 0.0;  // NaN when nothing succeeded
  double dummy_capture_rate = 0.0;           // over attacked (clean-correct) examples
  std::size_t soundness_violations = 0;
  std::size_t feasibility_violations = 0;    // counted only when instrumented
};

struct EvalOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  // Check every iterate against the eps-ball and box.
  bool instrument = false;
  bool keep_adversarials = false;
};

struct EvalReport {
  std::string defense = "model";
  std::string dataset_digest;
  std::uint64_t seed = 0;
  std::size_t examples = 0;
  std::size_t clean_correct = 0;
  double clean_accuracy = 0.0;
  std::vector<AttackEvaluation> attacks;
};

// Robust iff clean-correct and the attack's returned point keeps margin >= 0.
AttackEvaluation robust_accuracy(const Model& model, const Dataset& data, const AttackSpec& spec,
                                 const EvalOptions& options = {});

double clean_accuracy(const Model& model, const Dataset& data);

EvalReport evaluate(const Model& model, const Dataset& data, const std::vector<AttackSpec>& specs,
                    const std::string& defense, const EvalOptions& options = {});

// trace[i] = fraction of clean-correct examples with a successful iterate at
// index <= i; length I+1.
using ConvergenceTrace = std::vector<double>;

ConvergenceTrace convergence_trace(const AttackEvaluation& eval);
// All specs must be single-pass attacks sharing I and the seed.
std::vector<ConvergenceTrace> convergence_traces(const Model& model, const Dataset& data,
                                                 const std::vector<AttackSpec>& specs,
                                                 const EvalOptions& options = {});

struct AblationPoint {
  double c = 0.0;
  double robust_accuracy = 0.0;
};
using AblationCurve = std::vector<AblationPoint>;

// 10^{-1, -0.5, 0, 0.3, 0.5, 1, 2}.
std::vector<double> default_c_grid();
AblationCurve ablation_sweep(const Model& model, const Dataset& data, const std::vector<double>& c_grid,
                             const AttackSpec& base, const EvalOptions& options = {});

// CSV writers. Report columns:
// defense,attack,examples,clean_correct,clean_accuracy,robust_accuracy,
// mean_iterations_to_success,dummy_capture_rate,dataset_digest,seed,config_digest
// The first data row is attack "none" (robust = clean).
std::string report_to_csv(const EvalReport& report);
std::string convergence_to_csv(const std::vector<std::string>& names, const std::vector<ConvergenceTrace>& traces);
std::string ablation_to_csv(const AblationCurve& curve);

// Stable digest of every field of an attack spec.
std::string config_digest(const AttackSpec& spec);

}  // namespace dawa
