#pragma once

// Desk-scale dummy-class adversarial training. Clean inputs are fit to their
// label y; PGD adversaries crafted against y are fit to the dummy partner y+K.
// A model trained this way absorbs conventional attacks into the dummy class,
// which the folded prediction rule maps straight back to y.

#include <cstdint>
#include <functional>
#include <vector>

#include "dawa/dataset.hpp"
#include "dawa/dummynet.hpp"
#include "dawa/rng.hpp"

namespace dawa {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 0.1;
  double eps_train = 0.03;
  int pgd_steps_train = 10;
  // Non-positive means eps_train / 4.
  double pgd_stepsize_train = 0.0;
  double lambda_dummy = 4.0;
  std::uint64_t seed = 0;
  std::vector<Index> hidden{128, 128};

  void validate() const;
  double step_size() const { return pgd_stepsize_train > 0 ? pgd_stepsize_train : eps_train / 4.0; }
};

// PGD on CE(f(x), y) over all 2K logits from a uniform start in the eps-ball.
Vec craft_training_adversary(const Model& model, const LabeledExample& example, double eps, int steps,
                             double step_size, Rng& rng);

struct DucatLoss {
  double loss = 0.0;
  ParamGrads<double> grads;
};

// CE(f(x), y) + lambda * CE(f(x_adv), y+K) and its parameter gradient.
DucatLoss ducat_loss(const Model& model, const LabeledExample& example, const Vec& adversary, double lambda_dummy);

struct DefenseStats {
  double clean_accuracy = 0.0;       // folded prediction == y
  double dummy_capture_rate = 0.0;   // adversary raw argmax == y+K
  double discrepancy_rate = 0.0;     // adversary raw argmax != clean raw argmax
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  DefenseStats stats;  // over the adversaries crafted during the epoch
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Plain minibatch SGD with a constant learning rate. Deterministic in
// (data, config): gradient accumulation order is fixed by the shuffled order.
TrainResult train(const Dataset& data, const TrainConfig& config, const EpochCallback& on_epoch = {});

// Re-crafts a fresh training adversary for every example against `model`.
DefenseStats measure_defense(const Model& model, const Dataset& data, const TrainConfig& config);

}  // namespace dawa
