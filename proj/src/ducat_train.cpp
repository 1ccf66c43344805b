#include "dawa/ducat_train.hpp"

#include <algorithm>
#include <numeric>

#include "dawa/losses.hpp"

namespace dawa {

void TrainConfig::validate() const {
  if (epochs < 1) throw ArgumentError("epochs: must be >= 1");
  if (batch_size < 1) throw ArgumentError("batch_size: must be >= 1");
  if (!(learning_rate >= 0)) throw ArgumentError("learning_rate: must be >= 0");
  if (!(eps_train >= 0)) throw ArgumentError("eps_train: must be >= 0");
  if (pgd_steps_train < 0) throw ArgumentError("pgd_steps_train: must be >= 0");
  if (!(lambda_dummy >= 0)) throw ArgumentError("lambda_dummy: must be >= 0");
  for (Index h : hidden)
    if (h <= 0) throw ArgumentError("hidden: layer widths must be positive");
}

Vec craft_training_adversary(const Model& model, const LabeledExample& example, double eps, int steps,
                             double step_size, Rng& rng) {
  const numkit::ProjectionSpec<double> region(example.x, eps);
  Vec noise(example.x.size());
  for (Index j = 0; j < noise.size(); ++j) noise(j) = rng.uniform(-eps, eps);
  Vec x = numkit::project(example.x + noise, region);
  for (int s = 0; s < steps; ++s) {
    auto fwd = forward(model, x);
    const auto ce = numkit::cross_entropy(fwd.logits.values(), example.y);
    const Vec g = input_grad(model, fwd.tape, ce.grad);
    x = numkit::project(x + step_size * numkit::sign(g), region);
  }
  return x;
}

DucatLoss ducat_loss(const Model& model, const LabeledExample& example, const Vec& adversary, double lambda_dummy) {
  const Index k = model.num_classes();
  auto clean = forward(model, example.x);
  auto clean_ce = numkit::cross_entropy(clean.logits.values(), example.y);
  DucatLoss out{clean_ce.loss, param_grad(model, clean.tape, clean_ce.grad)};
  if (lambda_dummy > 0) {
    auto adv = forward(model, adversary);
    auto adv_ce = numkit::cross_entropy(adv.logits.values(), example.y + k);
    auto g = param_grad(model, adv.tape, adv_ce.grad);
    g *= lambda_dummy;
    out.grads += g;
    out.loss += lambda_dummy * adv_ce.loss;
  }
  return out;
}

namespace {

struct StatCounter {
  std::size_t n = 0, correct = 0, captured = 0, discrepant = 0;

  void add(const Model& model, const LabeledExample& ex, const Vec& adversary) {
    const auto clean = predict_dummy(logits(model, ex.x));
    const auto adv = predict_dummy(logits(model, adversary));
    ++n;
    correct += clean.predicted_class == ex.y;
    captured += adv.raw_argmax == ex.y + model.num_classes();
    discrepant += adv.raw_argmax != clean.raw_argmax;
  }

  DefenseStats stats() const {
    const double d = n ? static_cast<double>(n) : 1.0;
    return {correct / d, captured / d, discrepant / d};
  }
};

}  // namespace

TrainResult train(const Dataset& data, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (data.empty()) throw ArgumentError("train: empty dataset");
  data.validate();

  std::vector<Index> dims{data.dim};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(2 * data.num_classes);
  TrainResult result{Model::glorot_uniform(dims, data.num_classes, config.seed), {}};
  Model& model = result.model;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng{config.seed, 0x53485546u};

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    StatCounter counter;
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      auto grads = ParamGrads<double>::zeros_like(model);
      for (std::size_t i = b; i < e; ++i) {
        const auto& ex = data.rows[order[i]];
        Rng rng{config.seed, static_cast<std::uint64_t>(epoch), order[i]};
        const Vec adv =
            craft_training_adversary(model, ex, config.eps_train, config.pgd_steps_train, config.step_size(), rng);
        counter.add(model, ex, adv);
        auto l = ducat_loss(model, ex, adv, config.lambda_dummy);
        loss_sum += l.loss;
        grads += l.grads;
      }
      grads *= -config.learning_rate / static_cast<double>(e - b);
      for (std::size_t l = 0; l < model.depth(); ++l) {
        model.weight(l) += grads.weights[l];
        model.bias(l) += grads.biases[l];
      }
    }
    if (!model.all_finite()) throw std::runtime_error("train: parameters diverged; lower the learning rate");
    EpochLog log{epoch, loss_sum / static_cast<double>(data.size()), counter.stats()};
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

DefenseStats measure_defense(const Model& model, const Dataset& data, const TrainConfig& config) {
  StatCounter counter;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Rng rng{config.seed, 0x4d454153u, i};
    const Vec adv = craft_training_adversary(model, data.rows[i], config.eps_train, config.pgd_steps_train,
                                             config.step_size(), rng);
    counter.add(model, data.rows[i], adv);
  }
  return counter.stats();
}

}  // namespace dawa
