#include "dawa/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "dawa/manifest.hpp"

namespace dawa {

namespace {

// Runs fn(i) for i in [0, n). Each index writes only its own slot, so the
// outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic_flag error_set = ATOMIC_FLAG_INIT;
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            if (!error_set.test_and_set()) error = std::current_exception();
            next = n;
          }
        }
      });
  }
  if (error) std::rethrow_exception(error);
}

AttackResult run_protocol(const Model& model, const Vec& x, Index y, const AttackSpec& spec, std::uint64_t index,
                          const IterateObserver* observer) {
  switch (spec.protocol) {
    case Protocol::MultiTarget:
      return multi_target_run(model, x, y, spec.config, spec.plan, index, observer);
    case Protocol::Single:
    case Protocol::AutoAttackProxy: {
      AttackResult best;
      best.final_margin = std::numeric_limits<double>::infinity();
      int used = 0;
      const int passes = spec.restarts + (spec.protocol == Protocol::AutoAttackProxy ? 1 : 0);
      for (int r = 0; r < passes; ++r) {
        AttackConfig cfg = spec.config;
        if (r == spec.restarts) {  // closing margin-loss pass of the proxy
          cfg.loss = LossKind::CW;
          cfg.iterations = spec.proxy_margin_iterations;
        }
        AttackResult pass = attack_run(model, x, y, cfg, {index, static_cast<std::uint64_t>(r)}, observer);
        used += pass.iterations_used;
        if (pass.succeeded || pass.final_margin < best.final_margin) best = std::move(pass);
        if (best.succeeded) break;
      }
      best.iterations_used = used;
      return best;
    }
  }
  throw ArgumentError("unknown protocol");
}

}  // namespace

int AttackSpec::budget() const {
  switch (protocol) {
    case Protocol::MultiTarget: return plan.total_budget;
    case Protocol::AutoAttackProxy: return restarts * config.iterations + proxy_margin_iterations;
    case Protocol::Single: return restarts * config.iterations;
  }
  return 0;
}

const std::vector<std::string>& standard_attack_names() {
  static const std::vector<std::string> names{"pgd", "cw", "mifpe", "dawa", "aa-proxy", "dawa-mt"};
  return names;
}

AttackSpec standard_attack(const std::string& name, const AttackConfig& shared) {
  AttackSpec s;
  s.name = name;
  s.config = shared;
  s.config.target.reset();
  if (name == "pgd" || name == "ce") {
    s.config.loss = LossKind::CE;
  } else if (name == "cw") {
    s.config.loss = LossKind::CW;
  } else if (name == "mifpe") {
    s.config.loss = LossKind::MIFPE;
  } else if (name == "dawa") {
    s.config.loss = LossKind::DAWA;
  } else if (name == "dawa-mt") {
    s.config.loss = LossKind::DAWA;
    s.protocol = Protocol::MultiTarget;
    s.plan.total_budget = 10 * shared.iterations;
  } else if (name == "aa-proxy") {
    s.config.loss = LossKind::CE;
    s.protocol = Protocol::AutoAttackProxy;
    s.restarts = 5;
    s.config.iterations = 2 * shared.iterations;
    s.proxy_margin_iterations = 2 * shared.iterations;
  } else {
    throw ArgumentError("attack: unknown attack '" + name + "'");
  }
  return s;
}

namespace {

std::size_t count_clean_correct(const Model& model, const Dataset& data) {
  if (data.empty()) throw ArgumentError("clean_accuracy: empty dataset");
  std::size_t correct = 0;
  for (const auto& ex : data.rows) correct += predict_dummy(logits(model, ex.x)).predicted_class == ex.y;
  return correct;
}

}  // namespace

double clean_accuracy(const Model& model, const Dataset& data) {
  return static_cast<double>(count_clean_correct(model, data)) / static_cast<double>(data.size());
}

AttackEvaluation robust_accuracy(const Model& model, const Dataset& data, const AttackSpec& spec,
                                 const EvalOptions& options) {
  if (data.empty()) throw ArgumentError("robust_accuracy: empty dataset");
  if (data.dim != model.input_dim() || data.num_classes != model.num_classes())
    throw DimensionError("robust_accuracy: dataset shape does not match the model");

  AttackEvaluation out;
  out.spec = spec;
  out.outcomes.resize(data.size());
  const Index k = model.num_classes();

  parallel_for(data.size(), options.threads, [&](std::size_t i) {
    const auto& ex = data.rows[i];
    ExampleOutcome& o = out.outcomes[i];
    const auto clean = predict_dummy(logits(model, ex.x));
    o.clean_correct = clean.predicted_class == ex.y;
    o.raw_argmax = clean.raw_argmax;
    if (!o.clean_correct) {
      if (options.keep_adversarials) o.x_adv = ex.x;
      return;
    }

    IterateObserver check;
    const numkit::ProjectionSpec<double> region(ex.x, spec.config.epsilon, spec.config.lo, spec.config.hi);
    if (options.instrument)
      check = [&](int, const Vec& xi, double) { o.infeasible_iterates += !region.contains(xi, 1e-12); };
    AttackResult r = run_protocol(model, ex.x, ex.y, spec, i, options.instrument ? &check : nullptr);

    o.succeeded = r.succeeded;
    o.success_iterate = r.success_iterate;
    o.iterations_used = r.iterations_used;
    o.final_margin = r.final_margin;
    // Re-score the returned point with a tape-free forward pass.
    const Logits z = logits(model, r.x_adv);
    const auto pred = predict_dummy(z);
    o.raw_argmax = pred.raw_argmax;
    const bool fooled = margin_value(z, ex.y) < 0;
    o.sound = fooled == r.succeeded && (!fooled || pred.predicted_class != ex.y);
    if (options.instrument) o.infeasible_iterates += !region.contains(r.x_adv, 1e-12);
    if (options.keep_adversarials) o.x_adv = std::move(r.x_adv);
  });

  std::size_t correct = 0, robust = 0, captured = 0, successes = 0;
  double iter_sum = 0.0;
  for (const auto& o : out.outcomes) {
    out.soundness_violations += !o.sound;
    out.feasibility_violations += o.infeasible_iterates;
    if (!o.clean_correct) continue;
    ++correct;
    captured += o.raw_argmax >= k;
    if (o.succeeded) {
      ++successes;
      iter_sum += o.iterations_used;
    } else {
      ++robust;
    }
  }
  const double n = static_cast<double>(data.size());
  out.clean_accuracy = correct / n;
  out.robust_accuracy = robust / n;
  out.mean_iterations_to_success = successes ? iter_sum / successes : std::numeric_limits<double>::quiet_NaN();
  out.dummy_capture_rate = correct ? static_cast<double>(captured) / correct : 0.0;
  return out;
}

EvalReport evaluate(const Model& model, const Dataset& data, const std::vector<AttackSpec>& specs,
                    const std::string& defense, const EvalOptions& options) {
  EvalReport rep;
  rep.defense = defense;
  rep.dataset_digest = sha256_hex(dataset_to_csv(data));
  rep.examples = data.size();
  rep.clean_correct = count_clean_correct(model, data);
  rep.clean_accuracy = static_cast<double>(rep.clean_correct) / static_cast<double>(data.size());
  if (!specs.empty()) {
    rep.seed = specs.front().config.seed;
    for (const auto& s : specs)
      if (s.config.seed != rep.seed) throw ArgumentError("seed: all attacks in one evaluation must share the seed");
  }
  for (const auto& s : specs) rep.attacks.push_back(robust_accuracy(model, data, s, options));
  return rep;
}

ConvergenceTrace convergence_trace(const AttackEvaluation& eval) {
  if (eval.spec.protocol != Protocol::Single || eval.spec.restarts != 1)
    throw ArgumentError("convergence_trace: needs a single-pass attack");
  const int total = eval.spec.config.iterations;
  std::vector<std::size_t> first_hits(static_cast<std::size_t>(total) + 1, 0);
  std::size_t base = 0;
  for (const auto& o : eval.outcomes) {
    if (!o.clean_correct) continue;
    ++base;
    if (o.succeeded) ++first_hits.at(static_cast<std::size_t>(o.success_iterate));
  }
  ConvergenceTrace trace(first_hits.size(), 0.0);
  std::size_t cumulative = 0;
  for (std::size_t i = 0; i < first_hits.size(); ++i) {
    cumulative += first_hits[i];
    trace[i] = base ? static_cast<double>(cumulative) / static_cast<double>(base) : 0.0;
  }
  return trace;
}

std::vector<ConvergenceTrace> convergence_traces(const Model& model, const Dataset& data,
                                                 const std::vector<AttackSpec>& specs, const EvalOptions& options) {
  for (const auto& s : specs) {
    if (s.config.iterations != specs.front().config.iterations)
      throw ArgumentError("iterations: convergence comparison needs a shared budget");
    if (s.config.seed != specs.front().config.seed)
      throw ArgumentError("seed: convergence comparison needs a shared seed");
    if (s.protocol != Protocol::Single || s.restarts != 1)
      throw ArgumentError("convergence comparison needs single-pass attacks (got " + s.name + ")");
  }
  std::vector<ConvergenceTrace> out;
  for (const auto& s : specs) out.push_back(convergence_trace(robust_accuracy(model, data, s, options)));
  return out;
}

std::vector<double> default_c_grid() {
  std::vector<double> grid;
  for (double e : {-1.0, -0.5, 0.0, 0.3, 0.5, 1.0, 2.0}) grid.push_back(std::pow(10.0, e));
  return grid;
}

AblationCurve ablation_sweep(const Model& model, const Dataset& data, const std::vector<double>& c_grid,
                             const AttackSpec& base, const EvalOptions& options) {
  if (c_grid.empty()) throw ArgumentError("c-grid: must not be empty");
  AblationCurve curve;
  for (double c : c_grid) {
    if (!(c >= 0)) throw ArgumentError("c-grid: values must be >= 0");
    AttackSpec s = base;
    s.config.c = c;
    curve.push_back({c, robust_accuracy(model, data, s, options).robust_accuracy});
  }
  return curve;
}

std::string config_digest(const AttackSpec& s) {
  const AttackConfig& c = s.config;
  std::ostringstream os;
  os << "name=" << s.name << ";protocol=" << static_cast<int>(s.protocol) << ";restarts=" << s.restarts
     << ";budget=" << s.plan.total_budget << '/' << s.plan.untargeted_divisor
     << ";proxy_margin=" << s.proxy_margin_iterations << ";eps=" << format_double(c.epsilon)
     << ";iters=" << c.iterations << ";nu=" << format_double(c.nu) << ";c=" << format_double(c.c)
     << ";t=" << format_double(c.t_star) << ";loss=" << to_string(c.loss)
     << ";target=" << (c.target ? std::to_string(*c.target) : "-") << ";seed=" << c.seed
     << ";best=" << c.track_best << ";mu=" << static_cast<int>(c.mu_init)
     << ";sched=" << static_cast<int>(c.schedule) << ";alpha=" << static_cast<int>(c.alpha_mode)
     << ";pair=" << static_cast<int>(c.target_alpha_pair) << ";stop=" << static_cast<int>(c.resolved_stop()) << ";box=" << format_double(c.lo) << ','
     << format_double(c.hi);
  return sha256_hex(os.str()).substr(0, 16);
}

std::string report_to_csv(const EvalReport& rep) {
  std::string out =
      "defense,attack,examples,clean_correct,clean_accuracy,robust_accuracy,mean_iterations_to_success,"
      "dummy_capture_rate,dataset_digest,seed,config_digest\n";
  auto row = [&](const std::string& attack, double robust, double iters, double capture, const std::string& digest) {
    out += rep.defense + ',' + attack + ',' + std::to_string(rep.examples) + ',' + std::to_string(rep.clean_correct) +
           ',' + format_double(rep.clean_accuracy) + ',' + format_double(robust) + ',' + format_double(iters) + ',' +
           format_double(capture) + ',' + rep.dataset_digest + ',' + std::to_string(rep.seed) + ',' + digest + '\n';
  };
  row("none", rep.clean_accuracy, 0.0, 0.0, "-");
  for (const auto& a : rep.attacks)
    row(a.spec.name, a.robust_accuracy, a.mean_iterations_to_success, a.dummy_capture_rate, config_digest(a.spec));
  return out;
}

std::string convergence_to_csv(const std::vector<std::string>& names, const std::vector<ConvergenceTrace>& traces) {
  if (names.size() != traces.size()) throw ArgumentError("convergence_to_csv: one name per trace");
  std::string out = "iteration";
  for (const auto& n : names) out += ',' + n;
  out += '\n';
  const std::size_t len = traces.empty() ? 0 : traces.front().size();
  for (std::size_t i = 0; i < len; ++i) {
    out += std::to_string(i);
    for (const auto& t : traces) out += ',' + format_double(t.at(i));
    out += '\n';
  }
  return out;
}

std::string ablation_to_csv(const AblationCurve& curve) {
  std::string out = "c,log10_c,robust_accuracy\n";
  for (const auto& p : curve)
    out += format_double(p.c) + ',' + format_double(std::log10(p.c)) + ',' + format_double(p.robust_accuracy) + '\n';
  return out;
}

}  // namespace dawa
