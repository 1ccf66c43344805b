// Command-line driver: gen-data, train, attack, eval, ablate, report.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dawa/dataset.hpp"
#include "dawa/ducat_train.hpp"
#include "dawa/evalharness.hpp"
#include "dawa/manifest.hpp"
#include "dawa/report.hpp"

namespace fs = std::filesystem;
using namespace dawa;

namespace {

fs::path output_path(const std::string& given, const std::string& fallback) {
  if (!given.empty()) return given;
  const char* dir = std::getenv("DAWA_OUT_DIR");
  return fs::path(dir && *dir ? dir : ".") / fallback;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path manifest_path(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

struct AttackOptions {
  std::string loss = "dawa";
  double eps = 0.03;
  int iters = 100;
  double nu = 0.75;
  double c = 2.0;
  double t_star = 1.0;
  int target = -1;
  int restarts = 1;
  int mt_budget = 0;
  std::uint64_t seed = 0;
  std::string mu_init = "x0";
  std::string schedule = "alg1";
  std::string alpha = "smooth";
  std::string target_alpha = "target";
  std::string stop = "auto";
  bool track_best = true;
  unsigned threads = 0;

  void add_to(CLI::App* app, bool with_loss) {
    if (with_loss)
      app->add_option("--loss", loss, "Attack objective")
          ->check(CLI::IsMember({"ce", "pgd", "cw", "mifpe", "dawa", "dawa-mt", "dawa-targeted"}));
    app->add_option("--eps", eps, "l-infinity radius in feature units")->capture_default_str();
    app->add_option("--iters", iters, "Iterations per pass")->capture_default_str();
    app->add_option("--nu", nu, "Momentum factor")->capture_default_str();
    app->add_option("--c", c, "Sharpness of the dual-label weight")->capture_default_str();
    app->add_option("--t-star", t_star, "Logit rescale numerator")->capture_default_str();
    app->add_option("--target", target, "Target class for dawa-targeted");
    app->add_option("--restarts", restarts, "Random restarts per example")->capture_default_str();
    app->add_option("--mt-budget", mt_budget, "Total budget for dawa-mt (default 10 x iters)");
    app->add_option("--seed", seed, "Attack seed")->capture_default_str();
    app->add_option("--mu-init", mu_init, "Momentum start")->check(CLI::IsMember({"x0", "zero"}))->capture_default_str();
    app->add_option("--schedule", schedule, "Step schedule: alg1 = eps(1+cos), sec4 = 2eps(1+cos)")
        ->check(CLI::IsMember({"alg1", "sec4"}))
        ->capture_default_str();
    app->add_option("--alpha", alpha, "Dual-label weight")->check(CLI::IsMember({"smooth", "hard"}))->capture_default_str();
    app->add_option("--target-alpha", target_alpha, "Label pair driving alpha in the targeted loss")
        ->check(CLI::IsMember({"target", "true"}))
        ->capture_default_str();
    app->add_option("--stop", stop,
                    "Early-stop and best-iterate rule: auto = dummy for dawa losses, raw otherwise; "
                    "dummy = dummy-aware margin; raw = plain argmax over all 2K logits")
        ->check(CLI::IsMember({"auto", "dummy", "raw"}))
        ->capture_default_str();
    app->add_flag("--track-best,!--no-track-best", track_best, "Return the lowest-margin iterate on failure");
    app->add_option("--threads", threads, "Worker threads (0 = all cores)");
  }

  AttackConfig config() const {
    AttackConfig cfg;
    cfg.epsilon = eps;
    cfg.iterations = iters;
    cfg.nu = nu;
    cfg.c = c;
    cfg.t_star = t_star;
    cfg.seed = seed;
    cfg.track_best = track_best;
    cfg.mu_init = mu_init == "zero" ? MuInit::Zero : MuInit::X0;
    cfg.schedule = schedule == "sec4" ? StepSchedule::DoubledCosine : StepSchedule::Cosine;
    cfg.alpha_mode = alpha == "hard" ? AlphaMode::Hard : AlphaMode::Smooth;
    cfg.target_alpha_pair = target_alpha == "true" ? TargetAlphaPair::TrueLabel : TargetAlphaPair::Target;
    cfg.stop = stop == "dummy" ? StopRule::DummyAware : stop == "raw" ? StopRule::Conventional : StopRule::Auto;
    return cfg;
  }

  AttackSpec spec(const std::string& name) const {
    const AttackConfig shared = config();
    if (name == "dawa-targeted") {
      AttackSpec s;
      s.name = name;
      s.config = shared;
      s.config.loss = LossKind::DAWA_TARGETED;
      if (target < 0) throw ArgumentError("target: --target is required with --loss dawa-targeted");
      s.config.target = target;
      s.restarts = restarts;
      return s;
    }
    AttackSpec s = standard_attack(name, shared);
    if (s.protocol == Protocol::Single) s.restarts = restarts;
    if (s.protocol == Protocol::MultiTarget && mt_budget > 0) s.plan.total_budget = mt_budget;
    if (restarts < 1) throw ArgumentError("restarts: must be >= 1");
    return s;
  }

  void record(Manifest& m) const {
    m.param("loss", loss).param("eps", eps).param("iters", iters).param("nu", nu).param("c", c);
    m.param("t_star", t_star).param("target", target).param("restarts", restarts).param("mt_budget", mt_budget);
    m.param("seed", seed).param("mu_init", mu_init).param("schedule", schedule).param("alpha", alpha);
    m.param("target_alpha", target_alpha).param("stop", stop).param("track_best", track_best);
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

Dataset load_checked(const fs::path& path, const Model& model) {
  Dataset data = load_dataset(path);
  data.validate();
  if (data.dim != model.input_dim())
    throw DimensionError("dataset: " + std::to_string(data.dim) + " features but model expects " +
                         std::to_string(model.input_dim()));
  if (data.num_classes != model.num_classes())
    throw DimensionError("dataset: " + std::to_string(data.num_classes) + " classes but model has K=" +
                         std::to_string(model.num_classes()));
  return data;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dummy-class defense training and dummy-aware robustness evaluation"};
  app.set_config("--config", "", "TOML/INI file with option values (flags override it)");
  app.require_subcommand(1);

  // gen-data
  GenSpec gen;
  std::string gen_kind = "blobs", gen_out, gen_test_out;
  Index gen_test = 100;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--kind", gen_kind)->check(CLI::IsMember({"blobs", "rings"}))->capture_default_str();
  gen_cmd->add_option("--classes", gen.num_classes, "K")->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim, "Feature dimension")->capture_default_str();
  gen_cmd->add_option("--per-class", gen.per_class, "Rows per class")->capture_default_str();
  gen_cmd->add_option("--test-per-class", gen_test, "Extra held-out rows per class written to --test-out")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--spread", gen.spread)->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "Dataset CSV");
  gen_cmd->add_option("--test-out", gen_test_out, "Held-out dataset CSV");

  // train
  TrainConfig tc;
  std::string train_data, train_out;
  auto* train_cmd = app.add_subcommand("train", "Train a dummy-class defended model");
  train_cmd->add_option("--dataset", train_data)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "Model file");
  train_cmd->add_option("--epochs", tc.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", tc.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", tc.learning_rate)->capture_default_str();
  train_cmd->add_option("--eps-train", tc.eps_train)->capture_default_str();
  train_cmd->add_option("--pgd-steps", tc.pgd_steps_train)->capture_default_str();
  train_cmd->add_option("--pgd-step", tc.pgd_stepsize_train, "Training PGD step (default eps-train/4)");
  train_cmd->add_option("--lambda-dummy", tc.lambda_dummy)->capture_default_str();
  train_cmd->add_option("--hidden", tc.hidden, "Hidden layer widths")->delimiter(',')->capture_default_str();
  train_cmd->add_option("--seed", tc.seed)->capture_default_str();

  // attack / eval / ablate share the model + dataset inputs
  std::string dataset_path, model_path, out_path, defense = "model", attacks = "pgd,cw,mifpe,dawa,aa-proxy,dawa-mt";
  std::string convergence_out, c_grid;
  AttackOptions ao;
  auto add_inputs = [&](CLI::App* cmd) {
    cmd->add_option("--dataset", dataset_path)->required()->check(CLI::ExistingFile);
    cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out_path, "Output CSV (prefix for attack)");
  };
  auto* attack_cmd = app.add_subcommand("attack", "Attack every example and write adversarials + results");
  add_inputs(attack_cmd);
  ao.add_to(attack_cmd, true);

  auto* eval_cmd = app.add_subcommand("eval", "Robust accuracy for a set of attacks under identical settings");
  add_inputs(eval_cmd);
  ao.add_to(eval_cmd, false);
  eval_cmd->add_option("--attacks", attacks, "Comma-separated attack names (may be empty)")->capture_default_str();
  eval_cmd->add_option("--defense", defense, "Label for the report rows")->capture_default_str();
  eval_cmd->add_option("--convergence", convergence_out, "Also write per-iteration success traces here");

  auto* ablate_cmd = app.add_subcommand("ablate", "Sweep the dual-label sharpness c");
  add_inputs(ablate_cmd);
  ao.add_to(ablate_cmd, false);
  ablate_cmd->add_option("--c-grid", c_grid, "Comma-separated c values (default 10^{-1..2})");

  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Merge evaluation CSVs into a comparison table");
  report_cmd->add_option("--inputs", report_inputs)->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report_out, "Table CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen_cmd) {
      gen.kind = parse_dataset_kind(gen_kind);
      const fs::path out = output_path(gen_out, "dataset.csv");
      GenSpec full = gen;
      full.per_class = gen.per_class + gen_test;
      auto [train_set, test_set] = split_per_class(gen_dataset(full), gen.per_class);
      write_text(out, dataset_to_csv(train_set));
      Manifest m("gen-data");
      m.param("kind", gen_kind).param("classes", gen.num_classes).param("dim", gen.dim);
      m.param("per_class", gen.per_class).param("test_per_class", gen_test).param("seed", gen.seed);
      m.param("spread", gen.spread).output("dataset", out);
      if (gen_test > 0) {
        const fs::path test_out = output_path(gen_test_out, "dataset_test.csv");
        write_text(test_out, dataset_to_csv(test_set));
        m.output("test_dataset", test_out);
      }
      m.write(manifest_path(out));
      std::cout << "wrote " << out << " (" << train_set.size() << " rows)\n";
    } else if (*train_cmd) {
      const Dataset data = load_dataset(train_data);
      const fs::path out = output_path(train_out, "model.bin");
      auto result = train(data, tc, [](const EpochLog& l) {
        std::cerr << "epoch " << l.epoch << "  loss " << l.mean_loss << "  clean " << l.stats.clean_accuracy
                  << "  dummy-capture " << l.stats.dummy_capture_rate << "  discrepancy " << l.stats.discrepancy_rate
                  << '\n';
      });
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      save_model(result.model, out);
      Manifest m("train");
      m.input("dataset", train_data).param("epochs", tc.epochs).param("batch_size", tc.batch_size);
      m.param("lr", tc.learning_rate).param("eps_train", tc.eps_train).param("pgd_steps", tc.pgd_steps_train);
      m.param("pgd_step", tc.step_size()).param("lambda_dummy", tc.lambda_dummy).param("hidden", tc.hidden);
      m.param("seed", tc.seed).output("model", out);
      m.write(manifest_path(out));
      std::cout << "wrote " << out << '\n';
    } else if (*attack_cmd) {
      const Model model = load_model(model_path);
      const Dataset data = load_checked(dataset_path, model);
      std::string name = ao.loss == "ce" ? "pgd" : ao.loss;
      const AttackSpec spec = ao.spec(name);
      EvalOptions opts;
      opts.threads = ao.threads;
      opts.keep_adversarials = true;
      const AttackEvaluation ev = robust_accuracy(model, data, spec, opts);
      const fs::path prefix = output_path(out_path, "attack");
      Dataset adv = data;
      std::string results =
          "index,label,clean_correct,succeeded,iterations_used,success_iterate,final_margin,predicted_class,raw_argmax\n";
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& o = ev.outcomes[i];
        adv.rows[i].x = o.x_adv;
        const Index raw = o.raw_argmax;
        const Index pred = raw < model.num_classes() ? raw : raw - model.num_classes();
        results += std::to_string(i) + ',' + std::to_string(data.rows[i].y) + ',' + std::to_string(o.clean_correct) +
                   ',' + std::to_string(o.succeeded) + ',' + std::to_string(o.iterations_used) + ',' +
                   std::to_string(o.success_iterate) + ',' + format_double(o.final_margin) + ',' +
                   std::to_string(pred) + ',' + std::to_string(raw) + '\n';
      }
      const fs::path adv_path(prefix.string() + ".adv.csv"), res_path(prefix.string() + ".results.csv");
      write_text(adv_path, dataset_to_csv(adv));
      write_text(res_path, results);
      Manifest m("attack");
      m.input("dataset", dataset_path).input("model", model_path);
      ao.record(m);
      m.output("adversarials", adv_path).output("results", res_path);
      m.write(manifest_path(prefix));
      std::cout << name << ": clean " << ev.clean_accuracy << "  robust " << ev.robust_accuracy << "  dummy-capture "
                << ev.dummy_capture_rate << '\n';
    } else if (*eval_cmd) {
      const Model model = load_model(model_path);
      const Dataset data = load_checked(dataset_path, model);
      std::vector<AttackSpec> specs;
      for (const auto& name : split_list(attacks)) specs.push_back(ao.spec(name));
      EvalOptions opts;
      opts.threads = ao.threads;
      const EvalReport rep = evaluate(model, data, specs, defense, opts);
      const fs::path out = output_path(out_path, "report.csv");
      write_text(out, report_to_csv(rep));
      Manifest m("eval");
      m.input("dataset", dataset_path).input("model", model_path).param("attacks", attacks).param("defense", defense);
      ao.record(m);
      m.output("report", out);
      if (!convergence_out.empty()) {
        std::vector<std::string> names;
        std::vector<ConvergenceTrace> traces;
        for (const auto& a : rep.attacks)
          if (a.spec.protocol == Protocol::Single && a.spec.restarts == 1 && a.spec.config.iterations == ao.iters) {
            names.push_back(a.spec.name);
            traces.push_back(convergence_trace(a));
          }
        write_text(convergence_out, convergence_to_csv(names, traces));
        m.output("convergence", convergence_out);
      }
      m.write(manifest_path(out));
      std::cout << "clean " << rep.clean_accuracy << '\n';
      for (const auto& a : rep.attacks)
        std::cout << a.spec.name << "  robust " << a.robust_accuracy << "  dummy-capture " << a.dummy_capture_rate
                  << '\n';
    } else if (*ablate_cmd) {
      const Model model = load_model(model_path);
      const Dataset data = load_checked(dataset_path, model);
      std::vector<double> grid = default_c_grid();
      if (!c_grid.empty()) {
        grid.clear();
        for (const auto& s : split_list(c_grid)) grid.push_back(std::stod(s));
      }
      EvalOptions opts;
      opts.threads = ao.threads;
      const AblationCurve curve = ablation_sweep(model, data, grid, ao.spec("dawa"), opts);
      const fs::path out = output_path(out_path, "ablation.csv");
      write_text(out, ablation_to_csv(curve));
      Manifest m("ablate");
      m.input("dataset", dataset_path).input("model", model_path).param("c_grid", grid);
      ao.record(m);
      m.output("ablation", out);
      m.write(manifest_path(out));
      std::cout << ablation_to_csv(curve);
    } else if (*report_cmd) {
      std::vector<ReportRow> rows;
      Manifest m("report");
      for (std::size_t i = 0; i < report_inputs.size(); ++i) {
        auto part = parse_report_csv(read_text(report_inputs[i]));
        rows.insert(rows.end(), part.begin(), part.end());
        m.input("report_" + std::to_string(i), report_inputs[i]);
      }
      const ComparisonTable table = compare_table(rows);
      const fs::path out = output_path(report_out, "table.csv");
      write_text(out, table_to_csv(table));
      m.output("table", out);
      m.write(manifest_path(out));
      std::cout << table_to_text(table);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
