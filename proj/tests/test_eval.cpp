#include <cmath>

#include "doctest.h"
#include "dawa/evalharness.hpp"
#include "dawa/report.hpp"
#include "oracles.hpp"

using namespace dawa;

namespace {

struct Setup {
  Dataset data;
  Model model = oracle::random_model({6, 16, 6}, 3, 71);

  Setup() {
    GenSpec g;
    g.num_classes = 3;
    g.dim = 6;
    g.per_class = 15;
    g.spread = 0.2;
    data = gen_dataset(g);
  }
};

AttackSpec named(const std::string& name, double eps = 0.1, int iters = 20) {
  AttackConfig shared;
  shared.epsilon = eps;
  shared.iterations = iters;
  return standard_attack(name, shared);
}

ReportRow row(const std::string& defense, const std::string& attack, double robust, std::size_t n = 100,
              std::size_t correct = 90, const std::string& digest = "d") {
  ReportRow r;
  r.defense = defense;
  r.attack = attack;
  r.examples = n;
  r.clean_correct = correct;
  r.clean_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  r.robust_accuracy = robust;
  r.dataset_digest = digest;
  return r;
}

}  // namespace

TEST_CASE("robust_accuracy: null attack equals clean accuracy") {
  Setup s;
  for (const auto& name : standard_attack_names()) {
    const auto e = robust_accuracy(s.model, s.data, named(name, 0.0, 5));
    CHECK(e.robust_accuracy == e.clean_accuracy);
    CHECK(e.clean_accuracy == clean_accuracy(s.model, s.data));
  }
}

TEST_CASE("robust_accuracy: bounded by clean accuracy, sound and feasible") {
  Setup s;
  EvalOptions opt;
  opt.instrument = true;
  for (const auto& name : standard_attack_names()) {
    const auto e = robust_accuracy(s.model, s.data, named(name, 0.15, 10), opt);
    CHECK(e.robust_accuracy <= e.clean_accuracy);
    CHECK(e.soundness_violations == 0);
    CHECK(e.feasibility_violations == 0);
    for (const auto& o : e.outcomes)
      if (o.succeeded && o.clean_correct) CHECK(o.final_margin < 0);
  }
}

TEST_CASE("robust_accuracy: thread count does not change results") {
  Setup s;
  EvalOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = robust_accuracy(s.model, s.data, named("dawa"), one);
  const auto b = robust_accuracy(s.model, s.data, named("dawa"), four);
  CHECK(a.robust_accuracy == b.robust_accuracy);
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) CHECK(a.outcomes[i].final_margin == b.outcomes[i].final_margin);
}

TEST_CASE("robust_accuracy: empty dataset") {
  Setup s;
  Dataset empty;
  empty.dim = 6;
  empty.num_classes = 3;
  CHECK_THROWS_AS(robust_accuracy(s.model, empty, named("pgd")), ArgumentError);
}

TEST_CASE("convergence_trace: monotone and consistent with robust accuracy") {
  Setup s;
  const std::vector<AttackSpec> specs{named("pgd"), named("dawa")};
  const auto traces = convergence_traces(s.model, s.data, specs);
  REQUIRE(traces.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& t = traces[k];
    CHECK(t.size() == 21);
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] >= t[i - 1]);
    const auto e = robust_accuracy(s.model, s.data, specs[k]);
    const double base = e.clean_accuracy;
    CHECK(t.back() == doctest::Approx(1.0 - e.robust_accuracy / base).epsilon(1e-12));
  }
  // An attack that cannot move never succeeds.
  const auto still = convergence_traces(s.model, s.data, {named("dawa", 0.0, 20)});
  for (double v : still[0]) CHECK(v == 0.0);
}

TEST_CASE("convergence_traces: mismatched budgets are rejected") {
  Setup s;
  CHECK_THROWS_AS(convergence_traces(s.model, s.data, {named("pgd", 0.1, 20), named("dawa", 0.1, 30)}),
                  ArgumentError);
  CHECK_THROWS_AS(convergence_traces(s.model, s.data, {named("dawa-mt")}), ArgumentError);
}

TEST_CASE("ablation_sweep: singleton grid and hard-threshold limit") {
  Setup s;
  const AttackSpec base = named("dawa", 0.15, 20);
  const auto one = ablation_sweep(s.model, s.data, {2.0}, base);
  REQUIRE(one.size() == 1);
  AttackSpec at2 = base;
  at2.config.c = 2.0;
  CHECK(one[0].robust_accuracy == robust_accuracy(s.model, s.data, at2).robust_accuracy);

  AttackSpec hard = base;
  hard.config.alpha_mode = AlphaMode::Hard;
  const auto sharp = ablation_sweep(s.model, s.data, {100.0}, base);
  CHECK(std::abs(sharp[0].robust_accuracy - robust_accuracy(s.model, s.data, hard).robust_accuracy) <= 0.005 + 1e-12);

  const auto grid = default_c_grid();
  REQUIRE(grid.size() == 7);
  CHECK(grid.front() == doctest::Approx(0.1));
  CHECK(grid.back() == doctest::Approx(100.0));
}

TEST_CASE("evaluate: zero attacks reports clean accuracy only") {
  Setup s;
  const auto rep = evaluate(s.model, s.data, {}, "m");
  CHECK(rep.attacks.empty());
  const std::string csv = report_to_csv(rep);
  const auto rows = parse_report_csv(csv);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].attack == "none");
  CHECK(rows[0].robust_accuracy == rep.clean_accuracy);
}

TEST_CASE("evaluate: shared seed required and CSV is reproducible") {
  Setup s;
  AttackSpec a = named("pgd"), b = named("dawa");
  b.config.seed = 9;
  CHECK_THROWS_AS(evaluate(s.model, s.data, {a, b}, "m"), ArgumentError);
  b.config.seed = 0;
  const auto r1 = report_to_csv(evaluate(s.model, s.data, {a, b}, "m"));
  const auto r2 = report_to_csv(evaluate(s.model, s.data, {a, b}, "m"));
  CHECK(r1 == r2);
  CHECK(parse_report_csv(r1).size() == 3);
}

TEST_CASE("config_digest: sensitive to every knob") {
  AttackSpec a = named("dawa");
  AttackSpec b = a;
  CHECK(config_digest(a) == config_digest(b));
  b.config.nu = 0.5;
  CHECK(config_digest(a) != config_digest(b));
  b = a;
  b.config.stop = StopRule::Conventional;
  CHECK(config_digest(a) != config_digest(b));
}

TEST_CASE("compare_table: delta column is the proxy minus multi-target") {
  const std::vector<ReportRow> rows{row("A", "none", 0.9), row("A", "aa-proxy", 0.6), row("A", "dawa-mt", 0.3125),
                                    row("A", "pgd", 0.7), row("B", "pgd", 0.5, 100, 80)};
  const auto t = compare_table(rows);
  CHECK(t.columns == std::vector<std::string>{"defense", "clean", "pgd", "aa-proxy", "dawa-mt", "delta"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].values[0] == doctest::Approx(90.0));
  CHECK(t.rows[0].values[4] == doctest::Approx(t.rows[0].values[2] - t.rows[0].values[3]));
  CHECK(t.rows[0].values[4] == doctest::Approx(28.75));
  CHECK(std::isnan(t.rows[1].values[2]));
}

TEST_CASE("compare_table: single attack gives a two-column table plus clean") {
  const auto t = compare_table({row("A", "none", 0.9), row("A", "dawa", 0.4)});
  CHECK(t.columns == std::vector<std::string>{"defense", "clean", "dawa"});
  CHECK(t.rows[0].values.size() == 2);
  const std::string text = table_to_text(t);
  CHECK(text.find("40.00") != std::string::npos);
  CHECK(text.find("88.81") != std::string::npos);
  CHECK(table_to_csv(t) == "defense,clean,dawa\nA,90,40\n");
}

TEST_CASE("compare_table: inconsistent example sets") {
  CHECK_THROWS_AS(compare_table({row("A", "pgd", 0.5, 100, 90), row("A", "dawa", 0.4, 100, 89)}), ArgumentError);
  CHECK_THROWS_AS(compare_table({row("A", "pgd", 0.5, 100, 90, "x"), row("A", "dawa", 0.4, 100, 90, "y")}),
                  ArgumentError);
}

TEST_CASE("parse_report_csv: malformed input") {
  CHECK_THROWS_AS(parse_report_csv("a,b\n"), ParseError);
  Setup s;
  std::string csv = report_to_csv(evaluate(s.model, s.data, {}, "m"));
  CHECK_THROWS_AS(parse_report_csv(csv + "x,y\n"), ParseError);
}
