// Drives the built CLI binary end to end on a small problem.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "dawa_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + DAWA_CLI_PATH + "\" " + args + " > \"" + (kWork / "log.txt").string() +
                          "\" 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string at(const std::string& name) { return "\"" + (kWork / name).string() + "\""; }

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    REQUIRE(run("gen-data --classes 3 --dim 6 --per-class 30 --test-per-class 10 --spread 0.2 --out " +
                at("train.csv") + " --test-out " + at("test.csv")) == 0);
    REQUIRE(run("train --dataset " + at("train.csv") + " --out " + at("m.bin") +
                " --epochs 3 --hidden 16 --batch-size 16") == 0);
  }
};

}  // namespace

TEST_CASE("cli: pipeline, empty eval, idempotent report, manifests") {
  Workspace w;
  CHECK(fs::exists(kWork / "test.csv"));
  CHECK(fs::exists(kWork / "m.bin.manifest.json"));

  REQUIRE(run("eval --dataset " + at("test.csv") + " --model " + at("m.bin") + " --attacks \"\" --out " +
              at("empty.csv")) == 0);
  const std::string empty = slurp(kWork / "empty.csv");
  CHECK(std::count(empty.begin(), empty.end(), '\n') == 2);
  CHECK(empty.find(",none,") != std::string::npos);

  REQUIRE(run("eval --dataset " + at("test.csv") + " --model " + at("m.bin") +
              " --attacks pgd,dawa --iters 10 --out " + at("r.csv") + " --convergence " + at("conv.csv")) == 0);
  REQUIRE(run("report --inputs " + at("r.csv") + " --out " + at("t1.csv")) == 0);
  REQUIRE(run("report --inputs " + at("r.csv") + " --out " + at("t2.csv")) == 0);
  CHECK(slurp(kWork / "t1.csv") == slurp(kWork / "t2.csv"));
  CHECK(slurp(kWork / "conv.csv").rfind("iteration,pgd,dawa\n", 0) == 0);

  const auto manifest = nlohmann::json::parse(slurp(kWork / "r.csv.manifest.json"));
  CHECK(manifest["command"] == "eval");
  CHECK(manifest["inputs"]["model"]["sha256"].get<std::string>().size() == 64);

  REQUIRE(run("attack --dataset " + at("test.csv") + " --model " + at("m.bin") +
              " --loss dawa-mt --iters 5 --out " + at("atk")) == 0);
  CHECK(fs::exists(kWork / "atk.adv.csv"));
  CHECK(fs::exists(kWork / "atk.results.csv"));

  REQUIRE(run("ablate --dataset " + at("test.csv") + " --model " + at("m.bin") + " --iters 5 --c-grid 0.5,2 --out " +
              at("ab.csv")) == 0);
  CHECK(slurp(kWork / "ab.csv").rfind("c,log10_c,robust_accuracy\n", 0) == 0);
}

TEST_CASE("cli: bad input exits nonzero with a diagnostic") {
  Workspace w;
  CHECK(run("eval --dataset " + at("test.csv") + " --model " + at("m.bin") + " --nu 2") != 0);
  CHECK(slurp(kWork / "log.txt").find("nu") != std::string::npos);
  CHECK(run("eval --dataset " + at("test.csv") + " --model " + at("train.csv")) != 0);
  CHECK(slurp(kWork / "log.txt").find("error") != std::string::npos);
  CHECK(run("attack --dataset " + at("test.csv") + " --model " + at("m.bin") + " --loss dawa-targeted") != 0);
  CHECK(slurp(kWork / "log.txt").find("target") != std::string::npos);
}

TEST_CASE("cli: config file values apply and flags override them") {
  Workspace w;
  {
    std::ofstream cfg(kWork / "run.ini");
    cfg << "[eval]\niters=7\nattacks=dawa\n";
  }
  REQUIRE(run("--config " + at("run.ini") + " eval --dataset " + at("test.csv") + " --model " + at("m.bin") +
              " --out " + at("c1.csv")) == 0);
  auto m1 = nlohmann::json::parse(slurp(kWork / "c1.csv.manifest.json"));
  CHECK(m1["params"]["iters"] == 7);
  REQUIRE(run("--config " + at("run.ini") + " eval --dataset " + at("test.csv") + " --model " + at("m.bin") +
              " --iters 9 --out " + at("c2.csv")) == 0);
  auto m2 = nlohmann::json::parse(slurp(kWork / "c2.csv.manifest.json"));
  CHECK(m2["params"]["iters"] == 9);
}
