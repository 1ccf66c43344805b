#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dawa/dummynet.hpp"
#include "dawa/numkit.hpp"
#include "oracles.hpp"

using namespace dawa;

namespace {

// Picks a random input whose hidden pre-activations all sit at least 1e-3 from zero.
Vec away_from_kinks(const Model& m, Rng& rng) {
  for (;;) {
    Vec x = oracle::random_vec(rng, m.input_dim(), 0, 1);
    if (oracle::kink_distance(m, x) >= 1e-3) return x;
  }
}

template <typename T>
void put(std::string& s, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  s.append(b, sizeof(T));
}

}  // namespace

TEST_CASE("forward: zero model gives zero logits") {
  const Model m({5, 7, 6}, 3);
  Rng rng{1};
  for (int t = 0; t < 5; ++t) CHECK(logits(m, oracle::random_vec(rng, 5, 0, 1)).values().isZero(0));
}

TEST_CASE("forward: single linear layer is Wx + b") {
  Model m = oracle::random_model({4, 6}, 3, 9);
  const Vec x{{0.1, 0.9, 0.4, 0.6}};
  const Vec expect = m.weight(0) * x + m.bias(0);
  CHECK((logits(m, x).values() - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("forward: matches a plain-loop reimplementation") {
  const Model m = oracle::random_model({16, 32, 32, 8}, 4, 5);
  Rng rng{6};
  for (int t = 0; t < 50; ++t) {
    const Vec x = oracle::random_vec(rng, 16, 0, 1);
    const auto ref = oracle::forward(m, x);
    const Vec z = logits(m, x).values();
    for (Index i = 0; i < 8; ++i) CHECK(std::abs(z(i) - ref[static_cast<std::size_t>(i)]) < 1e-12);
  }
}

TEST_CASE("forward: deterministic and tape replays the same logits") {
  const Model m = oracle::random_model({8, 12, 4}, 2, 3);
  const Vec x = Vec::Constant(8, 0.4);
  const auto a = forward(m, x);
  const auto b = forward(m, x);
  CHECK(a.logits.values() == b.logits.values());
  CHECK(a.tape.inputs.size() == m.depth());
  CHECK(logits(m, x).values() == a.logits.values());
}

TEST_CASE("forward: dimension mismatch") {
  const Model m({3, 4}, 2);
  CHECK_THROWS_AS(forward(m, Vec::Zero(2)), DimensionError);
}

TEST_CASE("input_grad: zero upstream and linear model") {
  const Model m = oracle::random_model({5, 6}, 3, 2);
  const Vec x = Vec::Constant(5, 0.5);
  const auto f = forward(m, x);
  CHECK(input_grad(m, f.tape, Vec::Zero(6)).isZero(0));
  const Vec g{{1.0, -2.0, 0.5, 0.0, 3.0, -1.0}};
  CHECK((input_grad(m, f.tape, g) - m.weight(0).transpose() * g).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("input_grad: stale tape is rejected") {
  const Model a({5, 6}, 3);
  const Model b({4, 6}, 3);
  const auto f = forward(b, Vec::Zero(4));
  CHECK_THROWS_AS(input_grad(a, f.tape, Vec::Zero(6)), StateError);
  CHECK_THROWS_AS(input_grad(b, f.tape, Vec::Zero(5)), StateError);
}

TEST_CASE("input_grad: cross-entropy through a random model matches finite differences") {
  const Model m = oracle::random_model({16, 24, 24, 8}, 4, 11);
  Rng rng{12};
  for (int t = 0; t < 20; ++t) {
    const Vec x = away_from_kinks(m, rng);
    const Index y = t % 4;
    const auto f = forward(m, x);
    const Vec g = input_grad(m, f.tape, numkit::cross_entropy(f.logits.values(), y).grad);
    const Vec fd =
        oracle::central_diff([&](const Vec& v) { return numkit::cross_entropy(logits(m, v).values(), y).loss; }, x);
    CHECK(oracle::rel_err(g, fd) < 1e-5);
  }
}

TEST_CASE("param_grad: zero upstream and single layer outer product") {
  const Model m = oracle::random_model({3, 4}, 2, 4);
  const Vec x{{0.2, 0.5, 0.9}};
  const auto f = forward(m, x);
  const auto zero = param_grad(m, f.tape, Vec::Zero(4));
  CHECK(zero.weights[0].isZero(0));
  CHECK(zero.biases[0].isZero(0));
  const Vec g{{1.0, -1.0, 2.0, 0.5}};
  const auto pg = param_grad(m, f.tape, g);
  CHECK((pg.weights[0] - g * x.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(pg.biases[0] == g);
}

TEST_CASE("param_grad: sampled parameters match finite differences") {
  const Model m = oracle::random_model({16, 24, 24, 8}, 4, 13);
  Rng rng{14};
  const Vec x = away_from_kinks(m, rng);
  const Index y = 2;
  const auto f = forward(m, x);
  const auto pg = param_grad(m, f.tape, numkit::cross_entropy(f.logits.values(), y).grad);
  for (int t = 0; t < 10; ++t) {
    const std::size_t l = rng.next() % m.depth();
    const bool bias = rng.next() % 2 == 0;
    Model p = m, q = m;
    double analytic = 0;
    const double h = 1e-5;
    if (bias) {
      const Index r = static_cast<Index>(rng.next() % static_cast<std::uint64_t>(m.bias(l).size()));
      p.bias(l)(r) += h;
      q.bias(l)(r) -= h;
      analytic = pg.biases[l](r);
    } else {
      const Index r = static_cast<Index>(rng.next() % static_cast<std::uint64_t>(m.weight(l).rows()));
      const Index c = static_cast<Index>(rng.next() % static_cast<std::uint64_t>(m.weight(l).cols()));
      p.weight(l)(r, c) += h;
      q.weight(l)(r, c) -= h;
      analytic = pg.weights[l](r, c);
    }
    const double fd = (numkit::cross_entropy(logits(p, x).values(), y).loss -
                       numkit::cross_entropy(logits(q, x).values(), y).loss) /
                      (2 * h);
    CHECK(std::abs(analytic - fd) <= 1e-5 * std::max({std::abs(analytic), std::abs(fd), 1e-6}));
  }
}

TEST_CASE("predict_dummy: examples") {
  const auto a = predict_dummy(Logits(Vec{{1.0, 0, 0, 0, 0, 0}}, 3));
  CHECK(a.predicted_class == 0);
  CHECK(a.raw_argmax == 0);
  const auto b = predict_dummy(Logits(Vec{{0.0, 0, 0, 0, 5, 0}}, 3));
  CHECK(b.predicted_class == 1);
  CHECK(b.raw_argmax == 4);
}

TEST_CASE("predict_dummy: brute force and shift invariance") {
  Rng rng{15};
  for (int t = 0; t < 1000; ++t) {
    const Index k = 2 + t % 5;
    const Vec z = oracle::random_vec(rng, 2 * k, -5, 5);
    const std::vector<double> zv(z.data(), z.data() + z.size());
    const auto p = predict_dummy(Logits(z, k));
    CHECK(p.raw_argmax == oracle::raw_argmax(zv));
    CHECK(p.predicted_class == oracle::folded_argmax(zv, k));
    const auto s = predict_dummy(Logits(Vec(z.array() + rng.uniform(-100, 100)), k));
    CHECK(s.predicted_class == p.predicted_class);
  }
}

TEST_CASE("LogitVector: size must be 2K") {
  CHECK_THROWS_AS(Logits(Vec::Zero(5), 3), DimensionError);
  const Logits z(Vec{{1.0, 2.0, 3.0, 4.0}}, 2);
  CHECK(z.authentic(1) == 2.0);
  CHECK(z.dummy(1) == 4.0);
}

TEST_CASE("Mlp: construction rules") {
  CHECK_THROWS_AS(Model({4}, 2), ArgumentError);
  CHECK_THROWS_AS(Model({4, 5}, 2), ArgumentError);
  CHECK_THROWS_AS(Model({4, 0, 4}, 2), ArgumentError);
  const Model m = Model::glorot_uniform({4, 3, 4}, 2, 1);
  CHECK(m.parameter_count() == 4 * 3 + 3 + 3 * 4 + 4);
  const double a = std::sqrt(6.0 / 7.0);
  CHECK(m.weight(0).cwiseAbs().maxCoeff() <= a);
  CHECK(m == Model::glorot_uniform({4, 3, 4}, 2, 1));
  CHECK_FALSE(m == Model::glorot_uniform({4, 3, 4}, 2, 2));
}

TEST_CASE("model file: round trip is bit exact") {
  const Model m = oracle::random_model({16, 20, 8}, 4, 21);
  const Model back = deserialize_model(serialize_model(m));
  CHECK(back == m);
  Rng rng{22};
  for (int t = 0; t < 100; ++t) {
    const Vec x = oracle::random_vec(rng, 16, 0, 1);
    CHECK(logits(back, x).values() == logits(m, x).values());
  }
  const auto path = std::filesystem::temp_directory_path() / "dawa_test_model.bin";
  save_model(m, path);
  CHECK(load_model(path) == m);
  std::filesystem::remove(path);
}

TEST_CASE("model file: truncation and corruption raise ParseError") {
  const std::string bytes = serialize_model(oracle::random_model({4, 6}, 3, 1));
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{12}, bytes.size() - 1})
    CHECK_THROWS_AS(deserialize_model(bytes.substr(0, cut)), ParseError);
  CHECK_THROWS_AS(deserialize_model(bytes + "x"), ParseError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_model(bad), ParseError);
  try {
    deserialize_model(bytes.substr(0, bytes.size() - 3));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() <= bytes.size());
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
}

TEST_CASE("model file: hand-written minimal file") {
  // K = 1, one affine layer 1 -> 2: W = [2, -3]^T, b = [0.5, 1].
  std::string s(kModelMagic, 8);
  put<std::uint32_t>(s, 1);
  put<std::uint32_t>(s, 1);
  put<std::uint32_t>(s, 2);
  put<std::uint32_t>(s, 1);
  put<std::uint32_t>(s, 2);
  for (double v : {2.0, -3.0, 0.5, 1.0}) put<double>(s, v);
  const Model m = deserialize_model(s);
  const Vec z = logits(m, Vec{{4.0}}).values();
  CHECK(z(0) == 8.5);
  CHECK(z(1) == -11.0);
  CHECK(serialize_model(m) == s);

  std::string nan_file = s;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(nan_file.data() + nan_file.size() - 8, &nan, 8);
  CHECK_THROWS_AS(deserialize_model(nan_file), ParseError);

  std::string wrong_k = s;
  wrong_k[12] = 3;
  CHECK_THROWS_AS(deserialize_model(wrong_k), ParseError);
}
