#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "dawa/numkit.hpp"
#include "dawa/rng.hpp"
#include "oracles.hpp"

using namespace dawa;
using numkit::Vector;
using V = Vector<double>;

TEST_CASE("log_softmax: symmetric pair") {
  const V out = numkit::log_softmax(V{{0.0, 0.0}});
  CHECK(out(0) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  CHECK(out(1) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("log_softmax: large logits do not overflow") {
  const V out = numkit::log_softmax(V{{1000.0, 0.0}});
  CHECK(numkit::all_finite(out));
  CHECK(std::abs(out(0)) < 1e-300);
  CHECK(out(1) == doctest::Approx(-1000.0));
}

TEST_CASE("log_softmax: matches long double evaluation") {
  const V z{{1.0, 2.0, 3.0}};
  const V out = numkit::log_softmax(z);
  long double s = 0;
  for (int i = 0; i < 3; ++i) s += std::exp(static_cast<long double>(z(i)));
  for (int i = 0; i < 3; ++i) CHECK(std::abs(out(i) - static_cast<double>(z(i) - std::log(s))) < 1e-12);
}

TEST_CASE("log_softmax: normalization holds for wide ranges") {
  Rng rng{1};
  for (int t = 0; t < 200; ++t) {
    const Index n = 2 + static_cast<Index>(rng.next() % 31);
    const V z = oracle::random_vec(rng, n, -1000, 1000);
    const V out = numkit::log_softmax(z);
    CHECK((out.array() <= 0).all());
    CHECK(std::abs(out.array().exp().sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("log_softmax: rejects empty and non-finite input") {
  CHECK_THROWS_AS(numkit::log_softmax(V(0)), DimensionError);
  CHECK_THROWS_AS(numkit::log_softmax(V{{1.0, NAN}}), ArgumentError);
  CHECK_THROWS_AS(numkit::log_softmax(V{{1.0, INFINITY}}), ArgumentError);
}

TEST_CASE("cross_entropy: examples") {
  const auto a = numkit::cross_entropy(V{{0.0, 0.0}}, 0);
  CHECK(a.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(a.grad(0) == doctest::Approx(-0.5));
  CHECK(a.grad(1) == doctest::Approx(0.5));

  const auto b = numkit::cross_entropy(V{{10.0, 0.0}}, 0);
  CHECK(b.loss == doctest::Approx(std::log1p(std::exp(-10.0))).epsilon(1e-12));
  CHECK(b.loss == doctest::Approx(4.54e-5).epsilon(1e-3));
}

TEST_CASE("cross_entropy: gradient sums to zero and matches finite differences") {
  Rng rng{2};
  for (int t = 0; t < 40; ++t) {
    const Index n = 2 + static_cast<Index>(t % 31);
    const V z = oracle::random_vec(rng, n, -3, 3);
    const Index label = static_cast<Index>(rng.next() % static_cast<std::uint64_t>(n));
    const auto ce = numkit::cross_entropy(z, label);
    CHECK(std::abs(ce.grad.sum()) < 1e-12);
    const V fd = oracle::central_diff([&](const V& v) { return numkit::cross_entropy(v, label).loss; }, z);
    CHECK(oracle::rel_err(ce.grad, fd) < 1e-6);
  }
}

TEST_CASE("cross_entropy: label out of range") {
  CHECK_THROWS_AS(numkit::cross_entropy(V{{0.0, 0.0}}, 2), IndexError);
  CHECK_THROWS_AS(numkit::cross_entropy(V{{0.0, 0.0}}, -1), IndexError);
}

TEST_CASE("top2: examples and tie-break") {
  auto a = numkit::top2(V{{3.0, 1.0, 2.0}});
  CHECK(a.first == 0);
  CHECK(a.second == 2);
  auto b = numkit::top2(V{{5.0, 5.0, 1.0}});
  CHECK(b.first == 0);
  CHECK(b.second == 1);
  auto c = numkit::top2(V{{1.0, 5.0, 5.0}});
  CHECK(c.first == 1);
  CHECK(c.second == 2);
  CHECK_THROWS_AS(numkit::top2(V{{1.0}}), DimensionError);
}

TEST_CASE("top2: agrees with a stable sort") {
  Rng rng{3};
  for (int t = 0; t < 100; ++t) {
    V z = oracle::random_vec(rng, 2 + t % 9, -2, 2);
    // Coarse values so ties actually occur.
    for (Index i = 0; i < z.size(); ++i) z(i) = std::round(z(i) * 2) / 2;
    std::vector<Index> idx(static_cast<std::size_t>(z.size()));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Index p, Index q) { return z(p) > z(q); });
    const auto got = numkit::top2(z);
    CHECK(got.first == idx[0]);
    CHECK(got.second == idx[1]);
  }
}

TEST_CASE("project: examples") {
  using Spec = numkit::ProjectionSpec<double>;
  const V c{{0.3, 0.7}};
  CHECK(numkit::project(c, Spec(c, 0.2)) == c);
  CHECK(numkit::project(V{{0.9}}, Spec(V{{0.5}}, 0.1))(0) == doctest::Approx(0.6));
  CHECK(numkit::project(V{{-0.2}}, Spec(V{{0.05}}, 0.1))(0) == 0.0);
  CHECK_THROWS_AS(numkit::project(V{{0.1, 0.2, 0.3}}, Spec(c, 0.1)), DimensionError);
  CHECK_THROWS_AS(Spec(c, -0.1), ArgumentError);
  CHECK_THROWS_AS(Spec(c, 0.1, 1.0, 0.0), ArgumentError);
}

TEST_CASE("project: feasible, idempotent, identity on feasible points") {
  Rng rng{4};
  for (int t = 0; t < 200; ++t) {
    const V c = oracle::random_vec(rng, 6, 0, 1);
    const numkit::ProjectionSpec<double> spec(c, rng.uniform(0, 0.3));
    const V v = oracle::random_vec(rng, 6, -0.5, 1.5);
    const V p = numkit::project(v, spec);
    CHECK(spec.contains(p, 1e-15));  // (c + eps) - c may round one ulp past eps
    CHECK(numkit::project(p, spec) == p);
  }
}

TEST_CASE("sign: zero maps to zero") {
  const V s = numkit::sign(V{{-2.0, 0.0, 3.0}});
  CHECK(s == V{{-1.0, 0.0, 1.0}});
}

TEST_CASE("StopGrad: detached factor contributes no derivative") {
  // f(z) = s * z with s = StopGrad(g(z0)); the derivative is s, not s + z g'(z).
  const double z0 = 1.7;
  const numkit::StopGrad<double> s(z0 * z0);
  CHECK(numkit::StopGrad<double>::derivative() == 0.0);
  const double analytic = s.value() + z0 * numkit::StopGrad<double>::derivative();
  // Same graph with the factor hard-coded as a literal constant.
  const double literal = 2.89;
  const double h = 1e-6;
  const double fd = (literal * (z0 + h) - literal * (z0 - h)) / (2 * h);
  CHECK(analytic == doctest::Approx(fd).epsilon(1e-9));
}

TEST_CASE("numkit templates instantiate for long double") {
  using VL = Vector<long double>;
  const auto ce = numkit::cross_entropy(VL{{0.0L, 0.0L}}, 1);
  CHECK(std::abs(ce.loss - std::log(2.0L)) < 1e-18L);
}
