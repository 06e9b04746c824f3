#include <doctest.h>

#include <cmath>
#include <memory>

#include "abstain/distribution.hpp"
#include "oracles.hpp"

using namespace abstain;

namespace {

std::shared_ptr<const LabeledDistribution> shared(LabeledDistribution d) {
  return std::make_shared<const LabeledDistribution>(std::move(d));
}

}  // namespace

TEST_CASE("distribution invariants") {
  auto space = make_grid_space(2);
  CHECK_THROWS(LabeledDistribution(space, {0.6, 0.5}, {0.5, 0.5}));   // sum != 1
  CHECK_THROWS(LabeledDistribution(space, {-0.1, 1.1}, {0.5, 0.5}));  // negative weight
  CHECK_THROWS(LabeledDistribution(space, {0.5, 0.5}, {1.5, 0.5}));   // eta out of range
  LabeledDistribution ok(space, {0.25, 0.75}, {0.1, 0.9});
  CHECK(ok.px(1) == doctest::Approx(0.75));
}

TEST_CASE("massart margin") {
  auto space = make_grid_space(3);
  // eta values in {(1-h)/2, (1+h)/2} give margin exactly h
  double h = 0.37;
  LabeledDistribution d(space, {0.2, 0.5, 0.3}, {(1 - h) / 2, (1 + h) / 2, (1 + h) / 2});
  CHECK(d.massart_margin() == doctest::Approx(h).epsilon(1e-15));
  // zero-mass points are ignored
  LabeledDistribution z(space, {0.5, 0.5, 0.0}, {0.0, 1.0, 0.5});
  CHECK(z.massart_margin() == 1.0);
  // deterministic labels
  LabeledDistribution det(space, {0.2, 0.3, 0.5}, {0.0, 1.0, 1.0});
  CHECK(det.massart_margin() == 1.0);
}

TEST_CASE("bayes classifier uses the inclusive threshold") {
  auto space = make_grid_space(3);
  LabeledDistribution d(space, {0.3, 0.4, 0.3}, {1.0, 0.5, 0.2});
  auto f = bayes_classifier(d);
  CHECK(f(0) == 1);
  CHECK(f(1) == 1);  // eta = 1/2 predicts 1
  CHECK(f(2) == 0);
  // eta identically one
  LabeledDistribution ones(space, {0.3, 0.4, 0.3}, {1.0, 1.0, 1.0});
  for (int x = 0; x < 3; ++x) CHECK(bayes_classifier(ones)(x) == 1);
  // random distribution: pointwise scan
  std::mt19937_64 gen(3);
  auto rd = oracle::random_distribution(16, gen);
  auto g = bayes_classifier(rd);
  for (int x = 0; x < 16; ++x) CHECK(g(x) == (rd.eta(x) >= 0.5 ? 1 : 0));
}

TEST_CASE("bayes chow classifier boundary behavior") {
  auto space = make_grid_space(3);
  LabeledDistribution d(space, {0.3, 0.4, 0.3}, {0.5, 1.0, 0.55});
  auto f01 = bayes_chow_classifier(d, 0.1);
  CHECK(f01(0) == kAbstain);  // margin 0 < 0.2
  CHECK(f01(1) == 1);
  auto f005 = bayes_chow_classifier(d, 0.05);
  CHECK(f005(2) == 1);  // margin 0.1 >= 0.1, inclusive
  CHECK_THROWS(bayes_chow_classifier(d, 0.0));
  CHECK_THROWS(bayes_chow_classifier(d, 0.6));
}

TEST_CASE("chow classifier never abstains under small p and matches bayes") {
  // mirrors the bounded-noise adaptivity: p <= h/2 keeps the Bayes rule optimal
  auto space = make_grid_space(8);
  double h = 0.5;
  std::vector<double> px(8, 0.125), eta;
  for (int x = 0; x < 8; ++x) eta.push_back(x < 4 ? (1 - h) / 2 : (1 + h) / 2);
  LabeledDistribution d(space, px, eta);
  for (double p : {0.05, 0.1, 0.25}) {
    auto f = bayes_chow_classifier(d, p);
    CHECK_FALSE(f.abstains_somewhere());
    auto b = bayes_classifier(d);
    CHECK(f.predictions == b.predictions);
  }
}

TEST_CASE("pool: trivial draws and replay determinism") {
  auto space = make_grid_space(4);
  auto point_mass = shared(LabeledDistribution(space, {0.0, 1.0, 0.0, 0.0}, {0.5, 0.5, 0.5, 0.5}));
  Pool pool(point_mass, 99);
  CHECK(pool.sample(0).empty());
  for (int32_t x : pool.sample(50)) CHECK(x == 1);
  CHECK(pool.draws_made() == 50);

  std::mt19937_64 gen(5);
  auto d = shared(oracle::random_distribution(8, gen));
  Pool a(d, 1234), b(d, 1234), c(d, 1235);
  auto sa = a.sample(200), sb = b.sample(200), sc = c.sample(200);
  CHECK(sa == sb);
  CHECK(sa != sc);
}

TEST_CASE("pool frequencies concentrate (Hoeffding at delta = 1e-6)") {
  auto space = make_grid_space(4);
  auto uniform = shared(LabeledDistribution(space, {0.25, 0.25, 0.25, 0.25}, {0, 0, 1, 1}));
  Pool pool(uniform, 2024);
  const int64_t n = 100000;
  std::vector<int64_t> counts(4, 0);
  for (int64_t i = 0; i < n; ++i) ++counts[static_cast<size_t>(pool.draw())];
  // radius sqrt(ln(2/1e-6) / 2n) ~ 0.0085 < 0.01
  for (int x = 0; x < 4; ++x)
    CHECK(std::abs(static_cast<double>(counts[static_cast<size_t>(x)]) / n - 0.25) < 0.01);
}

TEST_CASE("label oracle: deterministic etas, counter accounting, empirical mean") {
  auto space = make_grid_space(3);
  auto d = shared(LabeledDistribution(space, {0.4, 0.3, 0.3}, {0.0, 1.0, 0.3}));
  LabelOracle oracle(d, 7);
  for (int i = 0; i < 20; ++i) {
    CHECK(oracle.query(0) == 0);
    CHECK(oracle.query(1) == 1);
  }
  CHECK(oracle.requests_made() == 40);
  CHECK_THROWS(oracle.query(5));

  const int64_t n = 100000;
  int64_t ones = 0;
  for (int64_t i = 0; i < n; ++i) ones += oracle.query(2);
  CHECK(std::abs(static_cast<double>(ones) / n - 0.3) < 0.01);  // Hoeffding at 1e-6
  CHECK(oracle.requests_made() == 40 + n);
}

TEST_CASE("keyed label stream is reproducible and counted") {
  auto space = make_grid_space(2);
  auto d = shared(LabeledDistribution(space, {0.5, 0.5}, {0.4, 0.6}));
  LabelOracle a(d, 11), b(d, 11);
  for (uint64_t k = 0; k < 100; ++k) CHECK(a.query_at(0, k) == b.query_at(0, k));
  CHECK(a.requests_made() == 100);
  // peek matches query_at without accounting
  LabelOracle c(d, 11);
  for (uint64_t k = 0; k < 100; ++k) CHECK(c.peek_at(1, k) == a.peek_at(1, k));
  CHECK(c.requests_made() == 0);
}

TEST_CASE("massart threshold generator") {
  auto d = make_massart_threshold(16, 0.4, 8);
  CHECK(d.massart_margin() == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(d.eta(0) == doctest::Approx(0.3));
  CHECK(d.eta(15) == doctest::Approx(0.7));
  auto b = bayes_classifier(d);
  for (int x = 0; x < 16; ++x) CHECK(b(x) == (x >= 8 ? 1 : 0));
}

TEST_CASE("heavy noisy point generator") {
  auto d = make_heavy_noisy_point(8, 3, 0.5, 0.01);
  CHECK(d.px(3) == doctest::Approx(0.5));
  CHECK(d.eta(3) == doctest::Approx(0.51));
  CHECK(d.massart_margin() == doctest::Approx(0.02).epsilon(1e-9));
}

TEST_CASE("power crossing generator") {
  auto d = make_power_crossing(256, 3.0);
  CHECK(d.eta(0) < 0.01);
  CHECK(d.eta(255) > 0.99);
  // antisymmetric around the middle of the grid
  for (int x = 0; x < 128; ++x)
    CHECK(d.eta(x) == doctest::Approx(1.0 - d.eta(255 - x)).epsilon(1e-12));
}

TEST_CASE("misspecified pair: tied risks, deterministic labels, truth outside the class") {
  auto inst = make_misspecified_pair(5, 5);
  CHECK(inst.cls.size() == 2);
  CHECK(inst.dist.massart_margin() == 1.0);
  CHECK(inst.cls.hypothesis(0).predictions != inst.truth.predictions);
  CHECK(inst.cls.hypothesis(1).predictions != inst.truth.predictions);
  double r0 = oracle::binary_risk(inst.cls.hypothesis(0), inst.dist);
  double r1 = oracle::binary_risk(inst.cls.hypothesis(1), inst.dist);
  CHECK(r0 == doctest::Approx(r1).epsilon(1e-12));
  CHECK(oracle::binary_risk(inst.truth, inst.dist) == doctest::Approx(0.0));
}
