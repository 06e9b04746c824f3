#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "abstain/diagnostics.hpp"
#include "abstain/learners.hpp"
#include "oracles.hpp"

using namespace abstain;

namespace {

std::shared_ptr<const LabeledDistribution> shared(LabeledDistribution d) {
  return std::make_shared<const LabeledDistribution>(std::move(d));
}

std::vector<int32_t> all_members(const HypothesisClass& cls) {
  std::vector<int32_t> v(static_cast<size_t>(cls.size()));
  for (int i = 0; i < cls.size(); ++i) v[static_cast<size_t>(i)] = i;
  return v;
}

// independent scan for the schedule length in long double arithmetic
int schedule_oracle(double eps, double delta, double p, int d) {
  auto clog = [](long double x) { return std::max(std::log(x), (long double)1.0); };
  for (int k = 1;; ++k) {
    long double n = std::pow(2.0L, k - 1);
    long double dk = delta / ((long double)(k + 1) * (k + 1));
    long double two_n = std::max(2.0L * n, (long double)d);
    long double a2 = (4.0L / n) * (3.0L * d * clog(std::exp(1.0L) * two_n / d) + clog(56.0L / dk));
    if (148.0L * a2 / p <= eps) return k;
  }
}

// exhaustive re-run of the mid-point construction straight from the sample
AbstainingHypothesis midpoint_oracle(const HypothesisClass& cls,
                                     const std::vector<std::pair<int32_t, int>>& sample, double p,
                                     double delta, int d) {
  const int64_t n = static_cast<int64_t>(sample.size());
  auto errors_of = [&](const Hypothesis& f) {
    int64_t e = 0;
    for (auto& [x, y] : sample)
      if (f.predictions[static_cast<size_t>(x)] != static_cast<uint8_t>(y)) ++e;
    return e;
  };
  int32_t ghat = 0;
  int64_t ghat_err = errors_of(cls.hypothesis(0));
  for (int i = 1; i < cls.size(); ++i) {
    int64_t e = errors_of(cls.hypothesis(i));
    if (e < ghat_err) {
      ghat_err = e;
      ghat = i;
    }
  }
  double a = alpha_radius(n, delta, d).value;
  std::vector<int32_t> version;
  for (int i = 0; i < cls.size(); ++i) {
    int64_t agree_mismatch = 0;
    for (auto& [x, y] : sample) {
      (void)y;
      if (cls.hypothesis(i).predictions[static_cast<size_t>(x)] !=
          cls.hypothesis(ghat).predictions[static_cast<size_t>(x)])
        ++agree_mismatch;
    }
    double lhs = static_cast<double>(errors_of(cls.hypothesis(i)) - ghat_err) / static_cast<double>(n);
    double rhs = 2.0 * a * a +
                 2.0 * a * std::sqrt(static_cast<double>(agree_mismatch) / static_cast<double>(n));
    if (lhs <= rhs) version.push_back(i);
  }
  int32_t best = -1;
  double best_risk = 0.0;
  for (int32_t f : version) {
    auto mid = midpoint(cls.hypothesis(f), cls.hypothesis(ghat));
    double risk = chow_risk_empirical(mid, sample, p);
    if (best < 0 || risk < best_risk) {
      best_risk = risk;
      best = f;
    }
  }
  return midpoint(cls.hypothesis(best), cls.hypothesis(ghat));
}

}  // namespace

TEST_CASE("erm: tie-break, consistency, exhaustive scan") {
  std::mt19937_64 gen(73);
  auto cls = oracle::random_class(8, 10, gen);
  auto members = all_members(cls);
  LabeledCounts empty(8);
  CHECK(erm(cls, members, empty) == 0);  // vacuous risks, lowest index wins
  std::vector<int32_t> sub{4, 7, 2};
  CHECK(erm(cls, sub, empty) == 2);
  std::vector<int32_t> none;
  CHECK_THROWS_WITH(erm(cls, none, empty), doctest::Contains("empty version space"));

  // a sample consistent with exactly one member selects it
  LabeledCounts consistent(8);
  for (int x = 0; x < 8; ++x) consistent.add(x, cls.hypothesis(5)(x));
  bool unique = true;
  for (int i = 0; i < cls.size() && unique; ++i)
    if (i != 5 && error_count(cls.hypothesis(i).predictions.data(), consistent) == 0) unique = false;
  if (unique) CHECK(erm(cls, members, consistent) == 5);

  std::uniform_int_distribution<int> point(0, 7);
  for (int rep = 0; rep < 20; ++rep) {
    LabeledCounts sample(8);
    for (int i = 0; i < 15; ++i) sample.add(point(gen), static_cast<int>(gen() & 1));
    int32_t got = erm(cls, members, sample);
    int32_t want = 0;
    int64_t want_err = error_count(cls.hypothesis(0).predictions.data(), sample);
    for (int i = 1; i < cls.size(); ++i) {
      int64_t e = error_count(cls.hypothesis(i).predictions.data(), sample);
      if (e < want_err) {
        want_err = e;
        want = i;
      }
    }
    CHECK(got == want);
  }
}

TEST_CASE("schedule: scan agreement, monotonicity, delta budget") {
  Schedule s = compute_schedule(0.05, 0.05, 0.25, 1);
  CHECK(s.J == schedule_oracle(0.05, 0.05, 0.25, 1));
  CHECK(compute_schedule(0.1, 0.1, 0.5, 2).J == schedule_oracle(0.1, 0.1, 0.5, 2));

  // J = 1 once epsilon dwarfs the k = 1 radius (epsilon is not capped at 1)
  CHECK(compute_schedule(1.0e5, 0.5, 0.5, 1).J == 1);

  // non-increasing in epsilon and in p
  int prev = 1 << 30;
  for (double eps : {0.02, 0.05, 0.1, 0.2, 0.4}) {
    int J = compute_schedule(eps, 0.05, 0.25, 1).J;
    CHECK(J <= prev);
    prev = J;
  }
  prev = 1 << 30;
  for (double p : {0.05, 0.1, 0.25, 0.5}) {
    int J = compute_schedule(0.1, 0.05, p, 1).J;
    CHECK(J <= prev);
    prev = J;
  }

  // sum of per-iteration confidences stays within two thirds of delta
  for (double delta : {0.05, 0.3, 1.0}) {
    Schedule sc = compute_schedule(0.1, delta, 0.25, 2);
    double sum = 0.0;
    for (int j = 1; j <= sc.J; ++j) sum += sc.delta_j(j);
    CHECK(sum <= 2.0 * delta / 3.0 + 1e-12);
  }

  CHECK_THROWS(compute_schedule(0.1, 0.05, 0.0, 1));
  CHECK_THROWS(compute_schedule(0.0, 0.05, 0.25, 1));
}

TEST_CASE("midpoint algorithm: singleton class and vacuous version space") {
  auto space = make_grid_space(4);
  HypothesisClass singleton(space, {{0, 1, 1, 0}}, 1);
  std::vector<std::pair<int32_t, int>> sample{{0, 1}, {2, 0}, {3, 1}};
  auto res = midpoint_algorithm(singleton, sample, 0.2, 0.1);
  CHECK_FALSE(res.classifier.abstains_somewhere());
  CHECK(res.classifier.predictions == singleton.hypothesis(0).predictions);
  CHECK(res.diameter == 0.0);

  // with one labeled point the radius is huge and nothing is excluded
  std::mt19937_64 gen(79);
  auto cls = oracle::random_class(6, 9, gen);
  std::vector<std::pair<int32_t, int>> tiny{{3, 1}};
  auto wide = midpoint_algorithm(cls, tiny, 0.25, 0.1);
  CHECK(wide.version_space.member_indices.size() == static_cast<size_t>(cls.size()));
  CHECK(2.0 * wide.version_space.defining_radius.value * wide.version_space.defining_radius.value >=
        1.0);
}

TEST_CASE("midpoint algorithm matches the exhaustive candidate scan") {
  std::mt19937_64 gen(83);
  std::uniform_int_distribution<int> point(0, 7);
  for (int rep = 0; rep < 30; ++rep) {
    auto cls = oracle::random_class(8, 4 + static_cast<int>(gen() % 9), gen);
    int d = vc_dimension(cls);
    if (d < 1) d = 1;
    std::vector<std::pair<int32_t, int>> sample;
    int n = 5 + static_cast<int>(gen() % 60);
    for (int i = 0; i < n; ++i) sample.push_back({point(gen), static_cast<int>(gen() & 1)});
    auto got = midpoint_algorithm(cls, sample, 0.05 + 0.4 * (rep % 3) / 2.0, 0.1);
    auto want = midpoint_oracle(cls, sample, 0.05 + 0.4 * (rep % 3) / 2.0, 0.1, d);
    CHECK(got.classifier.predictions == want.predictions);
    // the erm belongs to its own version space
    bool erm_in = false;
    for (int32_t i : got.version_space.member_indices)
      if (i == got.version_space.erm_index) erm_in = true;
    CHECK(erm_in);
  }
}

TEST_CASE("active learner on a singleton class requests no labels") {
  auto space = make_grid_space(8);
  HypothesisClass singleton(space, {{0, 0, 0, 0, 1, 1, 1, 1}}, 1);
  auto d = shared(LabeledDistribution(space, std::vector<double>(8, 0.125),
                                      {0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9}));
  Schedule sched = compute_schedule(0.2, 0.1, 0.25, 1);
  Pool pool(d, 4);
  LabelOracle oracle_(d, 4);
  auto res = active_abstain(singleton, pool, oracle_, sched);
  CHECK(res.transcript.total_label_requests == 0);
  CHECK(oracle_.requests_made() == 0);
  CHECK(res.classifier.predictions == singleton.hypothesis(0).predictions);
  for (const auto& it : res.transcript.iterations) CHECK(it.labels_requested == 0);
}

TEST_CASE("active learner: determinism, ledger, nesting, debug identities") {
  auto dist = shared(make_massart_threshold(32, 0.4, 16));
  auto cls = make_threshold_class(32);
  Schedule sched = compute_schedule(0.25, 0.2, 0.25, 1);
  ActiveOptions debug;
  debug.debug_identities = true;

  Pool p1(dist, 42);
  LabelOracle o1(dist, 42);
  auto r1 = active_abstain(cls, p1, o1, sched);
  CHECK(o1.requests_made() == r1.transcript.total_label_requests);
  int64_t sum = 0;
  int64_t prev_v = cls.size();
  for (const auto& it : r1.transcript.iterations) {
    sum += it.labels_requested;
    CHECK(it.version_size <= prev_v);  // V_j nested
    prev_v = it.version_size;
    CHECK(it.version_size >= 1);
  }
  CHECK(sum == r1.transcript.total_label_requests);

  // identical seed reproduces the transcript, a different seed does not
  Pool p2(dist, 42);
  LabelOracle o2(dist, 42);
  auto r2 = active_abstain(cls, p2, o2, sched);
  CHECK(r1.classifier.predictions == r2.classifier.predictions);
  REQUIRE(r1.transcript.iterations.size() == r2.transcript.iterations.size());
  for (size_t i = 0; i < r1.transcript.iterations.size(); ++i) {
    CHECK(r1.transcript.iterations[i].labels_requested ==
          r2.transcript.iterations[i].labels_requested);
    CHECK(r1.transcript.iterations[i].diameter == r2.transcript.iterations[i].diameter);
  }

  // the debug shadow labels do not perturb the run and the identity holds
  Pool p3(dist, 42);
  LabelOracle o3(dist, 42);
  auto r3 = active_abstain(cls, p3, o3, sched, debug);
  CHECK(r3.transcript.debug_identity_violations == 0);
  CHECK(r3.classifier.predictions == r1.classifier.predictions);
  CHECK(r3.transcript.total_label_requests == r1.transcript.total_label_requests);

  Pool p4(dist, 43);
  LabelOracle o4(dist, 43);
  auto r4 = active_abstain(cls, p4, o4, sched);
  CHECK(r4.transcript.total_label_requests != r1.transcript.total_label_requests);
}

TEST_CASE("best in class stays in the version space at the advertised rate") {
  auto dist_v = make_massart_threshold(32, 0.4, 16);
  auto dist = shared(dist_v);
  auto cls = make_threshold_class(32);
  const double delta = 0.2;
  Schedule sched = compute_schedule(0.25, delta, 0.25, 1);
  auto [best_idx, best_risk] = exact_best_in_class(cls, dist_v);
  (void)best_risk;
  int hits = 0;
  const int seeds = 30;
  for (int s = 0; s < seeds; ++s) {
    Pool pool(dist, 1000 + static_cast<uint64_t>(s));
    LabelOracle oracle_(dist, 1000 + static_cast<uint64_t>(s));
    auto res = active_abstain(cls, pool, oracle_, sched);
    // the version spaces are nested, so membership at the end covers every j
    for (int32_t i : res.final_version)
      if (i == best_idx) {
        ++hits;
        break;
      }
  }
  CHECK(static_cast<double>(hits) / seeds >= 1.0 - 2.0 * delta / 3.0);
}

TEST_CASE("finite diameter: collapsed version space needs no majority stage") {
  // second rule is strictly worse on a heavy point, so the version space
  // collapses and the returned classifier never abstained
  auto space = make_grid_space(4);
  std::vector<std::vector<uint8_t>> tables{{0, 0, 1, 1}, {1, 1, 1, 1}};
  HypothesisClass cls(space, std::move(tables));
  auto d = shared(LabeledDistribution(space, {0.3, 0.3, 0.2, 0.2}, {0.0, 0.0, 1.0, 1.0}));
  Pool pool(d, 9);
  LabelOracle oracle_(d, 9);
  auto res = finite_diameter(cls, pool, oracle_, 1.0, 0.1, 0.1);
  CHECK(res.transcript.extra_label_requests == 0);
  CHECK(res.transcript.abstention_points.empty());
  CHECK(res.classifier.predictions == cls.hypothesis(0).predictions);
  CHECK(oracle_.requests_made() == res.transcript.total_label_requests);
}

TEST_CASE("finite diameter: tied pair abstains, majority stage obeys the per-point cap") {
  auto inst = make_misspecified_pair(5, 5);
  auto d = shared(inst.dist);
  const double h = 1.0, eps = 0.2, delta = 0.1;
  Pool pool(d, 21);
  LabelOracle oracle_(d, 21);
  auto res = finite_diameter(inst.cls, pool, oracle_, h, eps, delta);
  const int diam = class_diameter(inst.cls);
  CHECK(diam == 5);
  CHECK(static_cast<int>(res.transcript.abstention_points.size()) <= diam);
  REQUIRE(!res.transcript.abstention_points.empty());
  int64_t cap = static_cast<int64_t>(std::ceil(2.0 * clamped_log(6.0 * diam / delta) / (h * h)));
  CHECK(res.majority_query_cap == cap);
  CHECK(res.transcript.extra_label_requests <=
        cap * static_cast<int64_t>(res.transcript.abstention_points.size()));
  // deterministic labels: the splice recovers the truth on the abstention set
  for (int32_t x : res.transcript.abstention_points)
    CHECK(res.classifier.predictions[static_cast<size_t>(x)] ==
          inst.truth.predictions[static_cast<size_t>(x)]);
  CHECK(oracle_.requests_made() == res.transcript.total_label_requests);
}

TEST_CASE("majority vote failure probability: exact binomial tail under the hoeffding bound") {
  // one abstention point with eta 0.9 and margin h = 0.8, D = 3, delta = 0.1
  const double h = 0.8, delta = 0.1, eta = 0.9;
  const int diam = 3;
  const int m = static_cast<int>(std::ceil(2.0 * clamped_log(6.0 * diam / delta) / (h * h)));
  CHECK(m == 17);
  // majority (ties to 1) misses the Bayes label 1 iff at most floor(m/2) ones
  long double tail = 0.0L;
  for (int k = 0; 2 * k < m; ++k) {
    long double c = 1.0L;
    for (int i = 0; i < k; ++i) c = c * (m - i) / (i + 1);
    tail += c * std::pow((long double)eta, k) * std::pow((long double)(1 - eta), m - k);
  }
  CHECK(static_cast<double>(tail) == doctest::Approx(1.14644e-5).epsilon(1e-4));
  CHECK(static_cast<double>(tail) <= std::exp(-2.0 * m * (h / 2.0) * (h / 2.0)));
}

TEST_CASE("passive baseline") {
  auto dist_v = make_massart_threshold(64, 1.0, 32);  // realizable thresholds
  auto cls = make_threshold_class(64);
  auto res0 = passive_erm_baseline(cls, dist_v, 0, 5);
  CHECK(res0.labels_used == 0);
  CHECK(res0.classifier.class_index == 0);  // tie-break hypothesis

  auto a = passive_erm_baseline(cls, dist_v, 500, 5);
  auto b = passive_erm_baseline(cls, dist_v, 500, 5);
  CHECK(a.classifier.predictions == b.classifier.predictions);

  auto [best_idx, best_risk] = exact_best_in_class(cls, dist_v);
  (void)best_idx;
  int ok = 0;
  for (uint64_t s = 0; s < 10; ++s) {
    auto r = passive_erm_baseline(cls, dist_v, 2000, s);
    if (binary_risk_exact(r.classifier, dist_v) - best_risk <= 0.05) ++ok;
  }
  CHECK(ok >= 9);  // classical rate leaves lots of slack at n = 2000
}
