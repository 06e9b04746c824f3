#include "abstain/risk.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace abstain {

double clamped_log(double x) { return std::max(std::log(x), 1.0); }

double lp_loss(int y, uint8_t v, double p) {
  if (!(p >= 0.0 && p <= 0.5)) throw std::invalid_argument("p must lie in [0, 1/2]");
  if (y != 0 && y != 1) throw std::invalid_argument("label must be 0 or 1");
  if (v == kAbstain) return 0.5 - p;
  return v != static_cast<uint8_t>(y) ? 1.0 : 0.0;
}

RiskReport chow_risk_exact(const AbstainingHypothesis& f, const LabeledDistribution& dist, double p) {
  if (f.points() != dist.points()) throw std::invalid_argument("mismatched instance space");
  if (!(p >= 0.0 && p <= 0.5)) throw std::invalid_argument("p must lie in [0, 1/2]");
  double err = 0.0, abst = 0.0;
  for (int x = 0; x < dist.points(); ++x) {
    uint8_t v = f(x);
    if (v == kAbstain)
      abst += dist.px(x);
    else
      err += dist.px(x) * (v == 1 ? 1.0 - dist.eta(x) : dist.eta(x));
  }
  RiskReport r;
  r.error_mass = err;
  r.abstain_mass = abst;
  r.chow_risk = err + (0.5 - p) * abst;
  r.binary_risk = err + 0.5 * abst;
  r.p = p;
  return r;
}

double binary_risk_exact(const Hypothesis& f, const LabeledDistribution& dist) {
  if (f.points() != dist.points()) throw std::invalid_argument("mismatched instance space");
  double err = 0.0;
  for (int x = 0; x < dist.points(); ++x)
    err += dist.px(x) * (f(x) == 1 ? 1.0 - dist.eta(x) : dist.eta(x));
  return err;
}

double chow_risk_empirical_counts(const AbstainingHypothesis& f, const LabeledCounts& sample, double p) {
  if (sample.total <= 0) throw std::invalid_argument("empty sample");
  if (!(p >= 0.0 && p <= 0.5)) throw std::invalid_argument("p must lie in [0, 1/2]");
  int64_t errors = 0, abstentions = 0;
  for (size_t x = 0; x < sample.pos.size(); ++x) {
    uint8_t v = f(static_cast<int>(x));
    if (v == kAbstain)
      abstentions += sample.pos[x] + sample.neg[x];
    else
      errors += v == 1 ? sample.neg[x] : sample.pos[x];
  }
  return (static_cast<double>(errors) + (0.5 - p) * static_cast<double>(abstentions)) /
         static_cast<double>(sample.total);
}

double chow_risk_empirical(const AbstainingHypothesis& f,
                           std::span<const std::pair<int32_t, int>> sample, double p) {
  if (sample.empty()) throw std::invalid_argument("empty sample");
  auto counts = LabeledCounts::from_pairs(f.points(), sample);
  return chow_risk_empirical_counts(f, counts, p);
}

int64_t error_count(const uint8_t* predictions, const LabeledCounts& sample) {
  int64_t errors = 0;
  for (size_t x = 0; x < sample.pos.size(); ++x)
    errors += predictions[x] == 1 ? sample.neg[x] : sample.pos[x];
  return errors;
}

double binary_risk_empirical_counts(const Hypothesis& f, const LabeledCounts& sample) {
  if (sample.total <= 0) throw std::invalid_argument("empty sample");
  return static_cast<double>(error_count(f.predictions.data(), sample)) /
         static_cast<double>(sample.total);
}

namespace {

double radius_sq(double n, double delta, int d, double d_coeff, double log_const) {
  return (4.0 / n) * (d_coeff * d * clamped_log(std::exp(1.0) * std::max(2.0 * n, double(d)) / d) +
                      clamped_log(log_const / delta));
}

void check_radius_args(double n, double delta, int d) {
  if (!(n >= 1.0)) throw std::invalid_argument("sample size must be at least 1");
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
  if (d < 1) throw std::invalid_argument("VC dimension must be at least 1");
}

}  // namespace

double alpha_sq(double n, double delta, int d) { return radius_sq(n, delta, d, 3.0, 56.0); }

DeviationRadius alpha_radius(int64_t n, double delta, int d) {
  check_radius_args(static_cast<double>(n), delta, d);
  return {std::sqrt(alpha_sq(static_cast<double>(n), delta, d)), static_cast<double>(n), delta, d};
}

DeviationRadius beta_radius(int64_t n, double delta, int d) {
  check_radius_args(static_cast<double>(n), delta, d);
  return {std::sqrt(radius_sq(static_cast<double>(n), delta, d, 2.0, 24.0)),
          static_cast<double>(n), delta, d};
}

DeviationRadius gamma_radius(int64_t n, double delta, int d) {
  check_radius_args(static_cast<double>(n), delta, d);
  return {std::sqrt(radius_sq(static_cast<double>(n), delta, d, 3.0, 32.0)),
          static_cast<double>(n), delta, d};
}

SigmaRadius sigma_radius(int64_t n, double delta, const HypothesisClass& cls) {
  if (n < 1) throw std::invalid_argument("sample size must be at least 1");
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
  double log_growth;
  bool exact = false;
  int64_t two_n = 2 * n;
  try {
    int k = two_n > cls.points() ? cls.points() : static_cast<int>(two_n);
    log_growth = clamped_log(static_cast<double>(growth_function(cls, k)));
    exact = true;
  } catch (const std::runtime_error&) {
    int d = vc_dimension(cls);
    int dd = std::max(d, 1);
    log_growth = dd * clamped_log(std::exp(1.0) * std::max(static_cast<double>(two_n), double(dd)) / dd);
  }
  double value = std::sqrt((4.0 / static_cast<double>(n)) * (log_growth + clamped_log(8.0 / delta)));
  return {{value, static_cast<double>(n), delta, cls.declared_vc().value_or(0)}, exact};
}

namespace {

// squared gap between a {0,1} table and a {0,1,*} mid-point table at one point
double midpoint_sq_gap(uint8_t f, uint8_t g) {
  if (g == kAbstain) return 0.25;
  return f == g ? 0.0 : 1.0;
}

struct TrialFlags {
  bool vc1 = true, vc2 = true, chow = true;
  double slack_vc1 = 0.0, slack_vc2 = 0.0, slack_chow = 0.0;
};

}  // namespace

UniformBoundReport verify_uniform_bounds(const HypothesisClass& cls, const LabeledDistribution& dist,
                                         int64_t n, double delta, int trials, double p,
                                         uint64_t seed, int threads) {
  if (trials < 1) throw std::invalid_argument("need at least one trial");
  if (cls.points() != dist.points()) throw std::invalid_argument("mismatched instance space");
  const int K = cls.size();
  const int m = cls.points();
  const int d = vc_dimension(cls);
  const DeviationRadius beta = beta_radius(n, delta, std::max(d, 1));
  const DeviationRadius gamma = gamma_radius(n, delta, std::max(d, 1));
  const double tol = 1e-12;

  // true quantities, shared across trials
  std::vector<double> true_risk(static_cast<size_t>(K));
  for (int i = 0; i < K; ++i) true_risk[static_cast<size_t>(i)] = binary_risk_exact(cls.hypothesis(i), dist);
  std::vector<std::pair<int, int>> mid_pairs;
  for (int a = 0; a < K; ++a)
    for (int b = a; b < K; ++b) mid_pairs.emplace_back(a, b);
  std::vector<AbstainingHypothesis> mids;
  mids.reserve(mid_pairs.size());
  std::vector<double> mid_true_chow(mid_pairs.size());
  for (size_t g = 0; g < mid_pairs.size(); ++g) {
    mids.push_back(midpoint(cls.hypothesis(mid_pairs[g].first), cls.hypothesis(mid_pairs[g].second)));
    mid_true_chow[g] = chow_risk_exact(mids[g], dist, p).chow_risk;
  }
  std::vector<double> true_l1(static_cast<size_t>(K) * K, 0.0);
  for (int a = 0; a < K; ++a)
    for (int b = a + 1; b < K; ++b) {
      double v = true_l1_distance(cls.hypothesis(a), cls.hypothesis(b), dist.px());
      true_l1[static_cast<size_t>(a) * K + b] = true_l1[static_cast<size_t>(b) * K + a] = v;
    }
  std::vector<double> true_sq_fg(static_cast<size_t>(K) * mid_pairs.size());
  for (int f = 0; f < K; ++f)
    for (size_t g = 0; g < mids.size(); ++g) {
      double v = 0.0;
      for (int x = 0; x < m; ++x)
        v += dist.px(x) * midpoint_sq_gap(cls.hypothesis(f)(x), mids[g](x));
      true_sq_fg[static_cast<size_t>(f) * mids.size() + g] = v;
    }

  auto dist_ptr = std::make_shared<const LabeledDistribution>(dist);
  std::vector<TrialFlags> flags(static_cast<size_t>(trials));

  auto run_trial = [&](int t) {
    uint64_t trial_seed = mix64(seed, static_cast<uint64_t>(t));
    Pool pool(dist_ptr, trial_seed);
    LabelOracle oracle(dist_ptr, trial_seed);
    LabeledCounts sample(m);
    for (int64_t i = 0; i < n; ++i) {
      int64_t posn = pool.draws_made();
      int32_t x = pool.draw();
      sample.add(x, oracle.query_at(x, static_cast<uint64_t>(posn)));
    }
    std::vector<int64_t> counts(static_cast<size_t>(m));
    for (int x = 0; x < m; ++x)
      counts[static_cast<size_t>(x)] = sample.pos[static_cast<size_t>(x)] + sample.neg[static_cast<size_t>(x)];

    std::vector<double> emp_risk(static_cast<size_t>(K));
    for (int i = 0; i < K; ++i)
      emp_risk[static_cast<size_t>(i)] = binary_risk_empirical_counts(cls.hypothesis(i), sample);

    TrialFlags fl;
    fl.slack_vc1 = fl.slack_vc2 = fl.slack_chow = 1e300;
    // Lemma families over {0,1} pairs
    for (int a = 0; a < K; ++a) {
      for (int b = a + 1; b < K; ++b) {
        int64_t wa = 0;
        const auto& pa = cls.hypothesis(a).predictions;
        const auto& pb = cls.hypothesis(b).predictions;
        for (int x = 0; x < m; ++x)
          if (pa[static_cast<size_t>(x)] != pb[static_cast<size_t>(x)]) wa += counts[static_cast<size_t>(x)];
        double emp_l1 = static_cast<double>(wa) / static_cast<double>(n);
        double t_l1 = true_l1[static_cast<size_t>(a) * K + b];
        double cap = std::sqrt(std::min(emp_l1, t_l1));
        double lhs1 = std::abs(true_risk[static_cast<size_t>(a)] - true_risk[static_cast<size_t>(b)] -
                               emp_risk[static_cast<size_t>(a)] + emp_risk[static_cast<size_t>(b)]);
        double rhs1 = 2.0 * beta.value * beta.value + 2.0 * beta.value * cap;
        double lhs2 = std::abs(t_l1 - emp_l1);
        double rhs2 = beta.value * beta.value + beta.value * cap;
        fl.slack_vc1 = std::min(fl.slack_vc1, rhs1 - lhs1);
        fl.slack_vc2 = std::min(fl.slack_vc2, rhs2 - lhs2);
        if (lhs1 > rhs1 + tol) fl.vc1 = false;
        if (lhs2 > rhs2 + tol) fl.vc2 = false;
      }
    }
    // Chow family over f in F, g in (F+F)/2
    std::vector<double> emp_chow_mid(mids.size());
    for (size_t g = 0; g < mids.size(); ++g)
      emp_chow_mid[g] = chow_risk_empirical_counts(mids[g], sample, p);
    for (int f = 0; f < K; ++f) {
      const auto& pf = cls.hypothesis(f).predictions;
      double emp_chow_f = emp_risk[static_cast<size_t>(f)];  // no abstention: Chow = binary
      for (size_t g = 0; g < mids.size(); ++g) {
        double emp_sq = 0.0;
        for (int x = 0; x < m; ++x)
          emp_sq += static_cast<double>(counts[static_cast<size_t>(x)]) *
                    midpoint_sq_gap(pf[static_cast<size_t>(x)], mids[g](x));
        emp_sq /= static_cast<double>(n);
        double cap = std::sqrt(std::min(emp_sq, true_sq_fg[static_cast<size_t>(f) * mids.size() + g]));
        double lhs = std::abs(true_risk[static_cast<size_t>(f)] - mid_true_chow[g] - emp_chow_f +
                              emp_chow_mid[g]);
        double rhs = 4.0 * gamma.value * gamma.value + 8.0 * gamma.value * cap;
        fl.slack_chow = std::min(fl.slack_chow, rhs - lhs);
        if (lhs > rhs + tol) fl.chow = false;
      }
    }
    flags[static_cast<size_t>(t)] = fl;
  };

  int nthreads = std::max(1, std::min(threads, trials));
  if (nthreads == 1) {
    for (int t = 0; t < trials; ++t) run_trial(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < nthreads; ++w)
      workers.emplace_back([&] {
        for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) run_trial(t);
      });
    for (auto& w : workers) w.join();
  }

  UniformBoundReport report;
  report.trials = trials;
  std::ostringstream csv;
  csv << "trial,pass_risk_gap,pass_l1,pass_chow,slack_risk_gap,slack_l1,slack_chow\n";
  int c1 = 0, c2 = 0, c3 = 0;
  for (int t = 0; t < trials; ++t) {
    const auto& fl = flags[static_cast<size_t>(t)];
    c1 += fl.vc1;
    c2 += fl.vc2;
    c3 += fl.chow;
    char row[160];
    std::snprintf(row, sizeof(row), "%d,%d,%d,%d,%.6g,%.6g,%.6g\n", t, int(fl.vc1), int(fl.vc2),
                  int(fl.chow), fl.slack_vc1, fl.slack_vc2, fl.slack_chow);
    csv << row;
  }
  report.frac_risk_gap = static_cast<double>(c1) / trials;
  report.frac_l1 = static_cast<double>(c2) / trials;
  report.frac_chow = static_cast<double>(c3) / trials;
  report.trial_csv = csv.str();
  return report;
}

}  // namespace abstain
