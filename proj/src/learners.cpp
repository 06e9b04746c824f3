#include "abstain/learners.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "abstain/diagnostics.hpp"

namespace abstain {

Schedule compute_schedule(double epsilon, double delta, double p, int d) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
  if (!(p > 0.0 && p <= 0.5)) throw std::invalid_argument("p must lie in (0, 1/2]");
  if (d < 1) throw std::invalid_argument("VC dimension must be at least 1");
  Schedule s{0, epsilon, delta, p, d};
  for (int k = 1; k <= 62; ++k) {
    double n = std::ldexp(1.0, k - 1);
    double dk = delta / (double(k + 1) * double(k + 1));
    if (148.0 * alpha_sq(n, dk, d) / p <= epsilon) {
      s.J = k;
      return s;
    }
  }
  throw std::runtime_error("schedule scan exceeded 2^61 samples");  // alpha^2 -> 0, unreachable
}

int32_t erm(const HypothesisClass& cls, std::span<const int32_t> members, const LabeledCounts& sample) {
  if (members.empty()) throw std::invalid_argument("empty version space");
  if (sample.total == 0)  // all risks vacuously zero, lowest index wins
    return *std::min_element(members.begin(), members.end());
  int32_t best = members[0];
  int64_t best_err = error_count(cls.hypothesis(members[0]).predictions.data(), sample);
  for (size_t i = 1; i < members.size(); ++i) {
    int64_t e = error_count(cls.hypothesis(members[i]).predictions.data(), sample);
    if (e < best_err || (e == best_err && members[i] < best)) {
      best_err = e;
      best = members[i];
    }
  }
  return best;
}

namespace {

// P_Q |f - g| numerator: count of sample points (with multiplicity) where f != g
int64_t disagreement_count(const uint8_t* f, const uint8_t* g, std::span<const int64_t> counts) {
  int64_t acc = 0;
  for (size_t x = 0; x < counts.size(); ++x)
    if (f[x] != g[x]) acc += counts[x];
  return acc;
}

// empirical Chow risk numerator of midpoint(f, anchor) on a counted sample:
// errors where the two agree plus (1/2 - p) times the mass where they differ
double midpoint_chow_numerator(const uint8_t* f, const uint8_t* anchor, const LabeledCounts& s,
                               double p) {
  int64_t errors = 0, abstained = 0;
  for (size_t x = 0; x < s.pos.size(); ++x) {
    if (f[x] == anchor[x])
      errors += f[x] == 1 ? s.neg[x] : s.pos[x];
    else
      abstained += s.pos[x] + s.neg[x];
  }
  return static_cast<double>(errors) + (0.5 - p) * static_cast<double>(abstained);
}

struct MidpointCore {
  std::vector<int32_t> version;
  int32_t erm_index = -1;
  int32_t partner = -1;
  double diameter = 0.0;
};

// steps 2-4 of the mid-point construction: the version space around the ERM,
// its empirical diameter and the empirical-Chow minimizing mid-point partner
MidpointCore midpoint_core(const HypothesisClass& cls, std::span<const int32_t> members,
                           const LabeledCounts& sample, std::span<const int64_t> point_counts,
                           int64_t denominator, double p, const DeviationRadius& alpha) {
  MidpointCore out;
  out.erm_index = erm(cls, members, sample);
  const uint8_t* anchor = cls.hypothesis(out.erm_index).predictions.data();
  const int64_t erm_errors = sample.total > 0 ? error_count(anchor, sample) : 0;
  const double a = alpha.value;
  for (int32_t i : members) {
    const uint8_t* f = cls.hypothesis(i).predictions.data();
    // (|S|/n)(R_S(f) - R_S(erm)) = (err_S(f) - err_S(erm)) / n
    double lhs = sample.total > 0
                     ? static_cast<double>(error_count(f, sample) - erm_errors) /
                           static_cast<double>(denominator)
                     : 0.0;
    double dist = static_cast<double>(disagreement_count(f, anchor, point_counts)) /
                  static_cast<double>(denominator);
    if (lhs <= 2.0 * a * a + 2.0 * a * std::sqrt(dist)) out.version.push_back(i);
  }
  out.diameter = empirical_l2_diameter_counts(cls, out.version, point_counts, denominator);
  // empirical-Chow minimizer over the mid-point candidates, ties to lowest index
  double best = 0.0;
  for (size_t k = 0; k < out.version.size(); ++k) {
    const uint8_t* f = cls.hypothesis(out.version[k]).predictions.data();
    double num = sample.total > 0 ? midpoint_chow_numerator(f, anchor, sample, p) : 0.0;
    if (k == 0 || num < best - 1e-15) {
      best = num;
      out.partner = out.version[k];
    }
  }
  return out;
}

}  // namespace

MidpointResult midpoint_algorithm_subset(const HypothesisClass& cls, std::span<const int32_t> members,
                                         const LabeledCounts& sample, double p, double delta, int d) {
  if (members.empty()) throw std::invalid_argument("empty version space");
  if (sample.total <= 0) throw std::invalid_argument("empty sample");
  if (!(p > 0.0 && p <= 0.5)) throw std::invalid_argument("p must lie in (0, 1/2]");
  DeviationRadius a = alpha_radius(sample.total, delta, d);
  std::vector<int64_t> counts(sample.pos.size());
  for (size_t x = 0; x < counts.size(); ++x) counts[x] = sample.pos[x] + sample.neg[x];
  MidpointCore core = midpoint_core(cls, members, sample, counts, sample.total, p, a);
  MidpointResult res;
  res.classifier = midpoint(cls.hypothesis(core.partner), cls.hypothesis(core.erm_index));
  res.version_space = VersionSpace{std::move(core.version), a, core.erm_index};
  res.diameter = core.diameter;
  res.midpoint_partner = core.partner;
  return res;
}

MidpointResult midpoint_algorithm(const HypothesisClass& cls, const LabeledCounts& sample, double p,
                                  double delta) {
  std::vector<int32_t> all(static_cast<size_t>(cls.size()));
  for (int i = 0; i < cls.size(); ++i) all[static_cast<size_t>(i)] = i;
  return midpoint_algorithm_subset(cls, all, sample, p, delta, vc_dimension(cls));
}

MidpointResult midpoint_algorithm(const HypothesisClass& cls,
                                  std::span<const std::pair<int32_t, int>> sample, double p,
                                  double delta) {
  auto counts = LabeledCounts::from_pairs(cls.points(), sample);
  return midpoint_algorithm(cls, counts, p, delta);
}

namespace {

// scaling identity: for all f, g in the previous version space the error-count
// difference on S_j equals the one on Q_j because f = g outside dis(V_{j-1})
int64_t count_identity_violations(const HypothesisClass& cls, std::span<const int32_t> members,
                                  const LabeledCounts& s, const LabeledCounts& q) {
  int64_t violations = 0;
  std::vector<int64_t> err_s(members.size()), err_q(members.size());
  for (size_t i = 0; i < members.size(); ++i) {
    const uint8_t* f = cls.hypothesis(members[i]).predictions.data();
    err_s[i] = error_count(f, s);
    err_q[i] = error_count(f, q);
  }
  for (size_t i = 0; i < members.size(); ++i)
    for (size_t j = i + 1; j < members.size(); ++j)
      if (err_s[i] - err_s[j] != err_q[i] - err_q[j]) ++violations;
  return violations;
}

}  // namespace

ActiveResult active_abstain(const HypothesisClass& cls, Pool& pool, LabelOracle& oracle,
                            const Schedule& schedule, const ActiveOptions& options) {
  if (schedule.J < 1) throw std::invalid_argument("invalid schedule");
  const int m = cls.points();
  std::vector<int32_t> members(static_cast<size_t>(cls.size()));
  for (int i = 0; i < cls.size(); ++i) members[static_cast<size_t>(i)] = i;

  ActiveResult result;
  RunTranscript& tr = result.transcript;
  for (int j = 1; j <= schedule.J; ++j) {
    const int64_t nj = schedule.n_j(j);
    const double dj = schedule.delta_j(j);
    const DeviationRadius a = alpha_radius(nj, dj, schedule.d);
    const double threshold = 49.0 * a.value / schedule.p;

    auto dis = disagreement_mask(cls, members);
    std::vector<int64_t> qcounts(static_cast<size_t>(m), 0);
    LabeledCounts s(m);
    LabeledCounts qlabeled(m);  // debug only
    int64_t labels = 0;
    for (int64_t i = 0; i < nj; ++i) {
      uint64_t posn = static_cast<uint64_t>(pool.draws_made());
      int32_t x = pool.draw();
      ++qcounts[static_cast<size_t>(x)];
      if (dis[static_cast<size_t>(x)]) {
        int y = oracle.query_at(x, posn);
        s.add(x, y);
        ++labels;
        if (options.debug_identities) qlabeled.add(x, y);
      } else if (options.debug_identities) {
        qlabeled.add(x, oracle.peek_at(x, posn));
      }
    }
    tr.total_label_requests += labels;

    if (options.debug_identities)
      tr.debug_identity_violations += count_identity_violations(cls, members, s, qlabeled);

    MidpointCore core = midpoint_core(cls, members, s, qcounts, nj, schedule.p, a);
    if (core.version.empty()) throw std::logic_error("version space emptied");  // erm always qualifies

    bool fired = core.diameter > threshold;  // strict, per the early-return rule
    tr.iterations.push_back(IterationRecord{j, nj, labels, static_cast<int64_t>(core.version.size()),
                                            core.diameter, a.value, threshold, fired});
    if (fired || j == schedule.J) {
      tr.terminal_iteration = j;
      tr.early_trigger = fired && j < schedule.J;
      result.classifier = midpoint(cls.hypothesis(core.partner), cls.hypothesis(core.erm_index));
      result.final_version = std::move(core.version);
      return result;
    }
    members = std::move(core.version);
  }
  throw std::logic_error("unreachable: loop returns at j = J");
}

FiniteDiameterResult finite_diameter(const HypothesisClass& cls, Pool& pool, LabelOracle& oracle,
                                     double h, double epsilon, double delta,
                                     const ActiveOptions& options) {
  if (!(h > 0.0 && h <= 1.0)) throw std::invalid_argument("margin h must lie in (0, 1]");
  const double p = h / 2.0;
  Schedule schedule = compute_schedule(epsilon / 2.0, delta / 3.0, p, vc_dimension(cls));
  ActiveResult stage1 = active_abstain(cls, pool, oracle, schedule, options);

  FiniteDiameterResult out;
  out.stage1 = stage1.classifier;
  out.transcript = std::move(stage1.transcript);
  out.transcript.abstention_points = stage1.classifier.abstention_points();

  if (out.transcript.abstention_points.empty()) {
    out.classifier = stage1.classifier.as_binary();
    return out;
  }

  const int diam = class_diameter(cls);
  const double log_term = clamped_log(6.0 * diam / delta);
  const int64_t per_point_cap = static_cast<int64_t>(std::ceil(2.0 * log_term / (h * h)));
  const int64_t draws =
      static_cast<int64_t>(std::ceil(28.0 * diam * log_term / (3.0 * h * h * epsilon)));
  out.majority_query_cap = per_point_cap;
  out.transcript.majority_stage_draws = draws;

  const int m = cls.points();
  std::vector<int64_t> votes(static_cast<size_t>(m), 0), asked(static_cast<size_t>(m), 0);
  std::vector<uint8_t> wanted(static_cast<size_t>(m), 0);
  for (int32_t x : out.transcript.abstention_points) wanted[static_cast<size_t>(x)] = 1;
  for (int64_t i = 0; i < draws; ++i) {
    uint64_t posn = static_cast<uint64_t>(pool.draws_made());
    int32_t x = pool.draw();
    if (wanted[static_cast<size_t>(x)] && asked[static_cast<size_t>(x)] < per_point_cap) {
      votes[static_cast<size_t>(x)] += oracle.query_at(x, posn);
      ++asked[static_cast<size_t>(x)];
      ++out.transcript.extra_label_requests;
    }
  }
  out.transcript.total_label_requests += out.transcript.extra_label_requests;

  Hypothesis spliced;
  spliced.predictions = out.stage1.predictions;
  for (int32_t x : out.transcript.abstention_points) {
    // majority vote, ties (including zero requests) to label 1
    spliced.predictions[static_cast<size_t>(x)] =
        2 * votes[static_cast<size_t>(x)] >= asked[static_cast<size_t>(x)] ? 1 : 0;
  }
  out.classifier = std::move(spliced);
  return out;
}

PassiveResult passive_erm_baseline(const HypothesisClass& cls, const LabeledDistribution& dist,
                                   int64_t n, uint64_t seed) {
  if (n < 0) throw std::invalid_argument("sample size must be non-negative");
  auto dist_ptr = std::make_shared<const LabeledDistribution>(dist);
  Pool pool(dist_ptr, seed);
  LabelOracle oracle(dist_ptr, seed);
  LabeledCounts sample(cls.points());
  for (int64_t i = 0; i < n; ++i) {
    uint64_t posn = static_cast<uint64_t>(pool.draws_made());
    int32_t x = pool.draw();
    sample.add(x, oracle.query_at(x, posn));
  }
  std::vector<int32_t> all(static_cast<size_t>(cls.size()));
  for (int i = 0; i < cls.size(); ++i) all[static_cast<size_t>(i)] = i;
  return PassiveResult{cls.hypothesis(erm(cls, all, sample)), n};
}

}  // namespace abstain
