#include "abstain/diagnostics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "abstain/learners.hpp"

namespace abstain {

double disagreement_coefficient(const HypothesisClass& cls, std::span<const double> px, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be non-negative");
  if (static_cast<int>(px.size()) != cls.points()) throw std::invalid_argument("mismatched instance space");
  if (eps >= 1.0) return 1.0;  // the ratio is at most 1/eps0 <= 1 past radius 1
  const int K = cls.size();
  const int m = cls.points();
  double best = 1.0;
  std::vector<std::pair<double, int32_t>> by_dist(static_cast<size_t>(K));
  std::vector<uint8_t> covered(static_cast<size_t>(m));
  for (int c = 0; c < K; ++c) {
    const auto& pc = cls.hypothesis(c).predictions;
    for (int f = 0; f < K; ++f) {
      const auto& pf = cls.hypothesis(f).predictions;
      double dist = 0.0;
      for (int x = 0; x < m; ++x)
        if (pf[static_cast<size_t>(x)] != pc[static_cast<size_t>(x)]) dist += px[static_cast<size_t>(x)];
      by_dist[static_cast<size_t>(f)] = {dist, f};
    }
    std::sort(by_dist.begin(), by_dist.end());
    std::fill(covered.begin(), covered.end(), 0);
    double mass = 0.0;
    size_t i = 0;
    auto absorb = [&](int32_t f) {
      const auto& pf = cls.hypothesis(f).predictions;
      for (int x = 0; x < m; ++x)
        if (pf[static_cast<size_t>(x)] != pc[static_cast<size_t>(x)] && !covered[static_cast<size_t>(x)]) {
          covered[static_cast<size_t>(x)] = 1;
          mass += px[static_cast<size_t>(x)];
        }
    };
    // candidate radii: eps itself, then every realized distance above it; the
    // ball is constant between realized distances and the ratio decays in eps0
    while (i < by_dist.size() && by_dist[i].first <= eps) absorb(by_dist[i++].second);
    if (eps > 0.0) best = std::max(best, mass / eps);
    while (i < by_dist.size()) {
      double r = by_dist[i].first;
      while (i < by_dist.size() && by_dist[i].first == r) absorb(by_dist[i++].second);
      best = std::max(best, mass / r);
    }
  }
  return best;
}

namespace {

struct StarSearch {
  std::vector<uint64_t> deltas;  // disagreement masks against the center
  int m = 0;
  int best = 0;
  int64_t work = 0;  // mask operations spent across feasibility checks
  static constexpr int64_t kBudget = 2'000'000'000;
  bool exhausted = false;

  // S is feasible when every chosen point is the sole intersection of some
  // hypothesis's disagreement set with S
  bool feasible(uint64_t s) const {
    uint64_t covered = 0;
    for (uint64_t d : deltas) {
      uint64_t t = d & s;
      if (t != 0 && (t & (t - 1)) == 0) covered |= t;
      if (covered == s) return true;
    }
    return covered == s;
  }

  void dfs(int next, uint64_t s, int size) {
    if (size > best) best = size;
    if (size + (m - next) <= best) return;
    for (int x = next; x < m; ++x) {
      work += static_cast<int64_t>(deltas.size());
      if (work > kBudget) {
        exhausted = true;
        return;
      }
      uint64_t s2 = s | (uint64_t(1) << x);
      if (feasible(s2)) {
        dfs(x + 1, s2, size + 1);
        if (exhausted) return;
      }
    }
  }
};

}  // namespace

std::optional<int> star_number(const HypothesisClass& cls) {
  const int K = cls.size();
  const int m = cls.points();
  if (K > 64 || m > 64) return std::nullopt;
  if (K <= 1) return 0;  // no f differing from the center exists
  int best = 0;
  for (int c = 0; c < K && best < std::min(m, K - 1); ++c) {
    StarSearch search;
    search.m = m;
    search.best = best;
    const auto& pc = cls.hypothesis(c).predictions;
    for (int f = 0; f < K; ++f) {
      if (f == c) continue;
      uint64_t mask = 0;
      for (int x = 0; x < m; ++x)
        if (cls.hypothesis(f).predictions[static_cast<size_t>(x)] != pc[static_cast<size_t>(x)])
          mask |= uint64_t(1) << x;
      search.deltas.push_back(mask);
    }
    search.dfs(0, 0, 0);
    if (search.exhausted) return std::nullopt;
    best = std::max(best, search.best);
  }
  return best;
}

int class_diameter(const HypothesisClass& cls) {
  const int K = cls.size();
  const int words = cls.words_per_hypothesis();
  const auto& packed = cls.packed();
  int best = 0;
  for (int a = 0; a < K; ++a) {
    for (int b = a + 1; b < K; ++b) {
      int diff = 0;
      for (int w = 0; w < words; ++w)
        diff += std::popcount(packed[static_cast<size_t>(a) * words + w] ^
                              packed[static_cast<size_t>(b) * words + w]);
      if (diff > best) best = diff;
    }
  }
  return best;
}

std::pair<int32_t, double> exact_best_in_class(const HypothesisClass& cls,
                                               const LabeledDistribution& dist) {
  int32_t best = 0;
  double best_risk = binary_risk_exact(cls.hypothesis(0), dist);
  for (int i = 1; i < cls.size(); ++i) {
    double r = binary_risk_exact(cls.hypothesis(i), dist);
    if (r < best_risk) {
      best_risk = r;
      best = i;
    }
  }
  return {best, best_risk};
}

std::pair<AbstainingHypothesis, double> exhaustive_chow_minimizer(const LabeledDistribution& dist,
                                                                  double p) {
  const int m = dist.points();
  if (m > 8) throw std::invalid_argument("exhaustive Chow scan capped at 8 support points");
  if (!(p >= 0.0 && p <= 0.5)) throw std::invalid_argument("p must lie in [0, 1/2]");
  // per-point cost of predicting 0, 1 or abstaining
  std::vector<double> cost0(static_cast<size_t>(m)), cost1(static_cast<size_t>(m)),
      costA(static_cast<size_t>(m));
  for (int x = 0; x < m; ++x) {
    cost0[static_cast<size_t>(x)] = dist.px(x) * dist.eta(x);
    cost1[static_cast<size_t>(x)] = dist.px(x) * (1.0 - dist.eta(x));
    costA[static_cast<size_t>(x)] = dist.px(x) * (0.5 - p);
  }
  int64_t total = 1;
  for (int x = 0; x < m; ++x) total *= 3;
  AbstainingHypothesis best;
  best.predictions.assign(static_cast<size_t>(m), 0);
  double best_risk = 1e300;
  std::vector<uint8_t> digits(static_cast<size_t>(m), 0);
  for (int64_t code = 0; code < total; ++code) {
    double risk = 0.0;
    for (int x = 0; x < m; ++x) {
      uint8_t v = digits[static_cast<size_t>(x)];
      risk += v == 0 ? cost0[static_cast<size_t>(x)]
                     : (v == 1 ? cost1[static_cast<size_t>(x)] : costA[static_cast<size_t>(x)]);
    }
    if (risk < best_risk) {
      best_risk = risk;
      for (int x = 0; x < m; ++x)
        best.predictions[static_cast<size_t>(x)] =
            digits[static_cast<size_t>(x)] == 2 ? kAbstain : digits[static_cast<size_t>(x)];
    }
    for (int x = 0; x < m; ++x) {  // increment base-3 counter
      if (++digits[static_cast<size_t>(x)] < 3) break;
      digits[static_cast<size_t>(x)] = 0;
    }
  }
  return {best, best_risk};
}

ComplexityProfile make_complexity_profile(const HypothesisClass& cls, const LabeledDistribution& dist,
                                          std::span<const double> theta_radii) {
  ComplexityProfile prof;
  prof.vc = vc_dimension(cls);
  prof.star = star_number(cls);
  prof.diameter = class_diameter(cls);
  std::vector<double> radii(theta_radii.begin(), theta_radii.end());
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
  for (double r : radii)
    prof.theta_curve.emplace_back(r, disagreement_coefficient(cls, dist.px(), r));
  return prof;
}

std::vector<double> ceiling_radii(const Schedule& schedule) {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(schedule.J));
  for (int j = 1; j <= schedule.J; ++j) {
    double n_prev = std::ldexp(1.0, j - 2);  // n_{j-1} = 2^{j-2}, one half at j = 1
    double d_prev = schedule.delta / (double(j) * double(j));
    out.push_back(2500.0 * alpha_sq(n_prev, d_prev, schedule.d) / (schedule.p * schedule.p));
  }
  return out;
}

CeilingReport theorem31_label_ceiling(const RunTranscript& transcript,
                                      const ComplexityProfile& profile, const Schedule& schedule) {
  CeilingReport rep;
  auto theta_at = [&](double r) -> std::optional<double> {
    for (const auto& [radius, value] : profile.theta_curve)
      if (std::abs(radius - r) <= 1e-9 * std::max(1.0, std::abs(r))) return value;
    return std::nullopt;
  };
  const auto radii = ceiling_radii(schedule);
  const int T = std::min(transcript.terminal_iteration, schedule.J);
  if (T < 1) return rep;  // nothing ran, not checked
  const double log56 = clamped_log(56.0 / schedule.delta);
  double bound = 0.0;
  for (int j = 1; j <= T; ++j) {
    auto theta = theta_at(radii[static_cast<size_t>(j - 1)]);
    if (!theta) return rep;  // theta not computed for this radius
    bound += (4.0 * 2500.0 * *theta / (schedule.p * schedule.p)) *
                 (9.0 * schedule.d + (3.0 * schedule.d + 3.0) * j + 2.0 * log56) +
             6.0 * clamped_log(1.0 + j) + 3.0 * log56;
  }
  rep.bound = bound;
  rep.checked = true;
  int64_t ledger = transcript.total_label_requests - transcript.extra_label_requests;
  rep.within = static_cast<double>(ledger) <= bound;
  return rep;
}

}  // namespace abstain
