#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "abstain/hypothesis.hpp"
#include "abstain/rng.hpp"

namespace abstain {

// Joint distribution of (X, Y) on a finite support: point weights px (sum 1)
// and conditionals eta(x) = Pr(Y = 1 | X = x).
class LabeledDistribution {
 public:
  LabeledDistribution(std::shared_ptr<const InstanceSpace> space, std::vector<double> px,
                      std::vector<double> eta);

  const InstanceSpace& space() const { return *space_; }
  std::shared_ptr<const InstanceSpace> space_ptr() const { return space_; }
  int points() const { return space_->size(); }
  const std::vector<double>& px() const { return px_; }
  const std::vector<double>& eta() const { return eta_; }
  double px(int x) const { return px_[static_cast<size_t>(x)]; }
  double eta(int x) const { return eta_[static_cast<size_t>(x)]; }

  // largest h with |2 eta(X) - 1| >= h almost surely; on finite support the
  // minimum margin over points of positive mass
  double massart_margin() const;

  const std::vector<double>& cumulative() const { return cum_; }

 private:
  std::shared_ptr<const InstanceSpace> space_;
  std::vector<double> px_;
  std::vector<double> eta_;
  std::vector<double> cum_;
};

// i.i.d. draws from px; the draw sequence is a pure function of the seed
class Pool {
 public:
  Pool(std::shared_ptr<const LabeledDistribution> dist, uint64_t seed);

  int32_t draw();
  std::vector<int32_t> sample(int64_t count);
  int64_t draws_made() const { return draws_made_; }
  const LabeledDistribution& distribution() const { return *dist_; }

 private:
  std::shared_ptr<const LabeledDistribution> dist_;
  CounterRng rng_;
  int64_t draws_made_ = 0;
};

// Label requests: each query to x is an independent Bernoulli(eta(x)) draw and
// increments the request counter by exactly one.  Two streams are exposed: the
// plain query uses the oracle's own counter; query_at keys the draw by a caller
// supplied index (the algorithms key by pool position, which keeps transcripts
// identical whether or not shadow labels are drawn for diagnostics).
class LabelOracle {
 public:
  LabelOracle(std::shared_ptr<const LabeledDistribution> dist, uint64_t seed);

  int query(int32_t x);
  int query_at(int32_t x, uint64_t draw_index);
  int peek_at(int32_t x, uint64_t draw_index) const;  // same value as query_at, no accounting
  int64_t requests_made() const { return requests_made_; }
  const LabeledDistribution& distribution() const { return *dist_; }

 private:
  int draw_label(uint64_t key, uint64_t counter, int32_t x) const;
  std::shared_ptr<const LabeledDistribution> dist_;
  uint64_t own_key_;
  uint64_t keyed_key_;
  int64_t own_counter_ = 0;
  int64_t requests_made_ = 0;
};

// labeled empirical sample as per-point counts, the canonical internal form
struct LabeledCounts {
  std::vector<int64_t> pos;  // count of (x, 1)
  std::vector<int64_t> neg;  // count of (x, 0)
  int64_t total = 0;

  explicit LabeledCounts(int m) : pos(static_cast<size_t>(m), 0), neg(static_cast<size_t>(m), 0) {}
  void add(int32_t x, int y) {
    (y ? pos : neg)[static_cast<size_t>(x)] += 1;
    ++total;
  }
  static LabeledCounts from_pairs(int m, std::span<const std::pair<int32_t, int>> sample);
};

// f*_B(x) = 1[eta(x) >= 1/2], inclusive at 1/2
Hypothesis bayes_classifier(const LabeledDistribution& dist);

// f*_p(x) = f*_B(x) when |2 eta(x) - 1| >= 2p, '*' otherwise; p in (0, 1/2]
AbstainingHypothesis bayes_chow_classifier(const LabeledDistribution& dist, double p);

// ---- distribution generators ----

// uniform px, eta = (1 -+ h)/2 below/at the crossing index
LabeledDistribution make_massart_threshold(int m, double h, int crossing);

// one heavy point with eta = 1/2 + eps, threshold truth elsewhere
LabeledDistribution make_heavy_noisy_point(int m, int heavy_index, double heavy_mass, double eps);

// eta crosses 1/2 smoothly: eta = 1/2 + (1/2) sign(u) |u|^power with u = 2c - 1
LabeledDistribution make_power_crossing(int m, double power);

// random px (normalized uniforms) and random eta
LabeledDistribution make_random_distribution(int m, uint64_t seed);

// two rules disagreeing on diff_points support points, deterministic labels
// Y = f_true(X) with f_true outside the class and both rules at equal risk
struct MisspecifiedPair {
  HypothesisClass cls;
  LabeledDistribution dist;
  Hypothesis truth;
};
MisspecifiedPair make_misspecified_pair(int diff_points, int clean_points);

}  // namespace abstain
