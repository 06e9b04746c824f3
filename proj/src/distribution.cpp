#include "abstain/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace abstain {

LabeledDistribution::LabeledDistribution(std::shared_ptr<const InstanceSpace> space,
                                         std::vector<double> px, std::vector<double> eta)
    : space_(std::move(space)), px_(std::move(px)), eta_(std::move(eta)) {
  if (!space_) throw std::invalid_argument("null instance space");
  const size_t m = static_cast<size_t>(space_->size());
  if (px_.size() != m || eta_.size() != m)
    throw std::invalid_argument("px/eta size must match the instance space");
  double total = 0.0;
  for (double w : px_) {
    if (w < 0.0) throw std::invalid_argument("px entries must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("px must sum to 1");
  for (double e : eta_)
    if (e < 0.0 || e > 1.0) throw std::invalid_argument("eta entries must lie in [0,1]");
  cum_.resize(m);
  double acc = 0.0;
  for (size_t x = 0; x < m; ++x) {
    acc += px_[x];
    cum_[x] = acc;
  }
  cum_.back() = 1.0;
}

double LabeledDistribution::massart_margin() const {
  double h = 1.0;
  for (size_t x = 0; x < px_.size(); ++x)
    if (px_[x] > 0.0) h = std::min(h, std::abs(2.0 * eta_[x] - 1.0));
  return h;
}

Pool::Pool(std::shared_ptr<const LabeledDistribution> dist, uint64_t seed)
    : dist_(std::move(dist)), rng_(derive_key(seed, kPoolStreamTag)) {
  if (!dist_) throw std::invalid_argument("null distribution");
}

int32_t Pool::draw() {
  double u = rng_.next_unit();
  ++draws_made_;
  const auto& cum = dist_->cumulative();
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  if (it == cum.end()) --it;
  return static_cast<int32_t>(it - cum.begin());
}

std::vector<int32_t> Pool::sample(int64_t count) {
  if (count < 0) throw std::invalid_argument("sample count must be non-negative");
  std::vector<int32_t> out;
  out.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) out.push_back(draw());
  return out;
}

LabelOracle::LabelOracle(std::shared_ptr<const LabeledDistribution> dist, uint64_t seed)
    : dist_(std::move(dist)) {
  if (!dist_) throw std::invalid_argument("null distribution");
  uint64_t base = derive_key(seed, kOracleStreamTag);
  own_key_ = mix64(base, 1);
  keyed_key_ = mix64(base, 2);
}

int LabelOracle::draw_label(uint64_t key, uint64_t counter, int32_t x) const {
  if (x < 0 || x >= dist_->points()) throw std::invalid_argument("invalid point id");
  return unit_double(mix64(key, counter)) < dist_->eta(x) ? 1 : 0;
}

int LabelOracle::query(int32_t x) {
  int y = draw_label(own_key_, static_cast<uint64_t>(own_counter_++), x);
  ++requests_made_;
  return y;
}

int LabelOracle::query_at(int32_t x, uint64_t draw_index) {
  int y = draw_label(keyed_key_, draw_index, x);
  ++requests_made_;
  return y;
}

int LabelOracle::peek_at(int32_t x, uint64_t draw_index) const {
  return draw_label(keyed_key_, draw_index, x);
}

LabeledCounts LabeledCounts::from_pairs(int m, std::span<const std::pair<int32_t, int>> sample) {
  LabeledCounts c(m);
  for (const auto& [x, y] : sample) {
    if (x < 0 || x >= m) throw std::invalid_argument("sample point id out of range");
    c.add(x, y);
  }
  return c;
}

Hypothesis bayes_classifier(const LabeledDistribution& dist) {
  Hypothesis f;
  f.predictions.resize(static_cast<size_t>(dist.points()));
  for (int x = 0; x < dist.points(); ++x)
    f.predictions[static_cast<size_t>(x)] = dist.eta(x) >= 0.5 ? 1 : 0;
  return f;
}

AbstainingHypothesis bayes_chow_classifier(const LabeledDistribution& dist, double p) {
  if (!(p > 0.0 && p <= 0.5)) throw std::invalid_argument("p must lie in (0, 1/2]");
  AbstainingHypothesis f;
  f.predictions.resize(static_cast<size_t>(dist.points()));
  for (int x = 0; x < dist.points(); ++x) {
    double margin = std::abs(2.0 * dist.eta(x) - 1.0);
    f.predictions[static_cast<size_t>(x)] =
        margin >= 2.0 * p ? (dist.eta(x) >= 0.5 ? 1 : 0) : kAbstain;
  }
  return f;
}

LabeledDistribution make_massart_threshold(int m, double h, int crossing) {
  if (!(h >= 0.0 && h <= 1.0)) throw std::invalid_argument("margin h must lie in [0,1]");
  if (crossing < 0 || crossing >= m) throw std::invalid_argument("crossing out of range");
  std::vector<double> px(static_cast<size_t>(m), 1.0 / m);
  std::vector<double> eta(static_cast<size_t>(m));
  for (int x = 0; x < m; ++x)
    eta[static_cast<size_t>(x)] = x < crossing ? (1.0 - h) / 2.0 : (1.0 + h) / 2.0;
  return LabeledDistribution(make_grid_space(m), std::move(px), std::move(eta));
}

LabeledDistribution make_heavy_noisy_point(int m, int heavy_index, double heavy_mass, double eps) {
  if (heavy_index < 0 || heavy_index >= m) throw std::invalid_argument("heavy index out of range");
  if (!(heavy_mass > 0.0 && heavy_mass <= 1.0)) throw std::invalid_argument("heavy mass out of range");
  if (m > 1 && heavy_mass >= 1.0) throw std::invalid_argument("heavy mass leaves no mass for the rest");
  std::vector<double> px(static_cast<size_t>(m), m > 1 ? (1.0 - heavy_mass) / (m - 1) : 0.0);
  px[static_cast<size_t>(heavy_index)] = heavy_mass;
  std::vector<double> eta(static_cast<size_t>(m));
  for (int x = 0; x < m; ++x) eta[static_cast<size_t>(x)] = x >= m / 2 ? 1.0 : 0.0;
  eta[static_cast<size_t>(heavy_index)] = 0.5 + eps;
  return LabeledDistribution(make_grid_space(m), std::move(px), std::move(eta));
}

LabeledDistribution make_power_crossing(int m, double power) {
  if (!(power > 0.0)) throw std::invalid_argument("power must be positive");
  auto space = make_grid_space(m);
  std::vector<double> px(static_cast<size_t>(m), 1.0 / m);
  std::vector<double> eta(static_cast<size_t>(m));
  for (int x = 0; x < m; ++x) {
    double u = 2.0 * space->coord(x) - 1.0;
    double s = u >= 0.0 ? 1.0 : -1.0;
    eta[static_cast<size_t>(x)] = 0.5 + 0.5 * s * std::pow(std::abs(u), power);
  }
  return LabeledDistribution(std::move(space), std::move(px), std::move(eta));
}

LabeledDistribution make_random_distribution(int m, uint64_t seed) {
  CounterRng rng(derive_key(seed, 0x64697374ULL));
  std::vector<double> px(static_cast<size_t>(m));
  double total = 0.0;
  for (int x = 0; x < m; ++x) {
    px[static_cast<size_t>(x)] = rng.next_unit() + 1e-6;
    total += px[static_cast<size_t>(x)];
  }
  for (double& w : px) w /= total;
  // compensate rounding so the sum is exactly representable as 1 within 1e-12
  double acc = 0.0;
  for (size_t x = 0; x + 1 < px.size(); ++x) acc += px[x];
  px.back() = 1.0 - acc;
  std::vector<double> eta(static_cast<size_t>(m));
  for (int x = 0; x < m; ++x) eta[static_cast<size_t>(x)] = rng.next_unit();
  return LabeledDistribution(make_grid_space(m), std::move(px), std::move(eta));
}

MisspecifiedPair make_misspecified_pair(int diff_points, int clean_points) {
  if (diff_points < 2) throw std::invalid_argument("need at least two disagreement points");
  if (clean_points < 1) throw std::invalid_argument("need at least one agreement point");
  const int m = diff_points + clean_points;
  const int b = diff_points / 2;  // points where the truth follows the second rule
  // equal total mass on both sides of the disagreement region keeps the two
  // rules tied in risk, so neither is ever excluded and the mid-point abstains
  const double diff_mass = 0.5;
  std::vector<double> px(static_cast<size_t>(m));
  for (int x = 0; x < b; ++x) px[static_cast<size_t>(x)] = diff_mass / 2.0 / b;
  for (int x = b; x < diff_points; ++x) px[static_cast<size_t>(x)] = diff_mass / 2.0 / (diff_points - b);
  for (int x = diff_points; x < m; ++x) px[static_cast<size_t>(x)] = (1.0 - diff_mass) / clean_points;

  std::vector<uint8_t> f1(static_cast<size_t>(m), 0), f2(static_cast<size_t>(m), 0);
  std::vector<uint8_t> truth(static_cast<size_t>(m), 0);
  for (int x = 0; x < diff_points; ++x) f2[static_cast<size_t>(x)] = 1;  // disagree here
  for (int x = diff_points; x < m; ++x) {
    uint8_t v = (x - diff_points) % 2;  // shared clean labels
    f1[static_cast<size_t>(x)] = f2[static_cast<size_t>(x)] = truth[static_cast<size_t>(x)] = v;
  }
  for (int x = 0; x < b; ++x) truth[static_cast<size_t>(x)] = 1;  // f2 right, f1 wrong
  // remaining diff points: truth 0 = f1 right, f2 wrong

  std::vector<double> eta(static_cast<size_t>(m));
  for (int x = 0; x < m; ++x) eta[static_cast<size_t>(x)] = truth[static_cast<size_t>(x)];

  auto space = make_grid_space(m);
  HypothesisClass cls(space, {f1, f2});
  LabeledDistribution dist(space, std::move(px), std::move(eta));
  return MisspecifiedPair{std::move(cls), std::move(dist), Hypothesis{std::move(truth), -1}};
}

}  // namespace abstain
