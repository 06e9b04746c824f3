#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace abstain {

// Finite instance space: points are the ids 0..M-1. Coordinates are optional,
// strictly increasing when present; threshold classes are defined through them.
class InstanceSpace {
 public:
  explicit InstanceSpace(int size);
  InstanceSpace(int size, std::vector<double> coords);

  int size() const { return size_; }
  bool has_coords() const { return !coords_.empty(); }
  double coord(int x) const { return coords_[static_cast<size_t>(x)]; }
  const std::vector<double>& coords() const { return coords_; }

 private:
  int size_;
  std::vector<double> coords_;
};

inline constexpr uint8_t kAbstain = 2;  // the '*' value of a {0,1,*} classifier

// {0,1}-valued prediction table over an instance space.
struct Hypothesis {
  std::vector<uint8_t> predictions;  // one entry per point, each 0 or 1
  int32_t class_index = -1;          // identity within its class, -1 if standalone

  int points() const { return static_cast<int>(predictions.size()); }
  uint8_t operator()(int x) const { return predictions[static_cast<size_t>(x)]; }
};

// {0,1,*}-valued prediction table.
struct AbstainingHypothesis {
  std::vector<uint8_t> predictions;  // entries in {0, 1, kAbstain}

  int points() const { return static_cast<int>(predictions.size()); }
  uint8_t operator()(int x) const { return predictions[static_cast<size_t>(x)]; }
  bool abstains_somewhere() const;
  std::vector<int32_t> abstention_points() const;

  // valid only when no entry abstains
  Hypothesis as_binary() const;

  static AbstainingHypothesis from_binary(const Hypothesis& f);
};

// Fully enumerated finite class. Hypotheses keep their construction order
// (class_index), duplicates are rejected, the VC dimension is either declared
// or computed by brute force on first use and cached.
class HypothesisClass {
 public:
  HypothesisClass(std::shared_ptr<const InstanceSpace> space,
                  std::vector<std::vector<uint8_t>> tables,
                  std::optional<int> declared_vc = std::nullopt);

  const InstanceSpace& space() const { return *space_; }
  std::shared_ptr<const InstanceSpace> space_ptr() const { return space_; }
  int size() const { return static_cast<int>(hypotheses_.size()); }
  int points() const { return space_->size(); }
  const Hypothesis& hypothesis(int32_t i) const { return hypotheses_[static_cast<size_t>(i)]; }
  const std::vector<Hypothesis>& hypotheses() const { return hypotheses_; }

  // packed 64-bit rows of the prediction tables, used by the set-geometry scans
  const std::vector<uint64_t>& packed() const { return packed_; }
  int words_per_hypothesis() const { return words_; }

  std::optional<int> declared_vc() const;
  void cache_vc(int d) const;

 private:
  std::shared_ptr<const InstanceSpace> space_;
  std::vector<Hypothesis> hypotheses_;
  std::vector<uint64_t> packed_;
  int words_ = 0;
  std::shared_ptr<std::atomic<int>> vc_cache_;  // -1 means not computed yet
};

// ---- operations ----

// dis(S) = { x : some pair in S disagrees at x }; errors on an empty subset.
std::vector<int32_t> disagreement_set(const HypothesisClass& cls, std::span<const int32_t> members);
std::vector<int32_t> disagreement_set(std::span<const Hypothesis> subset);

// dis(S) as a 0/1 mask over all points
std::vector<uint8_t> disagreement_mask(const HypothesisClass& cls, std::span<const int32_t> members);

// max over pairs of sqrt(empirical fraction of sample points where f != g);
// the sample is a multiset of point ids
double empirical_l2_diameter(const HypothesisClass& cls, std::span<const int32_t> members,
                             std::span<const int32_t> sample);
double empirical_l2_diameter(std::span<const Hypothesis> subset, std::span<const int32_t> sample);

// counts form: counts[x] = multiplicity of x in the sample, total = sum
double empirical_l2_diameter_counts(const HypothesisClass& cls, std::span<const int32_t> members,
                                    std::span<const int64_t> counts, int64_t total);

// sum over x of px[x] * 1[f(x) != g(x)]
double true_l1_distance(const Hypothesis& f, const Hypothesis& g, std::span<const double> px);

// f where f and g agree, '*' where they disagree
AbstainingHypothesis midpoint(const Hypothesis& f, const Hypothesis& g);

// largest number of distinct restrictions over k-point subsets; exact brute force
// with the enumeration work capped at 1e7 entries
int64_t growth_function(const HypothesisClass& cls, int k);

// largest d with growth(d) = 2^d, computed by pruned search over shattered sets;
// the result is cached in the class
int vc_dimension(const HypothesisClass& cls);

// ---- class generators ----

std::shared_ptr<const InstanceSpace> make_grid_space(int m);

// thresholds 1[coord(x) >= coord(t)] for every grid point t, plus the all-zeros rule
HypothesisClass make_threshold_class(int m);
HypothesisClass make_threshold_class(std::shared_ptr<const InstanceSpace> space);

// `count` distinct uniformly random tables
HypothesisClass make_random_class(int m, int count, uint64_t seed);

}  // namespace abstain
