#include "abstain/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_set>

#include "abstain/rng.hpp"

namespace abstain {

InstanceSpace::InstanceSpace(int size) : size_(size) {
  if (size < 1) throw std::invalid_argument("instance space must have at least one point");
}

InstanceSpace::InstanceSpace(int size, std::vector<double> coords) : size_(size), coords_(std::move(coords)) {
  if (size < 1) throw std::invalid_argument("instance space must have at least one point");
  if (!coords_.empty()) {
    if (static_cast<int>(coords_.size()) != size)
      throw std::invalid_argument("coordinate count must match instance space size");
    for (size_t i = 1; i < coords_.size(); ++i)
      if (!(coords_[i - 1] < coords_[i]))
        throw std::invalid_argument("coordinates must be strictly increasing");
  }
}

bool AbstainingHypothesis::abstains_somewhere() const {
  for (uint8_t v : predictions)
    if (v == kAbstain) return true;
  return false;
}

std::vector<int32_t> AbstainingHypothesis::abstention_points() const {
  std::vector<int32_t> out;
  for (size_t x = 0; x < predictions.size(); ++x)
    if (predictions[x] == kAbstain) out.push_back(static_cast<int32_t>(x));
  return out;
}

Hypothesis AbstainingHypothesis::as_binary() const {
  if (abstains_somewhere()) throw std::logic_error("classifier abstains, no binary image");
  return Hypothesis{predictions, -1};
}

AbstainingHypothesis AbstainingHypothesis::from_binary(const Hypothesis& f) {
  return AbstainingHypothesis{f.predictions};
}

HypothesisClass::HypothesisClass(std::shared_ptr<const InstanceSpace> space,
                                 std::vector<std::vector<uint8_t>> tables, std::optional<int> declared_vc)
    : space_(std::move(space)), vc_cache_(std::make_shared<std::atomic<int>>(-1)) {
  if (!space_) throw std::invalid_argument("null instance space");
  if (tables.empty()) throw std::invalid_argument("hypothesis class must be non-empty");
  const int m = space_->size();
  std::unordered_set<std::string> seen;
  hypotheses_.reserve(tables.size());
  for (size_t i = 0; i < tables.size(); ++i) {
    auto& t = tables[i];
    if (static_cast<int>(t.size()) != m) throw std::invalid_argument("prediction table size mismatch");
    for (uint8_t v : t)
      if (v != 0 && v != 1) throw std::invalid_argument("prediction table entries must be 0 or 1");
    std::string key(reinterpret_cast<const char*>(t.data()), t.size());
    if (!seen.insert(std::move(key)).second)
      throw std::invalid_argument("duplicate prediction table at index " + std::to_string(i));
    hypotheses_.push_back(Hypothesis{std::move(t), static_cast<int32_t>(i)});
  }
  words_ = (m + 63) / 64;
  packed_.assign(hypotheses_.size() * static_cast<size_t>(words_), 0);
  for (size_t i = 0; i < hypotheses_.size(); ++i)
    for (int x = 0; x < m; ++x)
      if (hypotheses_[i].predictions[static_cast<size_t>(x)])
        packed_[i * static_cast<size_t>(words_) + static_cast<size_t>(x / 64)] |= uint64_t(1) << (x % 64);
  if (declared_vc) {
    if (*declared_vc < 0) throw std::invalid_argument("declared VC dimension must be non-negative");
    vc_cache_->store(*declared_vc);
  }
}

std::optional<int> HypothesisClass::declared_vc() const {
  int v = vc_cache_->load();
  if (v < 0) return std::nullopt;
  return v;
}

void HypothesisClass::cache_vc(int d) const { vc_cache_->store(d); }

// dis(S) = union over f in S of dis({f, s0}) for any fixed anchor s0 in S
std::vector<uint8_t> disagreement_mask(const HypothesisClass& cls, std::span<const int32_t> members) {
  if (members.empty()) throw std::invalid_argument("empty version space");
  const int m = cls.points();
  std::vector<uint8_t> mask(static_cast<size_t>(m), 0);
  const auto& anchor = cls.hypothesis(members[0]).predictions;
  for (int32_t i : members) {
    const auto& p = cls.hypothesis(i).predictions;
    for (int x = 0; x < m; ++x)
      if (p[static_cast<size_t>(x)] != anchor[static_cast<size_t>(x)]) mask[static_cast<size_t>(x)] = 1;
  }
  return mask;
}

std::vector<int32_t> disagreement_set(const HypothesisClass& cls, std::span<const int32_t> members) {
  auto mask = disagreement_mask(cls, members);
  std::vector<int32_t> out;
  for (size_t x = 0; x < mask.size(); ++x)
    if (mask[x]) out.push_back(static_cast<int32_t>(x));
  return out;
}

std::vector<int32_t> disagreement_set(std::span<const Hypothesis> subset) {
  if (subset.empty()) throw std::invalid_argument("empty version space");
  const size_t m = subset[0].predictions.size();
  for (const auto& h : subset)
    if (h.predictions.size() != m) throw std::invalid_argument("hypotheses over different instance spaces");
  std::vector<int32_t> out;
  const auto& anchor = subset[0].predictions;
  for (size_t x = 0; x < m; ++x) {
    for (const auto& h : subset) {
      if (h.predictions[x] != anchor[x]) {
        out.push_back(static_cast<int32_t>(x));
        break;
      }
    }
  }
  return out;
}

namespace {

// weighted Hamming distance between two tables restricted to support points
int64_t weighted_disagreement(const uint8_t* f, const uint8_t* g, std::span<const int32_t> support,
                              std::span<const int64_t> counts) {
  int64_t acc = 0;
  for (int32_t x : support)
    if (f[x] != g[x]) acc += counts[static_cast<size_t>(x)];
  return acc;
}

// shared pairwise-max core over an arbitrary table accessor; triangle-inequality
// pruning on distances to an anchor keeps the scan near linear in practice
template <typename TableAt>
double diameter_core(int n_members, TableAt table_at, std::span<const int32_t> support,
                     std::span<const int64_t> counts, int64_t total) {
  if (n_members <= 1) return 0.0;
  const uint8_t* anchor = table_at(0);
  std::vector<std::pair<double, int>> by_dist(static_cast<size_t>(n_members));
  for (int i = 0; i < n_members; ++i) {
    int64_t w = weighted_disagreement(anchor, table_at(i), support, counts);
    by_dist[static_cast<size_t>(i)] = {std::sqrt(static_cast<double>(w) / static_cast<double>(total)), i};
  }
  std::sort(by_dist.begin(), by_dist.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  double best = 0.0;
  for (int i = 0; i < n_members; ++i) {
    if (2.0 * by_dist[static_cast<size_t>(i)].first <= best) break;
    for (int j = i + 1; j < n_members; ++j) {
      if (by_dist[static_cast<size_t>(i)].first + by_dist[static_cast<size_t>(j)].first <= best) break;
      int64_t w = weighted_disagreement(table_at(by_dist[static_cast<size_t>(i)].second),
                                        table_at(by_dist[static_cast<size_t>(j)].second), support, counts);
      double d = std::sqrt(static_cast<double>(w) / static_cast<double>(total));
      if (d > best) best = d;
    }
  }
  return best;
}

std::vector<int32_t> support_of(std::span<const int64_t> counts) {
  std::vector<int32_t> s;
  for (size_t x = 0; x < counts.size(); ++x)
    if (counts[x] > 0) s.push_back(static_cast<int32_t>(x));
  return s;
}

std::vector<int64_t> counts_from_sample(int m, std::span<const int32_t> sample) {
  std::vector<int64_t> counts(static_cast<size_t>(m), 0);
  for (int32_t x : sample) {
    if (x < 0 || x >= m) throw std::invalid_argument("sample point id out of range");
    ++counts[static_cast<size_t>(x)];
  }
  return counts;
}

}  // namespace

double empirical_l2_diameter_counts(const HypothesisClass& cls, std::span<const int32_t> members,
                                    std::span<const int64_t> counts, int64_t total) {
  if (members.empty()) throw std::invalid_argument("empty version space");
  if (total <= 0) throw std::invalid_argument("empty sample");
  auto support = support_of(counts);
  auto table_at = [&](int i) { return cls.hypothesis(members[static_cast<size_t>(i)]).predictions.data(); };
  return diameter_core(static_cast<int>(members.size()), table_at, support, counts, total);
}

double empirical_l2_diameter(const HypothesisClass& cls, std::span<const int32_t> members,
                             std::span<const int32_t> sample) {
  if (sample.empty()) throw std::invalid_argument("empty sample");
  auto counts = counts_from_sample(cls.points(), sample);
  return empirical_l2_diameter_counts(cls, members, counts, static_cast<int64_t>(sample.size()));
}

double empirical_l2_diameter(std::span<const Hypothesis> subset, std::span<const int32_t> sample) {
  if (subset.empty()) throw std::invalid_argument("empty version space");
  if (sample.empty()) throw std::invalid_argument("empty sample");
  const int m = subset[0].points();
  for (const auto& h : subset)
    if (h.points() != m) throw std::invalid_argument("hypotheses over different instance spaces");
  auto counts = counts_from_sample(m, sample);
  auto support = support_of(counts);
  auto table_at = [&](int i) { return subset[static_cast<size_t>(i)].predictions.data(); };
  return diameter_core(static_cast<int>(subset.size()), table_at, support, counts,
                       static_cast<int64_t>(sample.size()));
}

double true_l1_distance(const Hypothesis& f, const Hypothesis& g, std::span<const double> px) {
  if (f.predictions.size() != g.predictions.size() || f.predictions.size() != px.size())
    throw std::invalid_argument("mismatched instance space");
  double sum = 0.0, total = 0.0;
  for (size_t x = 0; x < px.size(); ++x) {
    total += px[x];
    if (f.predictions[x] != g.predictions[x]) sum += px[x];
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("weights must sum to 1");
  return sum;
}

AbstainingHypothesis midpoint(const Hypothesis& f, const Hypothesis& g) {
  if (f.predictions.size() != g.predictions.size())
    throw std::invalid_argument("mismatched instance space");
  AbstainingHypothesis out;
  out.predictions.resize(f.predictions.size());
  for (size_t x = 0; x < f.predictions.size(); ++x)
    out.predictions[x] = f.predictions[x] == g.predictions[x] ? f.predictions[x] : kAbstain;
  return out;
}

namespace {

constexpr double kEnumerationCap = 1e7;

double subset_work(int m, int k, int class_size) {
  // C(m, k) subsets, one restriction per hypothesis each
  double c = 1.0;
  for (int i = 0; i < k; ++i) {
    c *= static_cast<double>(m - i) / static_cast<double>(i + 1);
    if (c > 1e18) return c;
  }
  return c * static_cast<double>(class_size);
}

}  // namespace

int64_t growth_function(const HypothesisClass& cls, int k) {
  if (k < 0) throw std::invalid_argument("growth function argument must be non-negative");
  if (k == 0) return 1;
  const int m = cls.points();
  const int n = cls.size();
  // repeated points never add patterns, so k >= m realizes every distinct table
  if (k >= m) return n;
  if (k > 62 || subset_work(m, k, n) > kEnumerationCap)
    throw std::runtime_error("growth function too large to enumerate");

  std::vector<int> idx(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<size_t>(i)] = i;
  int64_t best = 0;
  std::vector<uint64_t> patterns;
  patterns.reserve(static_cast<size_t>(n));
  while (true) {
    patterns.clear();
    for (int h = 0; h < n; ++h) {
      const auto& p = cls.hypothesis(h).predictions;
      uint64_t key = 0;
      for (int i = 0; i < k; ++i) key = (key << 1) | p[static_cast<size_t>(idx[static_cast<size_t>(i)])];
      patterns.push_back(key);
    }
    std::sort(patterns.begin(), patterns.end());
    int64_t distinct = static_cast<int64_t>(
        std::unique(patterns.begin(), patterns.end()) - patterns.begin());
    if (distinct > best) best = distinct;
    // next combination
    int i = k - 1;
    while (i >= 0 && idx[static_cast<size_t>(i)] == m - k + i) --i;
    if (i < 0) break;
    ++idx[static_cast<size_t>(i)];
    for (int j = i + 1; j < k; ++j) idx[static_cast<size_t>(j)] = idx[static_cast<size_t>(j - 1)] + 1;
  }
  return best;
}

namespace {

// Depth-first search over shattered point sets. Shattering is hereditary, so a
// partial set whose restriction realizes fewer than 2^k patterns prunes the
// whole branch. Groups hold hypotheses with identical restrictions.
struct VcSearch {
  const HypothesisClass& cls;
  int m, n;
  int best = 0;
  int64_t work = 0;
  static constexpr int64_t kWorkBudget = 4'000'000'000;

  explicit VcSearch(const HypothesisClass& c) : cls(c), m(c.points()), n(c.size()) {}

  // groups: concatenated hypothesis ids; bounds: group offsets
  void dfs(int depth, int next_point, std::vector<int32_t>& pool, std::vector<int32_t>& bounds) {
    if (depth > best) best = depth;
    // 2^(depth+1) patterns need that many hypotheses
    if ((int64_t(1) << (depth + 1)) > n) return;
    for (int x = next_point; x < m; ++x) {
      work += static_cast<int64_t>(pool.size());
      if (work > kWorkBudget) throw std::runtime_error("vc dimension enumeration exceeded work cap");
      // every group must split at x
      bool splits = true;
      for (size_t g = 0; g + 1 < bounds.size() && splits; ++g) {
        const auto* tbl0 = cls.hypothesis(pool[static_cast<size_t>(bounds[g])]).predictions.data();
        uint8_t first = tbl0[x];
        bool saw_other = false;
        for (int32_t i = bounds[g] + 1; i < bounds[g + 1]; ++i) {
          if (cls.hypothesis(pool[static_cast<size_t>(i)]).predictions[static_cast<size_t>(x)] != first) {
            saw_other = true;
            break;
          }
        }
        if (!saw_other) splits = false;
      }
      if (!splits) continue;
      // refine the partition by x
      std::vector<int32_t> new_pool;
      new_pool.reserve(pool.size());
      std::vector<int32_t> new_bounds{0};
      for (size_t g = 0; g + 1 < bounds.size(); ++g) {
        for (int pass = 0; pass < 2; ++pass) {
          for (int32_t i = bounds[g]; i < bounds[g + 1]; ++i) {
            int32_t h = pool[static_cast<size_t>(i)];
            if (cls.hypothesis(h).predictions[static_cast<size_t>(x)] == pass)
              new_pool.push_back(h);
          }
          new_bounds.push_back(static_cast<int32_t>(new_pool.size()));
        }
      }
      dfs(depth + 1, x + 1, new_pool, new_bounds);
    }
  }
};

}  // namespace

int vc_dimension(const HypothesisClass& cls) {
  if (auto d = cls.declared_vc()) return *d;
  VcSearch search(cls);
  std::vector<int32_t> pool(static_cast<size_t>(cls.size()));
  for (int i = 0; i < cls.size(); ++i) pool[static_cast<size_t>(i)] = i;
  std::vector<int32_t> bounds{0, static_cast<int32_t>(cls.size())};
  if (cls.size() > 1) search.dfs(0, 0, pool, bounds);
  cls.cache_vc(search.best);
  return search.best;
}

std::shared_ptr<const InstanceSpace> make_grid_space(int m) {
  std::vector<double> coords(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) coords[static_cast<size_t>(i)] = (i + 0.5) / static_cast<double>(m);
  return std::make_shared<const InstanceSpace>(m, std::move(coords));
}

HypothesisClass make_threshold_class(std::shared_ptr<const InstanceSpace> space) {
  if (!space->has_coords()) throw std::invalid_argument("threshold class needs coordinates");
  const int m = space->size();
  std::vector<std::vector<uint8_t>> tables;
  tables.reserve(static_cast<size_t>(m) + 1);
  for (int t = 0; t < m; ++t) {
    std::vector<uint8_t> row(static_cast<size_t>(m), 0);
    for (int x = t; x < m; ++x) row[static_cast<size_t>(x)] = 1;
    tables.push_back(std::move(row));
  }
  tables.emplace_back(static_cast<size_t>(m), 0);  // all-zeros, threshold above the grid
  return HypothesisClass(std::move(space), std::move(tables), 1);
}

HypothesisClass make_threshold_class(int m) { return make_threshold_class(make_grid_space(m)); }

HypothesisClass make_random_class(int m, int count, uint64_t seed) {
  if (count < 1) throw std::invalid_argument("class size must be positive");
  CounterRng rng(derive_key(seed, 0x636c617373ULL));
  std::unordered_set<std::string> seen;
  std::vector<std::vector<uint8_t>> tables;
  tables.reserve(static_cast<size_t>(count));
  int64_t attempts = 0;
  while (static_cast<int>(tables.size()) < count) {
    if (++attempts > 1000LL * count)
      throw std::runtime_error("cannot draw enough distinct random tables");
    std::vector<uint8_t> row(static_cast<size_t>(m));
    for (int x = 0; x < m; ++x) row[static_cast<size_t>(x)] = rng.next_u64() & 1;
    std::string key(reinterpret_cast<const char*>(row.data()), row.size());
    if (seen.insert(std::move(key)).second) tables.push_back(std::move(row));
  }
  return HypothesisClass(make_grid_space(m), std::move(tables));
}

}  // namespace abstain
