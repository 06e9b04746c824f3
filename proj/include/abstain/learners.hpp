#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "abstain/distribution.hpp"
#include "abstain/hypothesis.hpp"
#include "abstain/risk.hpp"

namespace abstain {

// iteration schedule of the active algorithm:
// n_j = 2^(j-1), delta_j = delta/(j+1)^2,
// J = min{ k : 148 alpha^2(2^(k-1), delta/(k+1)^2) / p <= epsilon }
struct Schedule {
  int J = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double p = 0.0;
  int d = 0;

  int64_t n_j(int j) const { return int64_t(1) << (j - 1); }
  double delta_j(int j) const { return delta / (double(j + 1) * double(j + 1)); }
};

Schedule compute_schedule(double epsilon, double delta, double p, int d);

// empirical risk minimizer over a class subset, ties to the lowest class index;
// an empty sample makes every risk vacuously zero, so the tie-break rule decides
int32_t erm(const HypothesisClass& cls, std::span<const int32_t> members, const LabeledCounts& sample);

struct VersionSpace {
  std::vector<int32_t> member_indices;
  DeviationRadius defining_radius;
  int32_t erm_index = -1;
};

struct MidpointResult {
  AbstainingHypothesis classifier;
  VersionSpace version_space;
  double diameter = 0.0;       // D(V, L2(P_n))
  int32_t midpoint_partner = -1;  // f0 with classifier = midpoint(f0, erm)
};

// the mid-point algorithm on a labeled sample; d defaults to the class VC dimension
MidpointResult midpoint_algorithm(const HypothesisClass& cls, const LabeledCounts& sample, double p,
                                  double delta);
MidpointResult midpoint_algorithm(const HypothesisClass& cls,
                                  std::span<const std::pair<int32_t, int>> sample, double p,
                                  double delta);
MidpointResult midpoint_algorithm_subset(const HypothesisClass& cls, std::span<const int32_t> members,
                                         const LabeledCounts& sample, double p, double delta, int d);

struct IterationRecord {
  int j = 0;
  int64_t pool_size = 0;        // |Q_j| = n_j
  int64_t labels_requested = 0; // |D_j|
  int64_t version_size = 0;     // |V_j|
  double diameter = 0.0;        // D(V_j, L2(P_{Q_j}))
  double alpha = 0.0;
  double threshold = 0.0;       // 49 alpha / p
  bool trigger_fired = false;
};

struct RunTranscript {
  std::vector<IterationRecord> iterations;
  int64_t total_label_requests = 0;
  int terminal_iteration = 0;
  bool early_trigger = false;
  // majority-vote stage (finite-diameter algorithm only)
  int64_t extra_label_requests = 0;
  int64_t majority_stage_draws = 0;
  std::vector<int32_t> abstention_points;
  // debug-mode identity violations (scaling identity); stays 0 when clean
  int64_t debug_identity_violations = 0;
};

struct ActiveOptions {
  // draw shadow labels for the whole fresh sample and assert the
  // |S_j|(R_Sj(f)-R_Sj(g)) = n_j(R_Qj(f)-R_Qj(g)) identity on every iteration
  bool debug_identities = false;
};

struct ActiveResult {
  AbstainingHypothesis classifier;
  RunTranscript transcript;
  std::vector<int32_t> final_version;  // V at the terminal iteration (nested in all prior)
};

// the disagreement-based active algorithm with a reject option
ActiveResult active_abstain(const HypothesisClass& cls, Pool& pool, LabelOracle& oracle,
                            const Schedule& schedule, const ActiveOptions& options = {});

struct FiniteDiameterResult {
  Hypothesis classifier;
  AbstainingHypothesis stage1;  // the abstaining classifier before splicing
  RunTranscript transcript;
  int64_t majority_query_cap = 0;  // per-point request cap of the majority stage
};

// active stage at p = h/2 targeting epsilon/2 at confidence delta/3, then
// majority votes over repeated label requests on the abstention points
FiniteDiameterResult finite_diameter(const HypothesisClass& cls, Pool& pool, LabelOracle& oracle,
                                     double h, double epsilon, double delta,
                                     const ActiveOptions& options = {});

struct PassiveResult {
  Hypothesis classifier;
  int64_t labels_used = 0;
};

// ERM on n labeled draws
PassiveResult passive_erm_baseline(const HypothesisClass& cls, const LabeledDistribution& dist,
                                   int64_t n, uint64_t seed);

}  // namespace abstain
