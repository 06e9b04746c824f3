#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "abstain/distribution.hpp"
#include "abstain/hypothesis.hpp"
#include "abstain/risk.hpp"

namespace abstain {

struct RunTranscript;  // learners.hpp
struct Schedule;

// theta(eps) = sup over centers g in F and eps0 >= eps of
//   P_X(dis({f : ||f-g||_L1 <= eps0})) / eps0, floored at 1.
// The ratio is piecewise constant between realized distances, so the supremum
// is attained on {eps} union {realized distances >= eps} and is computed exactly.
double disagreement_coefficient(const HypothesisClass& cls, std::span<const double> px, double eps);

// largest s admitting a star configuration; exact search over centers with
// branch-and-bound over candidate point sets.  Returns nullopt beyond the
// enumeration caps (|F| <= 64, M <= 64) or when the node budget runs out.
std::optional<int> star_number(const HypothesisClass& cls);

// max over pairs of |{x : f(x) != g(x)}| counted over all support points
int class_diameter(const HypothesisClass& cls);

// argmin of the exact binary risk, ties to the lowest index
std::pair<int32_t, double> exact_best_in_class(const HypothesisClass& cls,
                                               const LabeledDistribution& dist);

// exact minimizer of Chow's risk over all 3^M abstaining tables; M <= 8
std::pair<AbstainingHypothesis, double> exhaustive_chow_minimizer(const LabeledDistribution& dist,
                                                                  double p);

struct ComplexityProfile {
  int vc = 0;
  std::optional<int> star;
  std::optional<int> diameter;
  std::vector<std::pair<double, double>> theta_curve;  // (radius, theta(radius))
};

// profile with theta evaluated at the given radii (deduplicated, exact)
ComplexityProfile make_complexity_profile(const HypothesisClass& cls, const LabeledDistribution& dist,
                                          std::span<const double> theta_radii);

// the radii xi_{j-1} = 50^2 alpha^2(n_{j-1}, delta_{j-1}) / p^2 the ledger
// ceiling evaluates theta at, for j = 1..J
std::vector<double> ceiling_radii(const Schedule& schedule);

struct CeilingReport {
  double bound = 0.0;
  bool within = false;
  bool checked = false;  // false when some theta(radius) is missing from the profile
};

// closed-form label ceiling of the active algorithm compared with a
// transcript's ledger (majority-stage requests excluded)
CeilingReport theorem31_label_ceiling(const RunTranscript& transcript,
                                      const ComplexityProfile& profile, const Schedule& schedule);

}  // namespace abstain
