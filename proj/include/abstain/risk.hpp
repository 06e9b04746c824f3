#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "abstain/distribution.hpp"
#include "abstain/hypothesis.hpp"

namespace abstain {

// every logarithm in the deviation radii is clamped below at 1
double clamped_log(double x);

// loss behind Chow's risk: a wrong {0,1} prediction costs 1, abstaining costs 1/2 - p
double lp_loss(int y, uint8_t v, double p);

// Exact risk decomposition of a {0,1,*} classifier.  binary_risk scores
// abstentions as random guesses (price 1/2), i.e. it is the p = 0 Chow risk;
// for abstention-free classifiers it coincides with the plain binary risk.
struct RiskReport {
  double binary_risk = 0.0;
  double chow_risk = 0.0;
  double abstain_mass = 0.0;
  double error_mass = 0.0;
  double p = 0.0;
};

RiskReport chow_risk_exact(const AbstainingHypothesis& f, const LabeledDistribution& dist, double p);
double binary_risk_exact(const Hypothesis& f, const LabeledDistribution& dist);

double chow_risk_empirical(const AbstainingHypothesis& f,
                           std::span<const std::pair<int32_t, int>> sample, double p);
double chow_risk_empirical_counts(const AbstainingHypothesis& f, const LabeledCounts& sample, double p);
double binary_risk_empirical_counts(const Hypothesis& f, const LabeledCounts& sample);

// error count of a {0,1} table on a counted sample (exact integer form)
int64_t error_count(const uint8_t* predictions, const LabeledCounts& sample);

struct DeviationRadius {
  double value = 0.0;
  double n = 0.0;
  double delta = 0.0;
  int d = 0;
};

// alpha^2(n, delta) = (4/n)(3 d log(e(2n v d)/d) + log(56/delta))
double alpha_sq(double n, double delta, int d);
DeviationRadius alpha_radius(int64_t n, double delta, int d);

// beta^2  = (4/n)(2 d log(e(2n v d)/d) + log(24/delta))
DeviationRadius beta_radius(int64_t n, double delta, int d);

// gamma^2 = (4/n)(3 d log(e(2n v d)/d) + log(32/delta))
DeviationRadius gamma_radius(int64_t n, double delta, int d);

// sigma^2 = (4/n)(log S(2n) + log(8/delta)); exact growth when enumerable,
// Sauer bound otherwise (flagged)
struct SigmaRadius {
  DeviationRadius radius;
  bool exact_growth = false;
};
SigmaRadius sigma_radius(int64_t n, double delta, const HypothesisClass& cls);

// Monte Carlo check of the two uniform-deviation families and the Chow-risk
// deviation over all pairs f in F, g in (F+F)/2.  Returns the fraction of
// trials on which every inequality of a family held, plus one CSV row per trial.
struct UniformBoundReport {
  double frac_risk_gap = 0.0;   // |R(f)-R(g)-Rn(f)+Rn(g)| family
  double frac_l1 = 0.0;         // |P|f-g| - Pn|f-g|| family
  double frac_chow = 0.0;       // Chow-risk deviation family
  int trials = 0;
  std::string trial_csv;        // header + one row per trial
};

UniformBoundReport verify_uniform_bounds(const HypothesisClass& cls, const LabeledDistribution& dist,
                                         int64_t n, double delta, int trials, double p = 0.1,
                                         uint64_t seed = 0, int threads = 1);

}  // namespace abstain
