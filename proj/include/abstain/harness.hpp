#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "abstain/diagnostics.hpp"
#include "abstain/distribution.hpp"
#include "abstain/hypothesis.hpp"
#include "abstain/learners.hpp"

namespace abstain {

inline constexpr const char* kLibraryVersion = "0.1.0";

// config validation failure carrying the offending fields
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string message, std::vector<std::string> fields);
  const std::vector<std::string>& fields() const { return fields_; }

 private:
  std::vector<std::string> fields_;
};

// ---- instance construction from JSON ----

HypothesisClass class_from_json(const nlohmann::json& j);
LabeledDistribution distribution_from_json(const nlohmann::json& j);

struct Instance {
  std::shared_ptr<const HypothesisClass> cls;
  std::shared_ptr<const LabeledDistribution> dist;
};
// either {"class":…, "distribution":…} or a combined {"instance":…} generator
Instance instance_from_json(const nlohmann::json& config);

// ---- experiment configuration ----

struct ExperimentConfig {
  nlohmann::json raw;  // full config as given (sidecar provenance)
  std::string algorithm;  // midpoint | active_abstain | finite_diameter | passive
  std::vector<double> epsilon_grid;  // single NaN entry when not applicable
  double delta = 0.0;
  std::optional<double> p;
  std::optional<double> h;
  std::optional<int64_t> n;
  std::vector<uint64_t> seeds;
  bool debug_checks = false;
  int threads = 0;  // 0: ABSTAIN_AL_THREADS env or hardware concurrency
  std::string passive_mode;  // fixed_n | labels_to_target
  int64_t passive_cap = 262144;
  int min_curve_seeds = 10;

  static ExperimentConfig parse(const nlohmann::json& j);
};

struct SweepRow {
  std::string config_hash;
  std::string algorithm;
  int grid_index = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double p = 0.0;
  double h = 0.0;
  int64_t n = 0;
  int d = 0;
  uint64_t seed = 0;
  int64_t labels_used = 0;
  int64_t extra_labels = 0;
  int terminal_iteration = 0;
  int trigger_fired = 0;
  int trigger_iteration = 0;
  double diameter = 0.0;
  double alpha = 0.0;
  double abstain_mass = 0.0;
  double error_mass = 0.0;
  double excess_chow = 0.0;
  double excess_r0 = 0.0;
  double abstain_highmargin_mass = 0.0;
  int reached = 1;
  double wall_time_ms = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  nlohmann::json sidecar;
  std::string config_hash;
};

std::string sweep_csv_header();
std::string sweep_row_csv(const SweepRow& row);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);

// canonical 64-bit FNV-1a over the sorted-key dump
uint64_t config_hash64(const nlohmann::json& j);
std::string config_hash_hex(const nlohmann::json& j);

// per-run seed: a pure function of the instance part of the config, the grid
// value and the seed value, so any single row can be reproduced in isolation
uint64_t run_seed(uint64_t instance_hash, double epsilon, uint64_t seed);

// executes every (grid point, seed) run; when csv_path is non-empty the rows
// are flushed there in deterministic order as they complete, with the sidecar
// JSON written next to it
SweepResult run_experiment(const ExperimentConfig& config, const std::string& csv_path = "",
                           const std::string& sidecar_path = "");

// one seeded run (exactly one seed and one grid point in the config); returns
// the transcript, the sweep row and the exact best-in-class risk as JSON
nlohmann::json run_single(const ExperimentConfig& config);

// per-epsilon label quantiles of the active learner against the passive
// baseline's labels-to-reach-epsilon
struct CurveRow {
  std::string algorithm;
  double epsilon = 0.0;
  int runs = 0;
  double labels_median = 0.0;
  double labels_q25 = 0.0;
  double labels_q75 = 0.0;
};
std::vector<CurveRow> label_complexity_curve(const ExperimentConfig& config);
std::string curve_csv(const std::vector<CurveRow>& rows);

// ---- guarantee checks over a finished sweep ----

struct GuaranteeReport {
  std::string guarantee;
  int rows_considered = 0;
  int rows_passed = 0;
  double pass_fraction = 1.0;
  int fired_count = 0;   // negativity trigger only
  nlohmann::json per_run = nlohmann::json::array();
};

GuaranteeReport check_guarantee(const std::vector<SweepRow>& rows, const nlohmann::json& sidecar,
                                const std::string& guarantee);

double default_threads_from_env();

}  // namespace abstain
