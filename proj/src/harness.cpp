#include "abstain/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace abstain {

using nlohmann::json;

ConfigError::ConfigError(std::string message, std::vector<std::string> fields)
    : std::runtime_error(std::move(message)), fields_(std::move(fields)) {}

namespace {

std::vector<std::vector<uint8_t>> tables_from_json(const json& rows) {
  std::vector<std::vector<uint8_t>> tables;
  for (const auto& row : rows) {
    std::vector<uint8_t> t;
    for (const auto& v : row) t.push_back(static_cast<uint8_t>(v.get<int>()));
    tables.push_back(std::move(t));
  }
  return tables;
}

}  // namespace

HypothesisClass class_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("class description must be an object", {"class"});
  std::string kind = j.value("kind", std::string("explicit"));
  std::optional<int> declared;
  if (j.contains("declared_vc")) declared = j.at("declared_vc").get<int>();
  if (kind == "threshold") {
    return make_threshold_class(j.at("grid").get<int>());
  }
  if (kind == "random") {
    return make_random_class(j.at("m").get<int>(), j.at("count").get<int>(),
                             j.at("seed").get<uint64_t>());
  }
  if (kind == "explicit") {
    auto tables = tables_from_json(j.at("table"));
    if (tables.empty()) throw ConfigError("class table must be non-empty", {"class.table"});
    int m = static_cast<int>(tables[0].size());
    std::shared_ptr<const InstanceSpace> space;
    if (j.contains("coords"))
      space = std::make_shared<const InstanceSpace>(m, j.at("coords").get<std::vector<double>>());
    else
      space = make_grid_space(m);
    return HypothesisClass(std::move(space), std::move(tables), declared);
  }
  throw ConfigError("unknown class kind: " + kind, {"class.kind"});
}

LabeledDistribution distribution_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("distribution description must be an object", {"distribution"});
  if (j.contains("px") || j.contains("eta")) {
    auto px = j.at("px").get<std::vector<double>>();
    auto eta = j.at("eta").get<std::vector<double>>();
    int m = static_cast<int>(px.size());
    std::shared_ptr<const InstanceSpace> space;
    if (j.contains("coords"))
      space = std::make_shared<const InstanceSpace>(m, j.at("coords").get<std::vector<double>>());
    else
      space = make_grid_space(m);
    return LabeledDistribution(std::move(space), std::move(px), std::move(eta));
  }
  std::string kind = j.value("kind", std::string(""));
  if (kind == "massart_threshold")
    return make_massart_threshold(j.at("grid").get<int>(), j.at("h").get<double>(),
                                  j.at("crossing").get<int>());
  if (kind == "heavy_noisy_point")
    return make_heavy_noisy_point(j.at("grid").get<int>(), j.at("heavy_index").get<int>(),
                                  j.at("heavy_mass").get<double>(), j.at("eps").get<double>());
  if (kind == "power_crossing")
    return make_power_crossing(j.at("grid").get<int>(), j.at("power").get<double>());
  if (kind == "random")
    return make_random_distribution(j.at("grid").get<int>(), j.at("seed").get<uint64_t>());
  throw ConfigError("unknown distribution kind: " + kind, {"distribution.kind"});
}

Instance instance_from_json(const json& config) {
  if (config.contains("instance")) {
    const auto& j = config.at("instance");
    std::string kind = j.value("kind", std::string(""));
    if (kind == "misspecified_pair") {
      auto pair = make_misspecified_pair(j.at("diff_points").get<int>(),
                                         j.value("clean_points", 5));
      return Instance{std::make_shared<const HypothesisClass>(std::move(pair.cls)),
                      std::make_shared<const LabeledDistribution>(std::move(pair.dist))};
    }
    throw ConfigError("unknown instance kind: " + kind, {"instance.kind"});
  }
  Instance inst{std::make_shared<const HypothesisClass>(class_from_json(config.at("class"))),
                std::make_shared<const LabeledDistribution>(distribution_from_json(config.at("distribution")))};
  if (inst.cls->points() != inst.dist->points())
    throw ConfigError("class and distribution support sizes differ", {"class", "distribution"});
  return inst;
}

namespace {

std::vector<uint64_t> seeds_from_json(const json& j, std::vector<std::string>& errors) {
  std::vector<uint64_t> seeds;
  if (j.contains("seed") && j.contains("seeds")) {
    errors.push_back("seed");
    return seeds;
  }
  if (j.contains("seed")) {
    seeds.push_back(j.at("seed").get<uint64_t>());
    return seeds;
  }
  if (!j.contains("seeds")) {
    errors.push_back("seeds");
    return seeds;
  }
  const auto& s = j.at("seeds");
  if (s.is_array()) {
    for (const auto& v : s) seeds.push_back(v.get<uint64_t>());
  } else if (s.is_object()) {
    uint64_t start = s.value("start", uint64_t(0));
    int64_t count = s.at("count").get<int64_t>();
    if (count < 0) {
      errors.push_back("seeds.count");
      return seeds;
    }
    for (int64_t i = 0; i < count; ++i) seeds.push_back(start + static_cast<uint64_t>(i));
  } else {
    errors.push_back("seeds");
  }
  return seeds;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const json& j) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  cfg.raw = j;

  cfg.algorithm = j.value("algorithm", std::string(""));
  const bool known = cfg.algorithm == "midpoint" || cfg.algorithm == "active_abstain" ||
                     cfg.algorithm == "finite_diameter" || cfg.algorithm == "passive";
  if (!known) errors.push_back("algorithm");

  if (!j.contains("instance") && (!j.contains("class") || !j.contains("distribution"))) {
    if (!j.contains("class")) errors.push_back("class");
    if (!j.contains("distribution")) errors.push_back("distribution");
  }

  cfg.delta = j.value("delta", 0.0);
  if (!(cfg.delta > 0.0 && cfg.delta <= 1.0)) errors.push_back("delta");

  if (j.contains("p")) cfg.p = j.at("p").get<double>();
  if (j.contains("h")) cfg.h = j.at("h").get<double>();
  if (j.contains("n")) cfg.n = j.at("n").get<int64_t>();
  if (cfg.p && !(*cfg.p > 0.0 && *cfg.p <= 0.5)) errors.push_back("p");
  if (cfg.h && !(*cfg.h > 0.0 && *cfg.h <= 1.0)) errors.push_back("h");
  if (cfg.n && *cfg.n < 0) errors.push_back("n");

  if (j.contains("epsilon") && j.contains("epsilon_grid")) errors.push_back("epsilon");
  if (j.contains("epsilon")) cfg.epsilon_grid.push_back(j.at("epsilon").get<double>());
  if (j.contains("epsilon_grid"))
    cfg.epsilon_grid = j.at("epsilon_grid").get<std::vector<double>>();
  for (double e : cfg.epsilon_grid)
    if (!(e > 0.0 && e <= 1.0)) errors.push_back("epsilon_grid");

  cfg.passive_mode = j.value("passive_mode",
                             cfg.n ? std::string("fixed_n") : std::string("labels_to_target"));
  cfg.passive_cap = j.value("passive_cap", int64_t(262144));
  cfg.min_curve_seeds = j.value("min_seeds", 10);
  cfg.debug_checks = j.value("debug_checks", false);
  cfg.threads = j.value("threads", 0);
  if (cfg.threads < 0) errors.push_back("threads");

  if (cfg.algorithm == "midpoint") {
    if (!cfg.n || *cfg.n < 1) errors.push_back("n");
    if (!cfg.p) errors.push_back("p");
    if (cfg.epsilon_grid.empty()) cfg.epsilon_grid.push_back(std::nan(""));
  } else if (cfg.algorithm == "active_abstain") {
    if (!cfg.p) errors.push_back("p");
    if (cfg.epsilon_grid.empty()) errors.push_back("epsilon");
  } else if (cfg.algorithm == "finite_diameter") {
    if (!cfg.h) errors.push_back("h");
    if (cfg.epsilon_grid.empty()) errors.push_back("epsilon");
  } else if (cfg.algorithm == "passive") {
    if (cfg.passive_mode == "fixed_n") {
      if (!cfg.n) errors.push_back("n");
      if (cfg.epsilon_grid.empty()) cfg.epsilon_grid.push_back(std::nan(""));
    } else if (cfg.passive_mode == "labels_to_target") {
      if (cfg.epsilon_grid.empty()) errors.push_back("epsilon");
    } else {
      errors.push_back("passive_mode");
    }
  }

  cfg.seeds = seeds_from_json(j, errors);

  if (!errors.empty()) {
    std::sort(errors.begin(), errors.end());
    errors.erase(std::unique(errors.begin(), errors.end()), errors.end());
    std::string msg = "invalid experiment config, offending fields:";
    for (const auto& f : errors) msg += " " + f;
    throw ConfigError(msg, errors);
  }
  return cfg;
}

uint64_t config_hash64(const json& j) {
  std::string s = j.dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash_hex(const json& j) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_hash64(j)));
  return buf;
}

namespace {

json instance_part(const json& raw) {
  json part = json::object();
  for (const char* key : {"class", "distribution", "instance", "algorithm", "delta", "p", "h", "n",
                          "debug_checks", "passive_mode", "passive_cap"})
    if (raw.contains(key)) part[key] = raw.at(key);
  return part;
}

uint64_t epsilon_bits(double epsilon) {
  if (std::isnan(epsilon)) return 0x7ff8000000000000ULL;
  uint64_t bits;
  std::memcpy(&bits, &epsilon, sizeof(bits));
  return bits;
}

}  // namespace

uint64_t run_seed(uint64_t instance_hash, double epsilon, uint64_t seed) {
  return mix64(mix64(instance_hash, epsilon_bits(epsilon)), seed);
}

double default_threads_from_env() {
  const char* env = std::getenv("ABSTAIN_AL_THREADS");
  if (env && *env) {
    long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<double>(v);
  }
  return 0.0;
}

namespace {

int resolve_threads(int configured, size_t tasks) {
  int t = configured;
  if (t <= 0) t = static_cast<int>(default_threads_from_env());
  if (t <= 0) t = static_cast<int>(std::thread::hardware_concurrency());
  if (t <= 0) t = 1;
  return static_cast<int>(std::min<size_t>(static_cast<size_t>(t), std::max<size_t>(tasks, 1)));
}

double abstain_highmargin(const AbstainingHypothesis& f, const LabeledDistribution& dist, double p) {
  double mass = 0.0;
  for (int x = 0; x < dist.points(); ++x)
    if (f(x) == kAbstain && std::abs(2.0 * dist.eta(x) - 1.0) >= 4.0 * p) mass += dist.px(x);
  return mass;
}

struct RunContext {
  const ExperimentConfig& cfg;
  Instance inst;
  uint64_t instance_hash = 0;
  std::string config_hash;
  int d = 1;
  double best_risk = 0.0;
};

json transcript_to_json(const RunTranscript& t) {
  json j;
  j["total_label_requests"] = t.total_label_requests;
  j["extra_label_requests"] = t.extra_label_requests;
  j["majority_stage_draws"] = t.majority_stage_draws;
  j["terminal_iteration"] = t.terminal_iteration;
  j["early_trigger"] = t.early_trigger;
  j["abstention_points"] = t.abstention_points;
  j["debug_identity_violations"] = t.debug_identity_violations;
  json its = json::array();
  for (const auto& it : t.iterations) {
    json rec;
    rec["j"] = it.j;
    rec["pool_size"] = it.pool_size;
    rec["labels_requested"] = it.labels_requested;
    rec["version_size"] = it.version_size;
    rec["diameter"] = it.diameter;
    rec["alpha"] = it.alpha;
    rec["threshold"] = it.threshold;
    rec["trigger_fired"] = it.trigger_fired;
    its.push_back(rec);
  }
  j["iterations"] = its;
  return j;
}

json classifier_to_json(const std::vector<uint8_t>& predictions) {
  json arr = json::array();
  for (uint8_t v : predictions) arr.push_back(static_cast<int>(v));  // 2 encodes '*'
  return arr;
}

SweepRow execute_run(const RunContext& ctx, int grid_index, uint64_t seed,
                     json* transcript_out = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  const double epsilon = ctx.cfg.epsilon_grid[static_cast<size_t>(grid_index)];
  const uint64_t rs = run_seed(ctx.instance_hash, epsilon, seed);
  const auto& dist = *ctx.inst.dist;
  const auto& cls = *ctx.inst.cls;

  SweepRow row;
  row.config_hash = ctx.config_hash;
  row.algorithm = ctx.cfg.algorithm;
  row.grid_index = grid_index;
  row.epsilon = epsilon;
  row.delta = ctx.cfg.delta;
  row.p = ctx.cfg.p.value_or(std::nan(""));
  row.h = ctx.cfg.h.value_or(std::nan(""));
  row.n = ctx.cfg.n.value_or(0);
  row.d = ctx.d;
  row.seed = seed;

  auto fill_abstaining = [&](const AbstainingHypothesis& f, double p) {
    RiskReport rep = chow_risk_exact(f, dist, p);
    row.abstain_mass = rep.abstain_mass;
    row.error_mass = rep.error_mass;
    row.excess_chow = rep.chow_risk - ctx.best_risk;
    row.excess_r0 = rep.binary_risk - ctx.best_risk;
    row.abstain_highmargin_mass = abstain_highmargin(f, dist, p);
  };

  if (ctx.cfg.algorithm == "midpoint") {
    const int64_t n = *ctx.cfg.n;
    const double p = *ctx.cfg.p;
    Pool pool(ctx.inst.dist, rs);
    LabelOracle oracle(ctx.inst.dist, rs);
    LabeledCounts sample(cls.points());
    for (int64_t i = 0; i < n; ++i) {
      uint64_t posn = static_cast<uint64_t>(pool.draws_made());
      int32_t x = pool.draw();
      sample.add(x, oracle.query_at(x, posn));
    }
    std::vector<int32_t> all(static_cast<size_t>(cls.size()));
    for (int i = 0; i < cls.size(); ++i) all[static_cast<size_t>(i)] = i;
    MidpointResult res = midpoint_algorithm_subset(cls, all, sample, p, ctx.cfg.delta, ctx.d);
    row.labels_used = oracle.requests_made();
    row.diameter = res.diameter;
    row.alpha = res.version_space.defining_radius.value;
    row.trigger_fired = res.diameter >= 49.0 * row.alpha / p ? 1 : 0;  // negativity condition
    fill_abstaining(res.classifier, p);
    if (transcript_out) {
      (*transcript_out)["classifier"] = classifier_to_json(res.classifier.predictions);
      (*transcript_out)["version_space_size"] = res.version_space.member_indices.size();
      (*transcript_out)["erm_index"] = res.version_space.erm_index;
      (*transcript_out)["midpoint_partner"] = res.midpoint_partner;
    }
  } else if (ctx.cfg.algorithm == "active_abstain") {
    const double p = *ctx.cfg.p;
    Schedule sched = compute_schedule(epsilon, ctx.cfg.delta, p, ctx.d);
    Pool pool(ctx.inst.dist, rs);
    LabelOracle oracle(ctx.inst.dist, rs);
    ActiveOptions opts;
    opts.debug_identities = ctx.cfg.debug_checks;
    ActiveResult res = active_abstain(cls, pool, oracle, sched, opts);
    if (res.transcript.debug_identity_violations > 0)
      throw std::logic_error("scaling identity violated in debug run");
    row.labels_used = res.transcript.total_label_requests;
    row.terminal_iteration = res.transcript.terminal_iteration;
    row.trigger_fired = res.transcript.early_trigger ? 1 : 0;
    row.trigger_iteration = res.transcript.early_trigger ? res.transcript.terminal_iteration : 0;
    const auto& last = res.transcript.iterations.back();
    row.diameter = last.diameter;
    row.alpha = last.alpha;
    fill_abstaining(res.classifier, p);
    if (transcript_out) {
      *transcript_out = transcript_to_json(res.transcript);
      (*transcript_out)["classifier"] = classifier_to_json(res.classifier.predictions);
    }
  } else if (ctx.cfg.algorithm == "finite_diameter") {
    const double h = *ctx.cfg.h;
    Pool pool(ctx.inst.dist, rs);
    LabelOracle oracle(ctx.inst.dist, rs);
    ActiveOptions opts;
    opts.debug_identities = ctx.cfg.debug_checks;
    FiniteDiameterResult res = finite_diameter(cls, pool, oracle, h, epsilon, ctx.cfg.delta, opts);
    row.p = h / 2.0;
    row.labels_used = res.transcript.total_label_requests;
    row.extra_labels = res.transcript.extra_label_requests;
    row.terminal_iteration = res.transcript.terminal_iteration;
    row.trigger_fired = res.transcript.early_trigger ? 1 : 0;
    row.trigger_iteration = res.transcript.early_trigger ? res.transcript.terminal_iteration : 0;
    const auto& last = res.transcript.iterations.back();
    row.diameter = last.diameter;
    row.alpha = last.alpha;
    fill_abstaining(AbstainingHypothesis::from_binary(res.classifier), h / 2.0);
    if (transcript_out) {
      *transcript_out = transcript_to_json(res.transcript);
      (*transcript_out)["classifier"] = classifier_to_json(res.classifier.predictions);
      (*transcript_out)["stage1_classifier"] = classifier_to_json(res.stage1.predictions);
      (*transcript_out)["majority_query_cap"] = res.majority_query_cap;
    }
  } else {  // passive
    if (ctx.cfg.passive_mode == "fixed_n") {
      PassiveResult res = passive_erm_baseline(cls, dist, *ctx.cfg.n, rs);
      row.labels_used = res.labels_used;
      fill_abstaining(AbstainingHypothesis::from_binary(res.classifier), 0.0);
      if (transcript_out)
        (*transcript_out)["classifier"] = classifier_to_json(res.classifier.predictions);
    } else {
      Pool pool(ctx.inst.dist, rs);
      LabelOracle oracle(ctx.inst.dist, rs);
      LabeledCounts sample(cls.points());
      std::vector<int32_t> all(static_cast<size_t>(cls.size()));
      for (int i = 0; i < cls.size(); ++i) all[static_cast<size_t>(i)] = i;
      int64_t target = 2;
      int64_t drawn = 0;
      row.reached = 0;
      Hypothesis final_hyp = cls.hypothesis(0);
      while (target <= ctx.cfg.passive_cap) {
        while (drawn < target) {
          uint64_t posn = static_cast<uint64_t>(pool.draws_made());
          int32_t x = pool.draw();
          sample.add(x, oracle.query_at(x, posn));
          ++drawn;
        }
        const Hypothesis& cand = cls.hypothesis(erm(cls, all, sample));
        if (binary_risk_exact(cand, dist) - ctx.best_risk <= epsilon) {
          row.reached = 1;
          final_hyp = cand;
          break;
        }
        target = std::max(target + 1, static_cast<int64_t>(std::ceil(target * 1.3)));
      }
      row.labels_used = drawn;
      fill_abstaining(AbstainingHypothesis::from_binary(final_hyp), 0.0);
      if (transcript_out)
        (*transcript_out)["classifier"] = classifier_to_json(final_hyp.predictions);
    }
  }

  row.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

}  // namespace

std::string sweep_csv_header() {
  return "config_hash,algorithm,grid_index,epsilon,delta,p,h,n,d,seed,labels_used,extra_labels,"
         "terminal_iteration,trigger_fired,trigger_iteration,diameter,alpha,abstain_mass,error_mass,"
         "excess_chow,excess_r0,abstain_highmargin_mass,reached,wall_time_ms\n";
}

std::string sweep_row_csv(const SweepRow& r) {
  char buf[768];
  std::snprintf(buf, sizeof(buf),
                "%s,%s,%d,%.17g,%.17g,%.17g,%.17g,%lld,%d,%llu,%lld,%lld,%d,%d,%d,%.17g,%.17g,%.17g,"
                "%.17g,%.17g,%.17g,%.17g,%d,%.3f\n",
                r.config_hash.c_str(), r.algorithm.c_str(), r.grid_index, r.epsilon, r.delta, r.p, r.h,
                static_cast<long long>(r.n), r.d, static_cast<unsigned long long>(r.seed),
                static_cast<long long>(r.labels_used), static_cast<long long>(r.extra_labels),
                r.terminal_iteration, r.trigger_fired, r.trigger_iteration, r.diameter, r.alpha,
                r.abstain_mass, r.error_mass, r.excess_chow, r.excess_r0, r.abstain_highmargin_mass,
                r.reached, r.wall_time_ms);
  return buf;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::vector<SweepRow> rows;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 24) throw std::runtime_error("malformed sweep CSV row");
    SweepRow r;
    size_t i = 0;
    r.config_hash = cells[i++];
    r.algorithm = cells[i++];
    r.grid_index = std::stoi(cells[i++]);
    r.epsilon = std::strtod(cells[i++].c_str(), nullptr);
    r.delta = std::strtod(cells[i++].c_str(), nullptr);
    r.p = std::strtod(cells[i++].c_str(), nullptr);
    r.h = std::strtod(cells[i++].c_str(), nullptr);
    r.n = std::stoll(cells[i++]);
    r.d = std::stoi(cells[i++]);
    r.seed = std::stoull(cells[i++]);
    r.labels_used = std::stoll(cells[i++]);
    r.extra_labels = std::stoll(cells[i++]);
    r.terminal_iteration = std::stoi(cells[i++]);
    r.trigger_fired = std::stoi(cells[i++]);
    r.trigger_iteration = std::stoi(cells[i++]);
    r.diameter = std::strtod(cells[i++].c_str(), nullptr);
    r.alpha = std::strtod(cells[i++].c_str(), nullptr);
    r.abstain_mass = std::strtod(cells[i++].c_str(), nullptr);
    r.error_mass = std::strtod(cells[i++].c_str(), nullptr);
    r.excess_chow = std::strtod(cells[i++].c_str(), nullptr);
    r.excess_r0 = std::strtod(cells[i++].c_str(), nullptr);
    r.abstain_highmargin_mass = std::strtod(cells[i++].c_str(), nullptr);
    r.reached = std::stoi(cells[i++]);
    r.wall_time_ms = std::strtod(cells[i++].c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

json profile_to_json(const ComplexityProfile& prof) {
  json j;
  j["vc"] = prof.vc;
  j["star"] = prof.star ? json(*prof.star) : json(nullptr);
  j["diameter"] = prof.diameter ? json(*prof.diameter) : json(nullptr);
  json curve = json::array();
  for (const auto& [r, th] : prof.theta_curve) curve.push_back(json::array({r, th}));
  j["theta_curve"] = curve;
  return j;
}

ComplexityProfile profile_from_json(const json& j) {
  ComplexityProfile prof;
  prof.vc = j.value("vc", 0);
  if (j.contains("star") && !j.at("star").is_null()) prof.star = j.at("star").get<int>();
  if (j.contains("diameter") && !j.at("diameter").is_null()) prof.diameter = j.at("diameter").get<int>();
  if (j.contains("theta_curve"))
    for (const auto& pair : j.at("theta_curve"))
      prof.theta_curve.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
  return prof;
}

}  // namespace

SweepResult run_experiment(const ExperimentConfig& cfg, const std::string& csv_path,
                           const std::string& sidecar_path) {
  RunContext ctx{cfg, instance_from_json(cfg.raw), 0, {}, 1, 0.0};
  ctx.instance_hash = config_hash64(instance_part(cfg.raw));
  ctx.config_hash = config_hash_hex(cfg.raw);
  ctx.d = std::max(1, vc_dimension(*ctx.inst.cls));
  auto [best_idx, best_risk] = exact_best_in_class(*ctx.inst.cls, *ctx.inst.dist);
  (void)best_idx;
  ctx.best_risk = best_risk;

  // sidecar: config, provenance and the complexity profile (theta evaluated at
  // every radius the ledger ceiling can ask for)
  std::vector<double> radii;
  if (cfg.algorithm == "active_abstain" || cfg.algorithm == "finite_diameter") {
    for (double eps : cfg.epsilon_grid) {
      double p = cfg.algorithm == "finite_diameter" ? *cfg.h / 2.0 : *cfg.p;
      double eff_eps = cfg.algorithm == "finite_diameter" ? eps / 2.0 : eps;
      double eff_delta = cfg.algorithm == "finite_diameter" ? cfg.delta / 3.0 : cfg.delta;
      Schedule s = compute_schedule(eff_eps, eff_delta, p, ctx.d);
      auto r = ceiling_radii(s);
      radii.insert(radii.end(), r.begin(), r.end());
    }
  }
  ComplexityProfile prof = make_complexity_profile(*ctx.inst.cls, *ctx.inst.dist, radii);

  SweepResult result;
  result.config_hash = ctx.config_hash;
  result.sidecar["config"] = cfg.raw;
  result.sidecar["config_hash"] = ctx.config_hash;
  result.sidecar["instance_hash"] = config_hash_hex(instance_part(cfg.raw));
  result.sidecar["library_version"] = kLibraryVersion;
  result.sidecar["d"] = ctx.d;
  result.sidecar["best_in_class_risk"] = ctx.best_risk;
  result.sidecar["massart_margin"] = ctx.inst.dist->massart_margin();
  result.sidecar["complexity_profile"] = profile_to_json(prof);

  const size_t n_grid = cfg.epsilon_grid.size();
  const size_t n_tasks = n_grid * cfg.seeds.size();
  result.rows.resize(n_tasks);

  std::ofstream csv;
  if (!csv_path.empty()) {
    csv.open(csv_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot open " + csv_path);
    csv << sweep_csv_header();
    csv.flush();
  }

  if (n_tasks > 0) {
    const int threads = resolve_threads(cfg.threads, n_tasks);
    std::atomic<size_t> next{0};
    std::vector<uint8_t> done(n_tasks, 0);
    std::mutex mu;
    std::condition_variable cv;
    std::exception_ptr first_error;
    auto worker = [&] {
      for (size_t t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1)) {
        SweepRow row;
        std::exception_ptr err;
        try {
          int grid_index = static_cast<int>(t / cfg.seeds.size());
          uint64_t seed = cfg.seeds[t % cfg.seeds.size()];
          row = execute_run(ctx, grid_index, seed);
        } catch (...) {
          err = std::current_exception();
        }
        {
          std::lock_guard<std::mutex> lock(mu);
          if (err && !first_error) first_error = err;
          result.rows[t] = std::move(row);
          done[t] = 1;
        }
        cv.notify_all();
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
    // flush rows in deterministic order as they complete
    for (size_t t = 0; t < n_tasks; ++t) {
      std::unique_lock<std::mutex> lock(mu);
      cv.wait(lock, [&] { return done[t] == 1; });
      if (csv.is_open() && !first_error) {
        csv << sweep_row_csv(result.rows[t]);
        csv.flush();
      }
    }
    for (auto& w : pool) w.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  if (!sidecar_path.empty()) {
    std::ofstream side(sidecar_path, std::ios::trunc);
    if (!side) throw std::runtime_error("cannot open " + sidecar_path);
    side << result.sidecar.dump(2) << "\n";
  }
  return result;
}

json sweep_row_json(const SweepRow& r) {
  json j;
  j["config_hash"] = r.config_hash;
  j["algorithm"] = r.algorithm;
  j["grid_index"] = r.grid_index;
  j["epsilon"] = r.epsilon;
  j["delta"] = r.delta;
  j["p"] = r.p;
  j["h"] = r.h;
  j["n"] = r.n;
  j["d"] = r.d;
  j["seed"] = r.seed;
  j["labels_used"] = r.labels_used;
  j["extra_labels"] = r.extra_labels;
  j["terminal_iteration"] = r.terminal_iteration;
  j["trigger_fired"] = r.trigger_fired;
  j["trigger_iteration"] = r.trigger_iteration;
  j["diameter"] = r.diameter;
  j["alpha"] = r.alpha;
  j["abstain_mass"] = r.abstain_mass;
  j["error_mass"] = r.error_mass;
  j["excess_chow"] = r.excess_chow;
  j["excess_r0"] = r.excess_r0;
  j["abstain_highmargin_mass"] = r.abstain_highmargin_mass;
  j["reached"] = r.reached;
  j["wall_time_ms"] = r.wall_time_ms;
  return j;
}

json run_single(const ExperimentConfig& cfg) {
  if (cfg.seeds.size() != 1)
    throw ConfigError("single run needs exactly one seed", {"seed"});
  if (cfg.epsilon_grid.size() != 1)
    throw ConfigError("single run needs exactly one grid point", {"epsilon"});
  RunContext ctx{cfg, instance_from_json(cfg.raw), 0, {}, 1, 0.0};
  ctx.instance_hash = config_hash64(instance_part(cfg.raw));
  ctx.config_hash = config_hash_hex(cfg.raw);
  ctx.d = std::max(1, vc_dimension(*ctx.inst.cls));
  ctx.best_risk = exact_best_in_class(*ctx.inst.cls, *ctx.inst.dist).second;

  json transcript;
  SweepRow row = execute_run(ctx, 0, cfg.seeds[0], &transcript);
  json out;
  out["row"] = sweep_row_json(row);
  out["transcript"] = transcript;
  out["best_in_class_risk"] = ctx.best_risk;
  out["library_version"] = kLibraryVersion;
  return out;
}

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

std::vector<CurveRow> label_complexity_curve(const ExperimentConfig& cfg) {
  if (static_cast<int>(cfg.seeds.size()) < cfg.min_curve_seeds)
    throw ConfigError("curve needs at least " + std::to_string(cfg.min_curve_seeds) +
                          " seeds per grid point",
                      {"seeds"});
  if (cfg.epsilon_grid.empty() || std::isnan(cfg.epsilon_grid[0]))
    throw ConfigError("curve needs an epsilon grid", {"epsilon"});

  std::vector<CurveRow> rows;
  for (const char* algo : {"active_abstain", "passive"}) {
    json sub = cfg.raw;
    sub["algorithm"] = algo;
    if (std::string(algo) == "passive") {
      sub.erase("p");
      sub.erase("n");
      sub["passive_mode"] = "labels_to_target";
    }
    ExperimentConfig sub_cfg = ExperimentConfig::parse(sub);
    SweepResult sweep = run_experiment(sub_cfg);
    for (size_t g = 0; g < sub_cfg.epsilon_grid.size(); ++g) {
      std::vector<double> labels;
      for (const auto& r : sweep.rows)
        if (r.grid_index == static_cast<int>(g)) {
          if (std::string(algo) == "passive" && !r.reached)
            throw std::runtime_error("passive baseline did not reach epsilon within the cap");
          labels.push_back(static_cast<double>(r.labels_used));
        }
      CurveRow row;
      row.algorithm = algo;
      row.epsilon = sub_cfg.epsilon_grid[g];
      row.runs = static_cast<int>(labels.size());
      row.labels_median = quantile(labels, 0.5);
      row.labels_q25 = quantile(labels, 0.25);
      row.labels_q75 = quantile(labels, 0.75);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::string out = "algorithm,epsilon,runs,labels_median,labels_q25,labels_q75\n";
  for (const auto& r : rows) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%d,%.17g,%.17g,%.17g\n", r.algorithm.c_str(), r.epsilon,
                  r.runs, r.labels_median, r.labels_q25, r.labels_q75);
    out += buf;
  }
  return out;
}

GuaranteeReport check_guarantee(const std::vector<SweepRow>& rows, const json& sidecar,
                                const std::string& guarantee) {
  const double tol = 1e-12;
  std::string want_algo;
  if (guarantee == "thm32_bound" || guarantee == "prop5")
    want_algo = "midpoint";
  else if (guarantee == "prop4" || guarantee == "thm31_ceiling")
    want_algo = "active_abstain";
  else if (guarantee == "thm41_excess")
    want_algo = "finite_diameter";
  else if (guarantee == "negativity_trigger")
    want_algo = "";  // midpoint or active rows both carry the trigger
  else
    throw ConfigError("unknown guarantee: " + guarantee, {"guarantee"});

  GuaranteeReport rep;
  rep.guarantee = guarantee;
  std::vector<const SweepRow*> selected;
  for (const auto& r : rows) {
    if (!want_algo.empty() && r.algorithm != want_algo) continue;
    if (guarantee == "negativity_trigger" && r.algorithm != "midpoint" &&
        r.algorithm != "active_abstain")
      continue;
    selected.push_back(&r);
  }
  if (selected.empty())
    throw ConfigError("guarantee " + guarantee + " has no matching rows (wrong algorithm?)",
                      {"guarantee"});

  ComplexityProfile prof;
  if (sidecar.contains("complexity_profile"))
    prof = profile_from_json(sidecar.at("complexity_profile"));
  double margin_h = sidecar.value("massart_margin", std::nan(""));

  if (guarantee == "prop4") {
    if (!(margin_h > 0.0))
      throw ConfigError("prop4 needs a positive Massart margin in the sidecar", {"sidecar"});
    for (const auto* r : selected)
      if (!(r->p <= margin_h / 4.0 + tol))
        throw ConfigError("prop4 requires p <= h/4", {"p"});
  }

  int passed = 0;
  for (const auto* r : selected) {
    bool pass = true;
    bool counted = true;
    json detail;
    detail["seed"] = r->seed;
    detail["grid_index"] = r->grid_index;
    if (guarantee == "thm32_bound") {
      double rhs = 8.0 * r->alpha * r->alpha + 12.0 * r->alpha * r->diameter -
                   (r->p / 4.0) * r->diameter * r->diameter;
      pass = r->excess_chow <= rhs + tol;
      detail["excess_chow"] = r->excess_chow;
      detail["bound"] = rhs;
    } else if (guarantee == "negativity_trigger") {
      bool fired = r->algorithm == "midpoint"
                       ? r->diameter >= 49.0 * r->alpha / r->p - tol
                       : r->trigger_fired != 0;
      counted = fired;
      if (fired) {
        ++rep.fired_count;
        pass = r->excess_chow < 0.0;
      }
      detail["fired"] = fired;
      detail["excess_chow"] = r->excess_chow;
    } else if (guarantee == "prop4") {
      double abstain_bound = 4.0 * r->epsilon / margin_h;
      pass = r->abstain_mass <= abstain_bound + tol && r->excess_r0 <= 2.0 * r->epsilon + tol;
      detail["abstain_mass"] = r->abstain_mass;
      detail["abstain_bound"] = abstain_bound;
      detail["excess_r0"] = r->excess_r0;
    } else if (guarantee == "prop5") {
      double n = static_cast<double>(r->n);
      double bound = (592.0 / (n * r->p * r->p)) *
                     (3.0 * r->d * clamped_log(std::exp(1.0) * std::max(2.0 * n, double(r->d)) / r->d) +
                      clamped_log(56.0 / r->delta));
      pass = r->abstain_highmargin_mass <= bound + tol;
      detail["mass"] = r->abstain_highmargin_mass;
      detail["bound"] = bound;
    } else if (guarantee == "thm31_ceiling") {
      Schedule s = compute_schedule(r->epsilon, r->delta, r->p, r->d);
      RunTranscript t;
      t.terminal_iteration = r->terminal_iteration;
      t.total_label_requests = r->labels_used;
      t.extra_label_requests = r->extra_labels;
      CeilingReport ceiling = theorem31_label_ceiling(t, prof, s);
      if (!ceiling.checked)
        throw ConfigError("thm31_ceiling: theta not available for the schedule radii", {"sidecar"});
      pass = ceiling.within;
      detail["ledger"] = r->labels_used - r->extra_labels;
      detail["ceiling"] = ceiling.bound;
    } else {  // thm41_excess
      pass = r->excess_r0 <= r->epsilon + tol;
      detail["excess"] = r->excess_r0;
      detail["epsilon"] = r->epsilon;
    }
    if (counted) {
      ++rep.rows_considered;
      if (pass) ++passed;
      detail["pass"] = pass;
      rep.per_run.push_back(detail);
    }
  }
  rep.rows_passed = passed;
  rep.pass_fraction = rep.rows_considered > 0
                          ? static_cast<double>(passed) / rep.rows_considered
                          : 1.0;
  return rep;
}

}  // namespace abstain
