#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "abstain/harness.hpp"

using namespace abstain;
using nlohmann::json;

namespace {

json massart_config() {
  return json{{"class", {{"kind", "threshold"}, {"grid", 32}}},
              {"distribution",
               {{"kind", "massart_threshold"}, {"grid", 32}, {"h", 0.4}, {"crossing", 16}}},
              {"algorithm", "active_abstain"},
              {"epsilon", 0.25},
              {"delta", 0.2},
              {"p", 0.25},
              {"seeds", {{"start", 0}, {"count", 3}}},
              {"threads", 2}};
}

std::string strip_wall_time(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    auto pos = line.rfind(',');
    out += line.substr(0, pos);
    out += '\n';
  }
  return out;
}

std::string csv_of(const SweepResult& sweep) {
  std::string out = sweep_csv_header();
  for (const auto& r : sweep.rows) out += sweep_row_csv(r);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("json factories and generator kinds") {
  auto thr = class_from_json(json{{"kind", "threshold"}, {"grid", 8}});
  CHECK(thr.size() == 9);
  auto expl = class_from_json(json{{"kind", "explicit"}, {"table", {{0, 1}, {1, 0}}}});
  CHECK(expl.size() == 2);
  auto rnd = class_from_json(json{{"kind", "random"}, {"m", 6}, {"count", 10}, {"seed", 7}});
  CHECK(rnd.size() == 10);
  CHECK_THROWS_AS(class_from_json(json{{"kind", "nope"}}), ConfigError);

  auto d1 = distribution_from_json(json{{"px", {0.5, 0.5}}, {"eta", {0.1, 0.9}}});
  CHECK(d1.points() == 2);
  auto d2 = distribution_from_json(
      json{{"kind", "massart_threshold"}, {"grid", 16}, {"h", 0.3}, {"crossing", 8}});
  CHECK(d2.massart_margin() == doctest::Approx(0.3));
  auto d3 = distribution_from_json(json{{"kind", "power_crossing"}, {"grid", 16}, {"power", 3.0}});
  CHECK(d3.points() == 16);
  auto d4 = distribution_from_json(json{{"kind", "heavy_noisy_point"},
                                        {"grid", 8},
                                        {"heavy_index", 2},
                                        {"heavy_mass", 0.5},
                                        {"eps", 0.02}});
  CHECK(d4.px(2) == doctest::Approx(0.5));
  CHECK_THROWS_AS(distribution_from_json(json{{"kind", "nope"}}), ConfigError);

  auto inst = instance_from_json(
      json{{"instance", {{"kind", "misspecified_pair"}, {"diff_points", 5}, {"clean_points", 5}}}});
  CHECK(inst.cls->size() == 2);
  CHECK(inst.dist->massart_margin() == 1.0);
}

TEST_CASE("config validation lists every offending field") {
  try {
    ExperimentConfig::parse(json{{"algorithm", "warp"}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    auto& f = e.fields();
    CHECK(std::find(f.begin(), f.end(), "algorithm") != f.end());
    CHECK(std::find(f.begin(), f.end(), "delta") != f.end());
    CHECK(std::find(f.begin(), f.end(), "seeds") != f.end());
    CHECK(std::find(f.begin(), f.end(), "class") != f.end());
  }
  // midpoint without n, with an out-of-range p
  try {
    json bad = massart_config();
    bad["algorithm"] = "midpoint";
    bad["p"] = 0.7;
    ExperimentConfig::parse(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    auto& f = e.fields();
    CHECK(std::find(f.begin(), f.end(), "n") != f.end());
    CHECK(std::find(f.begin(), f.end(), "p") != f.end());
  }
  CHECK_NOTHROW(ExperimentConfig::parse(massart_config()));
}

TEST_CASE("empty seed range produces a header-only CSV") {
  json cfg = massart_config();
  cfg["seeds"] = json::array();
  auto parsed = ExperimentConfig::parse(cfg);
  std::string path = "/tmp/abstain_empty_sweep.csv";
  auto sweep = run_experiment(parsed, path, path + ".meta.json");
  CHECK(sweep.rows.empty());
  CHECK(read_file(path) == sweep_csv_header());
  CHECK(json::parse(read_file(path + ".meta.json")).contains("complexity_profile"));
}

TEST_CASE("one grid point and one seed yield exactly one row") {
  json cfg = massart_config();
  cfg["seeds"] = {{"start", 5}, {"count", 1}};
  auto sweep = run_experiment(ExperimentConfig::parse(cfg));
  REQUIRE(sweep.rows.size() == 1);
  const auto& r = sweep.rows[0];
  CHECK(r.seed == 5);
  CHECK(r.algorithm == "active_abstain");
  CHECK(r.config_hash == sweep.config_hash);
  CHECK(r.labels_used > 0);
  CHECK(r.d == 1);
}

TEST_CASE("identical configs reproduce identical rows modulo wall time") {
  auto cfg = ExperimentConfig::parse(massart_config());
  auto a = run_experiment(cfg);
  auto b = run_experiment(cfg);
  CHECK(strip_wall_time(csv_of(a)) == strip_wall_time(csv_of(b)));
}

TEST_CASE("any single row reproduces from its grid value and seed") {
  json cfg = massart_config();
  cfg["epsilon_grid"] = {0.4, 0.25};
  cfg.erase("epsilon");
  auto sweep = run_experiment(ExperimentConfig::parse(cfg));
  REQUIRE(sweep.rows.size() == 6);
  // re-run one (epsilon, seed) cell in isolation
  json single = massart_config();
  single["epsilon"] = 0.25;
  single["seeds"] = {{"start", 2}, {"count", 1}};
  auto rerun = run_experiment(ExperimentConfig::parse(single));
  REQUIRE(rerun.rows.size() == 1);
  const SweepRow* original = nullptr;
  for (const auto& r : sweep.rows)
    if (r.epsilon == 0.25 && r.seed == 2) original = &r;
  REQUIRE(original != nullptr);
  CHECK(rerun.rows[0].labels_used == original->labels_used);
  CHECK(rerun.rows[0].excess_chow == original->excess_chow);
  CHECK(rerun.rows[0].diameter == original->diameter);
  CHECK(rerun.rows[0].terminal_iteration == original->terminal_iteration);
}

TEST_CASE("sweep CSV round-trips through the parser") {
  auto sweep = run_experiment(ExperimentConfig::parse(massart_config()));
  auto rows = parse_sweep_csv(csv_of(sweep));
  REQUIRE(rows.size() == sweep.rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].seed == sweep.rows[i].seed);
    CHECK(rows[i].labels_used == sweep.rows[i].labels_used);
    CHECK(rows[i].excess_chow == doctest::Approx(sweep.rows[i].excess_chow).epsilon(1e-15));
  }
}

TEST_CASE("midpoint rows against thm32 and prop5: loose bounds pass everywhere") {
  json cfg = massart_config();
  cfg["algorithm"] = "midpoint";
  cfg["n"] = 400;
  cfg["p"] = 0.1;
  cfg["seeds"] = {{"start", 0}, {"count", 8}};
  auto sweep = run_experiment(ExperimentConfig::parse(cfg));
  auto rep32 = check_guarantee(sweep.rows, sweep.sidecar, "thm32_bound");
  CHECK(rep32.rows_considered == 8);
  CHECK(rep32.pass_fraction == 1.0);  // vacuous bound at this n
  auto rep5 = check_guarantee(sweep.rows, sweep.sidecar, "prop5");
  CHECK(rep5.pass_fraction == 1.0);
  // wrong pairing: prop4 needs active rows
  CHECK_THROWS_AS(check_guarantee(sweep.rows, sweep.sidecar, "prop4"), ConfigError);
  CHECK_THROWS_AS(check_guarantee(sweep.rows, sweep.sidecar, "nonsense"), ConfigError);
}

TEST_CASE("active rows: prop4 and the label-count ceiling") {
  json cfg = massart_config();
  cfg["p"] = 0.1;  // p <= h/4 for prop4
  cfg["seeds"] = {{"start", 0}, {"count", 5}};
  auto sweep = run_experiment(ExperimentConfig::parse(cfg));
  auto rep4 = check_guarantee(sweep.rows, sweep.sidecar, "prop4");
  CHECK(rep4.rows_considered == 5);
  CHECK(rep4.pass_fraction >= 0.8);
  auto rep31 = check_guarantee(sweep.rows, sweep.sidecar, "thm31_ceiling");
  CHECK(rep31.rows_considered == 5);
  CHECK(rep31.pass_fraction == 1.0);  // astronomically loose at this scale
}

TEST_CASE("negativity trigger accounting on a pure-noise midpoint sweep") {
  // two rules disagreeing on the whole support under eta = 1/2: the bound is
  // never informative at this n, so no firings are recorded and none fail
  json cfg{{"class", {{"kind", "explicit"}, {"table", {{0, 1, 0, 1}, {1, 0, 1, 0}}}}},
           {"distribution", {{"px", {0.25, 0.25, 0.25, 0.25}}, {"eta", {0.5, 0.5, 0.5, 0.5}}}},
           {"algorithm", "midpoint"},
           {"n", 200},
           {"delta", 0.1},
           {"p", 0.25},
           {"seeds", {{"start", 0}, {"count", 6}}}};
  auto sweep = run_experiment(ExperimentConfig::parse(cfg));
  auto rep = check_guarantee(sweep.rows, sweep.sidecar, "negativity_trigger");
  CHECK(rep.fired_count == 0);
  CHECK(rep.pass_fraction == 1.0);
  // the mid-point still abstains on the noise and lands below the best rule
  for (const auto& r : sweep.rows) CHECK(r.excess_chow < 0.0);
}

TEST_CASE("check over a sweep equals the union of per-seed re-runs") {
  json cfg = massart_config();
  cfg["p"] = 0.1;
  auto whole = run_experiment(ExperimentConfig::parse(cfg));
  std::vector<SweepRow> stitched;
  for (uint64_t s = 0; s < 3; ++s) {
    json one = cfg;
    one["seeds"] = {{"start", s}, {"count", 1}};
    auto part = run_experiment(ExperimentConfig::parse(one));
    stitched.insert(stitched.end(), part.rows.begin(), part.rows.end());
  }
  auto a = check_guarantee(whole.rows, whole.sidecar, "prop4");
  auto b = check_guarantee(stitched, whole.sidecar, "prop4");
  CHECK(a.rows_considered == b.rows_considered);
  CHECK(a.pass_fraction == b.pass_fraction);
}

TEST_CASE("finite diameter rows and thm41") {
  json cfg{{"instance", {{"kind", "misspecified_pair"}, {"diff_points", 3}, {"clean_points", 5}}},
           {"algorithm", "finite_diameter"},
           {"epsilon", 0.3},
           {"delta", 0.15},
           {"h", 1.0},
           {"seeds", {{"start", 0}, {"count", 4}}}};
  auto sweep = run_experiment(ExperimentConfig::parse(cfg));
  REQUIRE(sweep.rows.size() == 4);
  for (const auto& r : sweep.rows) {
    CHECK(r.p == doctest::Approx(0.5));  // p = h/2
    CHECK(r.abstain_mass == 0.0);        // output is a {0,1} classifier
  }
  auto rep = check_guarantee(sweep.rows, sweep.sidecar, "thm41_excess");
  CHECK(rep.rows_considered == 4);
  CHECK(rep.pass_fraction == 1.0);
}

TEST_CASE("label complexity curve shapes") {
  json cfg{{"class", {{"kind", "threshold"}, {"grid", 16}}},
           {"distribution",
            {{"kind", "massart_threshold"}, {"grid", 16}, {"h", 1.0}, {"crossing", 8}}},
           {"algorithm", "active_abstain"},
           {"epsilon_grid", {0.3}},
           {"delta", 0.2},
           {"p", 0.25},
           {"min_seeds", 4},
           {"seeds", {{"start", 0}, {"count", 4}}}};
  auto rows = label_complexity_curve(ExperimentConfig::parse(cfg));
  REQUIRE(rows.size() == 2);  // one epsilon, two algorithms
  CHECK(rows[0].algorithm == "active_abstain");
  CHECK(rows[1].algorithm == "passive");
  CHECK(rows[0].runs == 4);
  CHECK(rows[1].labels_median >= 1.0);
  // curve with too few seeds is rejected
  json starved = cfg;
  starved["seeds"] = {{"start", 0}, {"count", 2}};
  CHECK_THROWS_AS(label_complexity_curve(ExperimentConfig::parse(starved)), ConfigError);

  // singleton class: the active curve is identically zero
  json flat = cfg;
  flat["class"] = {{"kind", "explicit"},
                   {"table", {{0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1}}}};
  auto flat_rows = label_complexity_curve(ExperimentConfig::parse(flat));
  CHECK(flat_rows[0].labels_median == 0.0);
  CHECK(flat_rows[0].labels_q75 == 0.0);
}

TEST_CASE("config hash is stable under key reordering") {
  json a = {{"x", 1}, {"y", 2}};
  json b = {{"y", 2}, {"x", 1}};
  CHECK(config_hash_hex(a) == config_hash_hex(b));
  CHECK(config_hash_hex(a) != config_hash_hex(json{{"x", 1}, {"y", 3}}));
}
