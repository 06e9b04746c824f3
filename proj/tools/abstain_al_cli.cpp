// abstain-al: benchmark harness CLI over the shared-library C API.
//
// Verbs: run, curve, check, profile, verify-lemmas.  Flags mirror the JSON
// config schema; when both a config file and a flag provide a field, the file
// wins.  Exit code 0 means success (and, for check, that every requested
// guarantee met its pass-fraction threshold).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "abstain_al.h"

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
}

struct ConfigFlags {
  std::string algorithm;
  std::optional<double> epsilon, delta, p, h;
  std::optional<long long> n, seed, seed_count, threads;
  std::vector<double> epsilon_grid;

  void attach(CLI::App* cmd) {
    cmd->add_option("--algorithm", algorithm, "midpoint|active_abstain|finite_diameter|passive");
    cmd->add_option("--epsilon", epsilon, "target excess risk");
    cmd->add_option("--epsilon-grid", epsilon_grid, "epsilon grid");
    cmd->add_option("--delta", delta, "confidence parameter");
    cmd->add_option("--p", p, "abstention margin");
    cmd->add_option("--margin", h, "known Massart margin h (finite_diameter)");
    cmd->add_option("--n", n, "labeled sample size (midpoint / fixed passive)");
    cmd->add_option("--seed", seed, "single seed");
    cmd->add_option("--seed-count", seed_count, "number of consecutive seeds starting at --seed");
    cmd->add_option("--threads", threads, "worker threads (default: ABSTAIN_AL_THREADS or hardware)");
  }

  // file-based config takes precedence: flags only fill absent fields
  json merge(json cfg) const {
    auto put = [&](const char* key, const json& v) {
      if (!cfg.contains(key)) cfg[key] = v;
    };
    if (!algorithm.empty()) put("algorithm", algorithm);
    if (!epsilon_grid.empty()) put("epsilon_grid", epsilon_grid);
    if (epsilon) put("epsilon", *epsilon);
    if (delta) put("delta", *delta);
    if (p) put("p", *p);
    if (h) put("h", *h);
    if (n) put("n", *n);
    if (threads) put("threads", *threads);
    if (seed && !cfg.contains("seed") && !cfg.contains("seeds")) {
      if (seed_count)
        cfg["seeds"] = {{"start", *seed}, {"count", *seed_count}};
      else
        cfg["seed"] = *seed;
    }
    return cfg;
  }
};

int fail(aal_status status) {
  std::cerr << "error (" << status << "): " << aal_last_error() << "\n";
  return 1;
}

struct Managed {
  char* s = nullptr;
  ~Managed() { aal_string_free(s); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pool-based active classification with abstention: benchmark harness"};
  app.require_subcommand(1);

  std::string config_path, out_path, sidecar_path, sweep_path;
  std::string class_path, dist_path, radii;
  std::vector<std::string> guarantees;
  double threshold = -1.0;
  ConfigFlags flags;

  auto* run = app.add_subcommand("run", "execute a seeded sweep and write CSV rows");
  run->add_option("--config", config_path, "experiment config JSON file");
  run->add_option("--out", out_path, "output CSV path")->required();
  run->add_option("--sidecar", sidecar_path, "sidecar JSON path (default: <out>.meta.json)");
  flags.attach(run);

  auto* curve = app.add_subcommand("curve", "label-complexity curve: active vs passive baseline");
  curve->add_option("--config", config_path, "experiment config JSON file")->required();
  curve->add_option("--out", out_path, "output CSV path");

  auto* check = app.add_subcommand("check", "evaluate probabilistic guarantees over a sweep");
  check->add_option("--guarantee", guarantees,
                    "thm32_bound|negativity_trigger|prop4|prop5|thm31_ceiling|thm41_excess")
      ->required();
  check->add_option("--sweep", sweep_path, "sweep CSV path")->required();
  check->add_option("--sidecar", sidecar_path, "sidecar JSON path (default: <sweep>.meta.json)");
  check->add_option("--threshold", threshold, "pass-fraction threshold (default: 1 - delta)");
  check->add_option("--out", out_path, "write the combined report JSON here");

  auto* profile = app.add_subcommand("profile", "complexity diagnostics of an instance");
  profile->add_option("--class", class_path, "class JSON file")->required();
  profile->add_option("--dist", dist_path, "distribution JSON file")->required();
  profile->add_option("--radii", radii, "JSON array of radii for the theta curve");
  profile->add_option("--out", out_path, "output JSON path");

  auto* verify = app.add_subcommand("verify-lemmas", "Monte Carlo deviation-bound verification");
  verify->add_option("--config", config_path, "verification config JSON file")->required();
  verify->add_option("--out", out_path, "write per-trial CSV here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      json cfg = config_path.empty() ? json::object() : json::parse(read_file(config_path));
      cfg = flags.merge(std::move(cfg));
      std::string side = sidecar_path.empty() ? out_path + ".meta.json" : sidecar_path;
      Managed summary;
      aal_status st = aal_sweep(cfg.dump().c_str(), out_path.c_str(), side.c_str(), &summary.s);
      if (st != AAL_OK) return fail(st);
      std::cout << summary.s << "\n";
      return 0;
    }
    if (curve->parsed()) {
      json cfg = json::parse(read_file(config_path));
      Managed csv;
      aal_status st = aal_curve(cfg.dump().c_str(), &csv.s);
      if (st != AAL_OK) return fail(st);
      if (!out_path.empty())
        write_file(out_path, csv.s);
      else
        std::cout << csv.s;
      return 0;
    }
    if (check->parsed()) {
      std::string side = sidecar_path.empty() ? sweep_path + ".meta.json" : sidecar_path;
      json combined = json::array();
      bool all_met = true;
      for (const auto& g : guarantees) {
        Managed report;
        aal_status st = aal_check(g.c_str(), sweep_path.c_str(), side.c_str(), threshold, &report.s);
        if (st != AAL_OK) return fail(st);
        json rep = json::parse(report.s);
        all_met = all_met && rep.at("meets_threshold").get<bool>();
        std::printf("%-18s rows=%-5d pass_fraction=%.4f threshold=%.4f %s\n", g.c_str(),
                    rep.at("rows_considered").get<int>(), rep.at("pass_fraction").get<double>(),
                    rep.at("threshold").get<double>(),
                    rep.at("meets_threshold").get<bool>() ? "MET" : "NOT MET");
        combined.push_back(std::move(rep));
      }
      if (!out_path.empty()) write_file(out_path, combined.dump(2) + "\n");
      return all_met ? 0 : 2;
    }
    if (profile->parsed()) {
      Managed prof;
      aal_status st = aal_profile(read_file(class_path).c_str(), read_file(dist_path).c_str(),
                                  radii.empty() ? nullptr : radii.c_str(), &prof.s);
      if (st != AAL_OK) return fail(st);
      if (!out_path.empty())
        write_file(out_path, std::string(prof.s) + "\n");
      else
        std::cout << prof.s << "\n";
      return 0;
    }
    if (verify->parsed()) {
      Managed report;
      aal_status st = aal_verify_lemmas(read_file(config_path).c_str(), &report.s);
      if (st != AAL_OK) return fail(st);
      json rep = json::parse(report.s);
      std::printf("trials=%d pass_risk_gap=%.4f pass_l1=%.4f pass_chow=%.4f\n",
                  rep.at("trials").get<int>(), rep.at("pass_fraction_risk_gap").get<double>(),
                  rep.at("pass_fraction_l1").get<double>(),
                  rep.at("pass_fraction_chow").get<double>());
      if (!out_path.empty()) write_file(out_path, rep.at("trial_csv").get<std::string>());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
