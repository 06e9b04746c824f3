#include "abstain_al.h"

#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "abstain/harness.hpp"

using nlohmann::json;

struct aal_class {
  std::shared_ptr<const abstain::HypothesisClass> cls;
};

struct aal_dist {
  std::shared_ptr<const abstain::LabeledDistribution> dist;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

aal_status fail(aal_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

// maps C++ exceptions onto status codes; bad JSON is a parse error, config and
// precondition failures are invalid arguments, enumeration caps are their own code
template <typename Fn>
aal_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    return fail(AAL_ERR_PARSE, e.what());
  } catch (const abstain::ConfigError& e) {
    return fail(AAL_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(AAL_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::runtime_error& e) {
    std::string what = e.what();
    if (what.find("too large to enumerate") != std::string::npos ||
        what.find("work cap") != std::string::npos)
      return fail(AAL_ERR_CAP_EXCEEDED, what);
    if (what.find("cannot open") != std::string::npos) return fail(AAL_ERR_IO, what);
    return fail(AAL_ERR_INTERNAL, what);
  } catch (const std::exception& e) {
    return fail(AAL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(AAL_ERR_INTERNAL, "unknown error");
  }
}

aal_status require(bool ok, const char* what) {
  return ok ? AAL_OK : fail(AAL_ERR_INVALID_ARGUMENT, what);
}

std::string read_file(const char* path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(std::string("cannot open ") + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

extern "C" {

const char* aal_version(void) { return abstain::kLibraryVersion; }

const char* aal_last_error(void) { return g_last_error.c_str(); }

void aal_string_free(char* s) { std::free(s); }

aal_status aal_class_create(const char* text, aal_class** out) {
  if (require(text && out, "null argument") != AAL_OK) return AAL_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    auto cls = std::make_shared<const abstain::HypothesisClass>(
        abstain::class_from_json(json::parse(text)));
    *out = new aal_class{std::move(cls)};
    return AAL_OK;
  });
}

void aal_class_destroy(aal_class* cls) { delete cls; }

int32_t aal_class_count(const aal_class* cls) { return cls ? cls->cls->size() : -1; }

int32_t aal_class_points(const aal_class* cls) { return cls ? cls->cls->points() : -1; }

aal_status aal_class_vc_dimension(const aal_class* cls, int32_t* out) {
  if (require(cls && out, "null argument") != AAL_OK) return AAL_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    *out = abstain::vc_dimension(*cls->cls);
    return AAL_OK;
  });
}

aal_status aal_dist_create(const char* text, aal_dist** out) {
  if (require(text && out, "null argument") != AAL_OK) return AAL_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    auto dist = std::make_shared<const abstain::LabeledDistribution>(
        abstain::distribution_from_json(json::parse(text)));
    *out = new aal_dist{std::move(dist)};
    return AAL_OK;
  });
}

void aal_dist_destroy(aal_dist* dist) { delete dist; }

int32_t aal_dist_points(const aal_dist* dist) { return dist ? dist->dist->points() : -1; }

double aal_dist_massart_margin(const aal_dist* dist) {
  return dist ? dist->dist->massart_margin() : -1.0;
}

aal_status aal_run(const char* config_json, char** transcript_json) {
  if (require(config_json && transcript_json, "null argument") != AAL_OK)
    return AAL_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    auto cfg = abstain::ExperimentConfig::parse(json::parse(config_json));
    *transcript_json = dup_string(abstain::run_single(cfg).dump(2));
    return *transcript_json ? AAL_OK : fail(AAL_ERR_INTERNAL, "out of memory");
  });
}

aal_status aal_sweep(const char* config_json, const char* csv_path, const char* sidecar_path,
                     char** summary_json) {
  if (require(config_json && csv_path, "null argument") != AAL_OK) return AAL_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    auto cfg = abstain::ExperimentConfig::parse(json::parse(config_json));
    auto sweep = abstain::run_experiment(cfg, csv_path, sidecar_path ? sidecar_path : "");
    if (summary_json) {
      json summary;
      summary["config_hash"] = sweep.config_hash;
      summary["rows"] = sweep.rows.size();
      summary["csv"] = csv_path;
      *summary_json = dup_string(summary.dump(2));
      if (!*summary_json) return fail(AAL_ERR_INTERNAL, "out of memory");
    }
    return AAL_OK;
  });
}

aal_status aal_curve(const char* config_json, char** curve_out) {
  if (require(config_json && curve_out, "null argument") != AAL_OK) return AAL_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    auto cfg = abstain::ExperimentConfig::parse(json::parse(config_json));
    *curve_out = dup_string(abstain::curve_csv(abstain::label_complexity_curve(cfg)));
    return *curve_out ? AAL_OK : fail(AAL_ERR_INTERNAL, "out of memory");
  });
}

aal_status aal_check(const char* guarantee, const char* csv_path, const char* sidecar_path,
                     double threshold, char** report_json) {
  if (require(guarantee && csv_path && report_json, "null argument") != AAL_OK)
    return AAL_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    auto rows = abstain::parse_sweep_csv(read_file(csv_path));
    json sidecar = json::object();
    if (sidecar_path) sidecar = json::parse(read_file(sidecar_path));
    auto rep = abstain::check_guarantee(rows, sidecar, guarantee);
    double thr = threshold;
    if (thr < 0.0) {
      double delta = rows.empty() ? 0.05 : rows[0].delta;
      thr = 1.0 - delta;
    }
    json out;
    out["guarantee"] = rep.guarantee;
    out["rows_considered"] = rep.rows_considered;
    out["rows_passed"] = rep.rows_passed;
    out["pass_fraction"] = rep.pass_fraction;
    out["fired_count"] = rep.fired_count;
    out["threshold"] = thr;
    out["meets_threshold"] = rep.pass_fraction >= thr;
    out["per_run"] = rep.per_run;
    *report_json = dup_string(out.dump(2));
    return *report_json ? AAL_OK : fail(AAL_ERR_INTERNAL, "out of memory");
  });
}

aal_status aal_profile(const char* class_json, const char* dist_json, const char* radii_json,
                       char** profile_json) {
  if (require(class_json && dist_json && profile_json, "null argument") != AAL_OK)
    return AAL_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    auto cls = abstain::class_from_json(json::parse(class_json));
    auto dist = abstain::distribution_from_json(json::parse(dist_json));
    if (cls.points() != dist.points())
      return fail(AAL_ERR_INVALID_ARGUMENT, "class and distribution support sizes differ");
    std::vector<double> radii;
    if (radii_json) radii = json::parse(radii_json).get<std::vector<double>>();
    auto prof = abstain::make_complexity_profile(cls, dist, radii);
    json j;
    j["vc"] = prof.vc;
    j["star"] = prof.star ? json(*prof.star) : json(nullptr);
    j["diameter"] = prof.diameter ? json(*prof.diameter) : json(nullptr);
    json curve = json::array();
    for (const auto& [r, th] : prof.theta_curve) curve.push_back(json::array({r, th}));
    j["theta_curve"] = curve;
    *profile_json = dup_string(j.dump(2));
    return *profile_json ? AAL_OK : fail(AAL_ERR_INTERNAL, "out of memory");
  });
}

aal_status aal_verify_lemmas(const char* config_json, char** report_json) {
  if (require(config_json && report_json, "null argument") != AAL_OK)
    return AAL_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    json cfg = json::parse(config_json);
    auto cls = abstain::class_from_json(cfg.at("class"));
    auto dist = abstain::distribution_from_json(cfg.at("distribution"));
    if (cls.points() != dist.points())
      return fail(AAL_ERR_INVALID_ARGUMENT, "class and distribution support sizes differ");
    auto rep = abstain::verify_uniform_bounds(
        cls, dist, cfg.at("n").get<int64_t>(), cfg.at("delta").get<double>(),
        cfg.at("trials").get<int>(), cfg.value("p", 0.1), cfg.value("seed", uint64_t(0)),
        cfg.value("threads", 1));
    json j;
    j["trials"] = rep.trials;
    j["pass_fraction_risk_gap"] = rep.frac_risk_gap;
    j["pass_fraction_l1"] = rep.frac_l1;
    j["pass_fraction_chow"] = rep.frac_chow;
    j["trial_csv"] = rep.trial_csv;
    *report_json = dup_string(j.dump(2));
    return *report_json ? AAL_OK : fail(AAL_ERR_INTERNAL, "out of memory");
  });
}

}  // extern "C"
