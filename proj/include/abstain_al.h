/* abstain_al.h - C interface to the abstention active-learning library.
 *
 * All functions return aal_status; AAL_OK means success.  Out-parameters are
 * written only on success.  Strings returned through char** are heap-allocated
 * and must be released with aal_string_free.  Handles are opaque and freed
 * with their destroy function.  aal_last_error() returns a thread-local
 * message describing the most recent failure on the calling thread.
 */
#ifndef ABSTAIN_AL_H
#define ABSTAIN_AL_H

#include <stdint.h>

#if defined(_WIN32)
#define AAL_API __declspec(dllexport)
#else
#define AAL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aal_status {
  AAL_OK = 0,
  AAL_ERR_INVALID_ARGUMENT = 1,
  AAL_ERR_PARSE = 2,
  AAL_ERR_CAP_EXCEEDED = 3,
  AAL_ERR_IO = 4,
  AAL_ERR_INTERNAL = 5
} aal_status;

typedef struct aal_class aal_class;
typedef struct aal_dist aal_dist;

AAL_API const char* aal_version(void);
AAL_API const char* aal_last_error(void);
AAL_API void aal_string_free(char* s);

/* hypothesis class handle from a JSON description:
 * {"kind":"threshold","grid":M} | {"kind":"explicit","table":[[...],...]} |
 * {"kind":"random","m":M,"count":K,"seed":S} */
AAL_API aal_status aal_class_create(const char* json, aal_class** out);
AAL_API void aal_class_destroy(aal_class* cls);
AAL_API int32_t aal_class_count(const aal_class* cls);
AAL_API int32_t aal_class_points(const aal_class* cls);
AAL_API aal_status aal_class_vc_dimension(const aal_class* cls, int32_t* out);

/* labeled distribution handle from a JSON description:
 * {"px":[...],"eta":[...]} or a generator form such as
 * {"kind":"massart_threshold","grid":M,"h":H,"crossing":C} */
AAL_API aal_status aal_dist_create(const char* json, aal_dist** out);
AAL_API void aal_dist_destroy(aal_dist* dist);
AAL_API int32_t aal_dist_points(const aal_dist* dist);
AAL_API double aal_dist_massart_margin(const aal_dist* dist);

/* one seeded run from a config with a single seed; returns a transcript JSON
 * with the returned classifier, per-iteration records and the label ledger */
AAL_API aal_status aal_run(const char* config_json, char** transcript_json);

/* full sweep; CSV rows go to csv_path (with a sidecar JSON when sidecar_path
 * is non-null) and a summary JSON is returned */
AAL_API aal_status aal_sweep(const char* config_json, const char* csv_path,
                             const char* sidecar_path, char** summary_json);

/* label-complexity curve (active against the passive baseline); returns CSV */
AAL_API aal_status aal_curve(const char* config_json, char** curve_csv);

/* evaluate one guarantee over a finished sweep; threshold < 0 selects the
 * default 1 - delta; returns a report JSON with pass_fraction and per-run rows */
AAL_API aal_status aal_check(const char* guarantee, const char* csv_path, const char* sidecar_path,
                             double threshold, char** report_json);

/* complexity profile (VC dimension, star number, diameter, theta curve);
 * radii_json is an optional JSON array of radii for the theta curve */
AAL_API aal_status aal_profile(const char* class_json, const char* dist_json, const char* radii_json,
                               char** profile_json);

/* Monte Carlo verification of the uniform deviation bounds; config:
 * {"class":…, "distribution":…, "n":…, "delta":…, "trials":…, "p":…, "seed":…, "threads":…}
 * returns a report JSON including one CSV row per trial */
AAL_API aal_status aal_verify_lemmas(const char* config_json, char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* ABSTAIN_AL_H */
