/* gridkit shared-library interface.
 *
 * Opaque handles plus status codes; every pipeline consumes a UTF-8 JSON
 * parameter document and produces a JSON result document owned by the
 * library (release with gk_string_free). On any failure the functions
 * return a nonzero status and gk_last_error() carries a diagnostic for the
 * calling thread.
 */
#ifndef GRIDKIT_H
#define GRIDKIT_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gk_status {
  GK_OK = 0,
  GK_ERR_PARSE = 1,    /* malformed input document */
  GK_ERR_INVALID = 2,  /* semantic validation failed */
  GK_ERR_NUMERIC = 3,  /* solver could not produce a result */
  GK_ERR_ARGUMENT = 4  /* null pointer or bad handle */
} gk_status;

/* Parsed grid case (buses, branches, generators, loads). */
typedef struct gk_case gk_case;

const char* gk_version(void);
/* Message describing the most recent failure on this thread. */
const char* gk_last_error(void);
void gk_string_free(char* s);

gk_status gk_case_parse(const char* json_text, gk_case** out_case);
void gk_case_free(gk_case* c);
gk_status gk_case_summary(const gk_case* c, char** out_json);

/* Power flow */
gk_status gk_pf_dc(const gk_case* c, const char* params_json, char** out_json);
gk_status gk_pf_ac(const gk_case* c, const char* params_json, char** out_json);

/* State estimation, bad data, observability, attack construction */
gk_status gk_se_run(const gk_case* c, const char* params_json, char** out_json);
gk_status gk_se_baddata(const gk_case* c, const char* params_json,
                        char** out_json);
gk_status gk_se_observe(const gk_case* c, const char* params_json,
                        char** out_json);
gk_status gk_se_attack(const gk_case* c, const char* params_json,
                       char** out_json);

/* Line outage identification from pre/post-event angle profiles */
gk_status gk_outage_identify(const gk_case* c, const char* params_json,
                             char** out_json);

/* Waveform utilities */
gk_status gk_signal_phasor(const char* params_json, char** out_json);
gk_status gk_signal_modes(const char* params_json, char** out_json);

/* Optimization stack */
gk_status gk_ed(const char* params_json, char** out_json);
gk_status gk_opf(const gk_case* c, const char* params_json, char** out_json);
gk_status gk_uc(const char* params_json, char** out_json);
gk_status gk_dr(const char* params_json, char** out_json);
gk_status gk_pev(const char* params_json, char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* GRIDKIT_H */
