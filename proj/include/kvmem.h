#ifndef KVMEM_H
#define KVMEM_H

/* C interface of the kvmem solver library.
 *
 * All objects are opaque handles created and released by the library.
 * Every fallible call returns a kvm_status; on failure kvm_last_error()
 * describes the problem for the calling thread.  Strings returned through
 * char** out-parameters are owned by the caller and released with
 * kvm_string_free(). */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct kvm_config kvm_config;
typedef struct kvm_measurement kvm_measurement;
typedef struct kvm_result kvm_result;

typedef enum kvm_status {
    KVM_OK = 0,
    KVM_ERR_USAGE = 1,       /* invalid configuration or arguments */
    KVM_NOT_CONVERGED = 2,   /* fixed-point iteration or march did not finish */
    KVM_ASSUMPTION = 3,      /* a data assumption failed, see kvm_last_assumption() */
    KVM_ERR_IO = 4,
    KVM_ERR_NUMERICAL = 5,   /* time integration diverged or windows failed to glue */
    KVM_ERR_INTERNAL = 6
} kvm_status;

/* Receives one JSON object per fixed-point iteration. */
typedef void (*kvm_line_callback)(const char* json_line, void* user);

const char* kvm_version(void);
const char* kvm_status_string(kvm_status status);
/* Message of the last failure on this thread ("" if none). */
const char* kvm_last_error(void);
/* Name of the last failed assumption on this thread, e.g. "A3" ("" if none). */
const char* kvm_last_assumption(void);
void kvm_string_free(char* s);

kvm_status kvm_config_load(const char* path, kvm_config** out);
kvm_status kvm_config_parse(const char* json_text, const char* base_dir, kvm_config** out);
void kvm_config_free(kvm_config* cfg);
kvm_status kvm_config_set_output_dir(kvm_config* cfg, const char* dir);
/* Resolved output path of "measurement", "kernel", "diagnostics" or "trajectory". */
kvm_status kvm_config_output_path(const kvm_config* cfg, const char* which, char** out);

/* Reads t,r[,rp[,rpp]]; cfg (may be NULL) supplies the smoothing options. */
kvm_status kvm_measurement_load(const char* path, const kvm_config* cfg, kvm_measurement** out);
kvm_status kvm_measurement_save(const kvm_measurement* m, const char* path);
kvm_status kvm_measurement_samples(const kvm_measurement* m, size_t* count, double* dt);
void kvm_measurement_free(kvm_measurement* m);

/* Direct solve on [0,T]; returns the sampled measurement and a JSON summary.
 * Writes the trajectory when the configuration names one. */
kvm_status kvm_forward(const kvm_config* cfg, kvm_measurement** measurement, char** summary_json);

/* Assumption report; measurement may be NULL (compatibility is then skipped).
 * Returns KVM_ASSUMPTION when any check fails; the report is produced either way. */
kvm_status kvm_check(const kvm_config* cfg, const kvm_measurement* measurement, char** report_json);

/* Local reconstruction on [0,tau].  KVM_NOT_CONVERGED still yields a result. */
kvm_status kvm_invert(const kvm_config* cfg, const kvm_measurement* measurement, kvm_line_callback cb, void* user,
                      kvm_result** out);
/* Windowed reconstruction on [0,T]. */
kvm_status kvm_march(const kvm_config* cfg, const kvm_measurement* measurement, kvm_line_callback cb, void* user,
                     kvm_result** out);
/* Synthesizes data with the configured kernel, then inverts (T == tau) or
 * marches (T > tau) and reports the kernel error. */
kvm_status kvm_twin(const kvm_config* cfg, kvm_line_callback cb, void* user, kvm_result** out);

int kvm_result_converged(const kvm_result* r);
kvm_status kvm_result_kernel(const kvm_result* r, const double** samples, size_t* count, double* dt);
kvm_status kvm_result_diagnostics_json(const kvm_result* r, char** out);
kvm_status kvm_result_write_kernel_csv(const kvm_result* r, const char* path);
void kvm_result_free(kvm_result* r);

/* Runs the built-in invariant suites; *failures receives the number of violated checks. */
kvm_status kvm_selftest(char** report_json, int* failures);

#ifdef __cplusplus
}
#endif

#endif
