#ifndef PLANEWAVE_H
#define PLANEWAVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PwModel {
  PW_MODEL_PLANE_WAVE = 0,
  PW_MODEL_CLASSICAL = 1,
} PwModel;

typedef enum PwStatus {
  PW_STATUS_OK = 0,
  /*
   Invalid input, case or argument.
   */
  PW_STATUS_VALIDATION = 2,
  /*
   Non-convergence, blow-up or degenerate data.
   */
  PW_STATUS_NUMERICAL = 3,
  PW_STATUS_IO = 4,
  PW_STATUS_NULL_POINTER = 5,
  /*
   Internal panic caught at the boundary.
   */
  PW_STATUS_INTERNAL = 6,
} PwStatus;

typedef struct PwCase PwCase;

typedef struct PwModes PwModes;

typedef struct PwTrajectory PwTrajectory;

/*
 One identified mode. `omega` is non-negative; conjugate pairs appear once.
 */
typedef struct PwMode {
  double sigma;
  double omega;
  double amplitude;
  double phase;
  double energy;
  /*
   NaN for a zero eigenvalue.
   */
  double damping_ratio;
} PwMode;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the calling thread's last error message into `buf` with a
 terminating NUL, truncating to `len - 1` bytes. Returns the full message
 length without the NUL.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
uintptr_t pw_last_error_message(char *buf, uintptr_t len);

/*
 Loads an embedded benchmark (`"wscc9"` or `"ne39"`).

 # Safety
 `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PwStatus pw_case_load_benchmark(const char *name, struct PwCase **out);

/*
 Parses a TOML case file.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PwStatus pw_case_parse_file(const char *path, struct PwCase **out);

/*
 # Safety
 `case` must be null or a handle from this library, freed at most once.
 */
void pw_case_free(struct PwCase *case_);

/*
 # Safety
 `case` must be a live handle and `buses`, `generators` valid pointers.
 */
enum PwStatus pw_case_size(const struct PwCase *case_, uintptr_t *buses, uintptr_t *generators);

/*
 Sets every synchronous machine to inertia constant `h` seconds.

 # Safety
 `case` must be a live handle.
 */
enum PwStatus pw_case_set_inertia(struct PwCase *case_, double h);

/*
 Simulates the case with its own events. `horizon <= 0` uses the case horizon.

 # Safety
 `case` must be a live handle and `out` a valid pointer.
 */
enum PwStatus pw_simulate(const struct PwCase *case_,
                          enum PwModel model,
                          double horizon,
                          struct PwTrajectory **out);

/*
 # Safety
 `traj` must be null or a handle from this library, freed at most once.
 */
void pw_trajectory_free(struct PwTrajectory *traj);

/*
 # Safety
 `traj` must be a live handle and `samples`, `nodes` valid pointers.
 */
enum PwStatus pw_trajectory_size(const struct PwTrajectory *traj,
                                 uintptr_t *samples,
                                 uintptr_t *nodes);

/*
 Copies the sample times (s) into `buf`, which holds `len` doubles.

 # Safety
 `traj` must be a live handle and `buf` point to `len` doubles.
 */
enum PwStatus pw_trajectory_times(const struct PwTrajectory *traj, double *buf, uintptr_t len);

/*
 Copies the frequency deviation (rad/s) of `node` into `buf`.

 # Safety
 `traj` must be a live handle and `buf` point to `len` doubles.
 */
enum PwStatus pw_trajectory_omega(const struct PwTrajectory *traj,
                                  uintptr_t node,
                                  double *buf,
                                  uintptr_t len);

/*
 Copies the internal voltage magnitude (pu) of `node` into `buf`.

 # Safety
 `traj` must be a live handle and `buf` point to `len` doubles.
 */
enum PwStatus pw_trajectory_voltage(const struct PwTrajectory *traj,
                                    uintptr_t node,
                                    double *buf,
                                    uintptr_t len);

/*
 Center-of-inertia ROCOF in Hz/s after `event_time`.

 # Safety
 `traj` must be a live handle and `out` a valid pointer.
 */
enum PwStatus pw_measure_rocof(const struct PwTrajectory *traj,
                               double event_time,
                               double window,
                               double *out);

/*
 The reference momentum constant.

 # Safety
 `out` must be a valid pointer.
 */
enum PwStatus pw_reference_kappa(double *out);

/*
 Physical line momentum in kg m/s for `flow_pu` apparent power on
 `base_mva` over `length_m`.

 # Safety
 `out` must be a valid pointer.
 */
enum PwStatus pw_line_momentum(double flow_pu, double length_m, double base_mva, double *out);

/*
 Prony fit of `n` uniformly sampled values.

 # Safety
 `samples` must point to `n` doubles and `out` be a valid pointer.
 */
enum PwStatus pw_prony_fit(const double *samples,
                           uintptr_t n,
                           double dt,
                           uintptr_t order,
                           struct PwModes **out);

/*
 # Safety
 `modes` must be a live handle and `count` a valid pointer.
 */
enum PwStatus pw_modes_count(const struct PwModes *modes, uintptr_t *count);

/*
 # Safety
 `modes` must be a live handle and `out` a valid pointer.
 */
enum PwStatus pw_modes_get(const struct PwModes *modes, uintptr_t index, struct PwMode *out);

/*
 # Safety
 `modes` must be null or a handle from this library, freed at most once.
 */
void pw_modes_free(struct PwModes *modes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLANEWAVE_H */
