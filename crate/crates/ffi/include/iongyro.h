#ifndef IONGYRO_H
#define IONGYRO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IongyroStatus {
  IONGYRO_STATUS_OK = 0,
  IONGYRO_STATUS_NULL_POINTER = 1,
  IONGYRO_STATUS_INVALID_ARGUMENT = 2,
  IONGYRO_STATUS_UNSTABLE = 3,
  IONGYRO_STATUS_OUTSIDE_ROTATION_WINDOW = 4,
  // The handle still holds the best configuration found.
  IONGYRO_STATUS_NOT_CONVERGED = 5,
  IONGYRO_STATUS_NUMERICAL = 6,
  IONGYRO_STATUS_INDEX_OUT_OF_RANGE = 7,
  IONGYRO_STATUS_PANIC = 8,
} IongyroStatus;

typedef struct IongyroCrystal IongyroCrystal;

typedef struct IongyroTrajectory IongyroTrajectory;

// Species, trap and derived mode frequencies.
typedef struct IongyroTrap IongyroTrap;

// Angular frequencies, rad/s.
typedef struct IongyroModes {
  double omega_c;
  double omega_z;
  double omega_m;
  double omega_cap_m;
} IongyroModes;

typedef struct IongyroRelaxReport {
  bool converged;
  uint64_t iterations;
  double final_energy_j;
  double max_force_n;
} IongyroRelaxReport;

typedef struct IongyroBudgetInputs {
  uint64_t n_ions;
  // N
  double odf_force;
  // s
  double tau;
  // 1/s
  double gamma;
  // s
  double cycle_time;
  // m per rad/s
  double scale_factor;
} IongyroBudgetInputs;

typedef struct IongyroBudget {
  double theta_max;
  // m
  double delta_zc_single_shot;
  // m/√Hz
  double amplitude_asd;
  // rad/s/√Hz
  double rotation_asd;
  // rad/√h
  double arw;
} IongyroBudget;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes). Returns the full message length without the
// terminator, or 0 when no error is recorded.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t iongyro_last_error_message(char *buf, size_t len);

// Builds a trap for an ion of `mass_u` atomic mass units and charge
// `charge_e` elementary charges. Unstable traps are rejected.
//
// # Safety
// `out` must be a valid pointer.
enum IongyroStatus iongyro_trap_new(double mass_u,
                                    double charge_e,
                                    double b_field_t,
                                    double voltage_v,
                                    double z0_m,
                                    struct IongyroTrap **out);

// # Safety
// `trap` must be null or a handle from [`iongyro_trap_new`] not yet freed.
void iongyro_trap_free(struct IongyroTrap *trap);

// # Safety
// `trap` must be a live handle and `out` a valid pointer.
enum IongyroStatus iongyro_trap_modes(const struct IongyroTrap *trap, struct IongyroModes *out);

// Fixed-step RK4 trajectory. `state` is (x, y, z, vx, vy, vz) in SI units.
//
// # Safety
// `trap` must be a live handle, `state` valid for 6 reads and `out` a valid pointer.
enum IongyroStatus iongyro_trajectory_integrate(const struct IongyroTrap *trap,
                                                const double *state,
                                                double omega_x,
                                                uint32_t steps_per_period,
                                                double total_time_s,
                                                uint32_t sample_stride,
                                                struct IongyroTrajectory **out);

// # Safety
// `traj` must be a live handle and `out` a valid pointer.
enum IongyroStatus iongyro_trajectory_len(const struct IongyroTrajectory *traj, size_t *out);

// Sample `index`: time in `t_out`, (x, y, z, vx, vy, vz) in `state_out`.
//
// # Safety
// `traj` must be a live handle, `t_out` valid, `state_out` valid for 6 writes.
enum IongyroStatus iongyro_trajectory_sample(const struct IongyroTrajectory *traj,
                                             size_t index,
                                             double *t_out,
                                             double *state_out);

// # Safety
// `traj` must be null or a live handle.
void iongyro_trajectory_free(struct IongyroTrajectory *traj);

// Relaxes `n_ions` in the frame rotating at `omega_r` with wall strength
// `delta` and angle `theta`. On [`IongyroStatus::NotConverged`] the handle is
// still written and holds the best configuration found.
//
// # Safety
// `trap` must be a live handle and `out` a valid pointer.
enum IongyroStatus iongyro_crystal_relax(const struct IongyroTrap *trap,
                                         size_t n_ions,
                                         double omega_r,
                                         double delta,
                                         double theta,
                                         uint64_t seed,
                                         struct IongyroCrystal **out);

// # Safety
// `crystal` must be a live handle and `out` a valid pointer.
enum IongyroStatus iongyro_crystal_report(const struct IongyroCrystal *crystal,
                                          struct IongyroRelaxReport *out);

// # Safety
// `crystal` must be a live handle and `out` a valid pointer.
enum IongyroStatus iongyro_crystal_len(const struct IongyroCrystal *crystal, size_t *out);

// Writes positions as (x, y, z) triples, m. `len` counts doubles and must be
// at least three times the ion count.
//
// # Safety
// `crystal` must be a live handle and `buf` valid for `len` writes.
enum IongyroStatus iongyro_crystal_positions(const struct IongyroCrystal *crystal,
                                             double *buf,
                                             size_t len);

// # Safety
// `crystal` must be null or a live handle.
void iongyro_crystal_free(struct IongyroCrystal *crystal);

// Cold-fluid aspect ratio z_cl/r_cl for a shape parameter `beta` in (0, 1).
//
// # Safety
// `out` must be a valid pointer.
enum IongyroStatus iongyro_aspect_ratio(double beta, double *out);

// # Safety
// `inputs` and `out` must be valid pointers.
enum IongyroStatus iongyro_sensitivity_budget(const struct IongyroBudgetInputs *inputs,
                                              struct IongyroBudget *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IONGYRO_H */
