#ifndef EPR_LATTICE_H
#define EPR_LATTICE_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum ElatStatus {
  ELAT_STATUS_OK = 0,
  ELAT_STATUS_NULL_POINTER = 1,
  ELAT_STATUS_DOMAIN = 2,
  ELAT_STATUS_CONVERGENCE = 3,
  ELAT_STATUS_CONFIG = 4,
  ELAT_STATUS_NUMERICAL = 5,
  ELAT_STATUS_MEMORY = 6,
  ELAT_STATUS_IO = 7,
  ELAT_STATUS_BUFFER_TOO_SMALL = 8,
  ELAT_STATUS_PANIC = 9,
} ElatStatus;

typedef enum ElatBoundary {
  ELAT_BOUNDARY_OPEN = 0,
  ELAT_BOUNDARY_PERIODIC = 1,
} ElatBoundary;

// Two-atom spectrum.
typedef struct ElatSpectrum ElatSpectrum;

// Tight-binding model; energies in units of `recoil_energy` (J), lengths in
// units of `lattice_constant` (m).
typedef struct ElatModel {
  double recoil_energy;
  double lattice_depth;
  double hop;
  double vdd;
  size_t site_count;
  double lattice_constant;
  enum ElatBoundary boundary;
  bool hop_valid;
} ElatModel;

// Separation diagnostics of one snapshot; absent values are NaN.
typedef struct ElatSeparation {
  double time;
  double norm;
  double diagonal_weight;
  double pair_weight;
  double diatom_centroid;
  double single_centroid;
  double displacement_ratio;
} ElatSeparation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *elat_version(void);

// Length in bytes (without the terminating NUL) of the calling thread's last
// error message, 0 if the last call succeeded.
size_t elat_last_error_length(void);

// Copy the last error message into `buffer` (NUL-terminated, truncated to
// `capacity - 1` bytes). Returns the number of bytes written without the NUL.
//
// # Safety
// `buffer` must be null or point to `capacity` writable bytes.
size_t elat_last_error_message(char *buffer, size_t capacity);

// `E_rec = 2π²ħ²/(m λ²)` in joules.
//
// # Safety
// `out` must be null or a valid pointer to a `double`.
enum ElatStatus elat_recoil_energy(double mass_kg, double lambda_m, double *out);

// Hopping and width of the lowest band of a lattice of depth `lattice_depth` (E_rec).
//
// # Safety
// `hop` and `bandwidth` must be null or valid pointers to `double`s; null
// outputs are skipped.
enum ElatStatus elat_lattice_hopping(double lattice_depth, double *hop, double *bandwidth);

// Model derived from the built-in lithium parameters.
//
// # Safety
// `out` must be null or a valid pointer to an `ElatModel`.
enum ElatStatus elat_lithium_model(size_t site_count,
                                   enum ElatBoundary boundary,
                                   struct ElatModel *out);

// Model given directly in natural units, with lithium SI anchors.
//
// # Safety
// `out` must be null or a valid pointer to an `ElatModel`.
enum ElatStatus elat_model_new(double hop,
                               double vdd,
                               size_t site_count,
                               enum ElatBoundary boundary,
                               struct ElatModel *out);

// Diagonalize the two-atom Hamiltonian of `model` without external potential.
//
// # Safety
// `model` must point to a valid `ElatModel`; `out` must be a valid pointer
// to receive the handle, which is released with `elat_spectrum_free`.
enum ElatStatus elat_spectrum_new(const struct ElatModel *model, struct ElatSpectrum **out);

// Release a spectrum; null is ignored.
//
// # Safety
// `spectrum` must be null or a handle from `elat_spectrum_new` not yet freed.
void elat_spectrum_free(struct ElatSpectrum *spectrum);

// Number of computed eigenvalues and of states in the bound band.
//
// # Safety
// `spectrum` must be a live handle; outputs must be null or valid.
enum ElatStatus elat_spectrum_counts(const struct ElatSpectrum *spectrum,
                                     size_t *eigenvalues,
                                     size_t *bound_states);

// Copy the ascending eigenvalues (E_rec) into `buffer`.
//
// # Safety
// `spectrum` must be a live handle and `buffer` must hold `capacity` doubles.
enum ElatStatus elat_spectrum_eigenvalues(const struct ElatSpectrum *spectrum,
                                          double *buffer,
                                          size_t capacity);

// Evolve the trap product state of width `sigma_e` (sites) centred on
// `center` under the interaction plus a linear potential `slope` (E_rec per
// site), writing diagnostics at each of the `count` times (seconds).
//
// # Safety
// `model` must point to a valid `ElatModel`; `times_s` must hold `count`
// doubles and `out` room for `count` `ElatSeparation` records.
enum ElatStatus elat_separation_run(const struct ElatModel *model,
                                    double sigma_e,
                                    double center,
                                    double slope,
                                    const double *times_s,
                                    size_t count,
                                    struct ElatSeparation *out);

// Closed-form EPR parameter `(σ_E/(√2σ)) tanh[1/(π²σ_E² k_BT)]` with lengths
// in lattice constants and `kt` in E_rec.
//
// # Safety
// `out` must be null or a valid pointer to a `double`.
enum ElatStatus elat_s_estimate(double sigma_e, double sigma, double kt, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EPR_LATTICE_H */
