#ifndef QUTRIT_H
#define QUTRIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QtStatus {
  QT_STATUS_OK = 0,
  QT_STATUS_NULL_POINTER = 1,
  QT_STATUS_INVALID_ARGUMENT = 2,
  QT_STATUS_NOT_UNITARY = 3,
  QT_STATUS_INVALID_DENSITY = 4,
  QT_STATUS_NUMERICAL = 5,
  QT_STATUS_PARSE = 6,
  QT_STATUS_OUT_OF_RANGE = 7,
  QT_STATUS_PANIC = 8,
} QtStatus;

typedef enum QtScheme {
  // Channels A, B, A.
  QT_SCHEME_SINGLE_TONE = 0,
  // Channels AB, B, A.
  QT_SCHEME_DUAL_TONE = 1,
} QtScheme;

typedef enum QtChannel {
  QT_CHANNEL_A = 0,
  QT_CHANNEL_B = 1,
  QT_CHANNEL_AB = 2,
} QtChannel;

typedef struct QtDensity QtDensity;

typedef struct QtSequence QtSequence;

typedef struct QtUnitary QtUnitary;

// One pulse: rotation angle and drive phase in radians.
typedef struct QtPulse {
  enum QtChannel channel;
  double angle;
  double phase;
} QtPulse;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *qt_last_error_message(void);

// Validates `entries` (18 doubles) as a unitary.
enum QtStatus qt_unitary_new(const double *entries, struct QtUnitary **out);

// Named gate: `identity`, `fourier`, `fourier-swap12`, `fourier-swap01`,
// `fourier-swap02`.
enum QtStatus qt_unitary_named(const char *name, struct QtUnitary **out);

enum QtStatus qt_unitary_entries(const struct QtUnitary *u, double *out);

void qt_unitary_free(struct QtUnitary *u);

// `min over theta of max |u - e^{i theta} v|` entrywise.
enum QtStatus qt_distance_mod_phase(const struct QtUnitary *u,
                                    const struct QtUnitary *v,
                                    double *out);

enum QtStatus qt_decompose(const struct QtUnitary *u,
                           enum QtScheme scheme,
                           struct QtSequence **out);

// Closed-form Fourier sequence for the given scheme.
enum QtStatus qt_sequence_fourier(enum QtScheme scheme, struct QtSequence **out);

enum QtStatus qt_sequence_len(const struct QtSequence *seq, size_t *out);

enum QtStatus qt_sequence_pulse(const struct QtSequence *seq, size_t index, struct QtPulse *out);

// Trailing virtual phase `(eta, epsilon)` and the global phase.
enum QtStatus qt_sequence_phases(const struct QtSequence *seq,
                                 double *eta,
                                 double *epsilon,
                                 double *global_phase);

enum QtStatus qt_sequence_unitary(const struct QtSequence *seq, struct QtUnitary **out);

// Text record of the sequence; release with [`qt_string_free`].
enum QtStatus qt_sequence_to_text(const struct QtSequence *seq, char **out);

enum QtStatus qt_sequence_from_text(const char *text, struct QtSequence **out);

void qt_sequence_free(struct QtSequence *seq);

void qt_string_free(char *s);

// `|psi><psi|` from 6 doubles (`re, im` per amplitude); `psi` is normalized.
enum QtStatus qt_density_pure(const double *psi, struct QtDensity **out);

// Validates `entries` (18 doubles) as a density matrix.
enum QtStatus qt_density_new(const double *entries, struct QtDensity **out);

enum QtStatus qt_density_entries(const struct QtDensity *rho, double *out);

void qt_density_free(struct QtDensity *rho);

enum QtStatus qt_purity(const struct QtDensity *rho, double *out);

// `<input| G^dagger rho G |input>`.
enum QtStatus qt_fidelity(const struct QtDensity *rho,
                          const struct QtUnitary *gate,
                          uint32_t input,
                          double *out);

// Read-out fractions for the six standard read-outs, 18 doubles ordered by
// read-out then level. `atoms == 0` gives exact probabilities; otherwise
// counts are sampled deterministically from `seed`.
enum QtStatus qt_simulate_fractions(const struct QtDensity *rho,
                                    uint64_t atoms,
                                    uint64_t seed,
                                    double *out);

// Maximum-likelihood reconstruction from 18 fractions (layout of
// [`qt_simulate_fractions`]). `max_iters == 0` keeps the default budget.
// `iterations` may be null.
enum QtStatus qt_mle_reconstruct(const double *fractions,
                                 uint32_t max_iters,
                                 struct QtDensity **out,
                                 uint32_t *iterations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUTRIT_H */
