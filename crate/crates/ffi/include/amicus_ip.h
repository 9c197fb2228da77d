#ifndef AMICUS_IP_H
#define AMICUS_IP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AmipStatus {
  AMIP_STATUS_OK = 0,
  AMIP_STATUS_NULL_POINTER = 1,
  AMIP_STATUS_INVALID_ARGUMENT = 2,
  AMIP_STATUS_IO = 3,
  AMIP_STATUS_NUMERIC = 4,
  AMIP_STATUS_PANIC = 5,
} AmipStatus;

typedef enum AmipModelKind {
  AMIP_MODEL_KIND_UNIDIMENSIONAL = 0,
  AMIP_MODEL_KIND_ISSUES = 1,
  AMIP_MODEL_KIND_AMICI = 2,
  AMIP_MODEL_KIND_RANDOM_UTILITY = 3,
} AmipModelKind;

typedef enum AmipSide {
  AMIP_SIDE_PETITIONER = 0,
  AMIP_SIDE_RESPONDENT = 1,
} AmipSide;

typedef enum AmipKeep {
  AMIP_KEEP_ALL = 0,
  AMIP_KEEP_NONE = 1,
  AMIP_KEEP_PETITIONER_ONLY = 2,
  AMIP_KEEP_RESPONDENT_ONLY = 3,
} AmipKeep;

// Opaque corpus handle.
typedef struct AmipCorpus AmipCorpus;

// Opaque fitted-model handle.
typedef struct AmipFit AmipFit;

// Opaque topic-mixture handle.
typedef struct AmipMixtures AmipMixtures;

// Per-case parameters: popularity, polarity, and the two amicus polarities.
typedef struct AmipCaseParams {
  double a;
  double b;
  double c_p;
  double c_r;
} AmipCaseParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`) and returns the full message length.
// Passing a null `buf` only queries the length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t amip_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *amip_version(void);

// Loads a JSONL corpus.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum AmipStatus amip_corpus_load(const char *path, struct AmipCorpus **out);

// # Safety
// `corpus` must be null or a handle from [`amip_corpus_load`] not yet freed.
void amip_corpus_free(struct AmipCorpus *corpus);

// # Safety
// `corpus` must be a live handle or null (which yields 0).
size_t amip_corpus_num_cases(const struct AmipCorpus *corpus);

// # Safety
// `corpus` must be a live handle or null (which yields 0).
size_t amip_corpus_num_justices(const struct AmipCorpus *corpus);

// Loads topic mixtures written by `lda-infer`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum AmipStatus amip_mixtures_load(const char *path, struct AmipMixtures **out);

// # Safety
// `mixtures` must be null or a live handle.
void amip_mixtures_free(struct AmipMixtures *mixtures);

// Loads a fit written by the `fit` subcommand.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum AmipStatus amip_fit_load(const char *path, struct AmipFit **out);

// Writes a fit as JSON.
//
// # Safety
// `fit` must be a live handle; `path` a NUL-terminated string.
enum AmipStatus amip_fit_save(const struct AmipFit *fit, const char *path);

// Fits a model with default hyperparameters and sampler settings, except
// for the seed and the number of Gibbs iterations.
//
// # Safety
// Handles must be live; `out` must be writable.
enum AmipStatus amip_fit_run(const struct AmipCorpus *corpus,
                             const struct AmipMixtures *mixtures,
                             enum AmipModelKind kind,
                             size_t gibbs_iters,
                             uint64_t seed,
                             struct AmipFit **out);

// # Safety
// `fit` must be null or a live handle.
void amip_fit_free(struct AmipFit *fit);

// # Safety
// `fit` must be a live handle or null (which yields 0).
size_t amip_fit_num_justices(const struct AmipFit *fit);

// # Safety
// `fit` must be a live handle; `out` writable.
enum AmipStatus amip_fit_kind(const struct AmipFit *fit, enum AmipModelKind *out);

// Copies justice `justice`'s ideal point into `out` (length `len`, which
// must equal the fit's dimension).
//
// # Safety
// `fit` must be a live handle; `out` must hold `len` doubles.
enum AmipStatus amip_fit_ideal_point(const struct AmipFit *fit,
                                     size_t justice,
                                     double *out,
                                     size_t len);

// Vote logit for one justice. `psi` has length 1 for the unidimensional
// kind and `dim` otherwise; `delta_p`/`delta_r` may be null when that
// side filed no briefs.
//
// # Safety
// Non-null pointers must reference arrays of the stated lengths.
enum AmipStatus amip_vote_logit(const double *psi,
                                size_t psi_len,
                                const double *theta,
                                const double *delta_p,
                                const double *delta_r,
                                size_t dim,
                                struct AmipCaseParams kappa,
                                enum AmipModelKind kind,
                                double *out);

// Probability of `vote` given a logit.
double amip_vote_prob(double logit, enum AmipSide vote);

// Random-utility factor of a brief mixture. `psi_all` holds
// `num_justices` row-major ideal points of length `dim`.
//
// # Safety
// Pointers must reference arrays of the stated lengths.
enum AmipStatus amip_putil_factor(const double *psi_all,
                                  size_t num_justices,
                                  const double *theta,
                                  const double *delta,
                                  size_t dim,
                                  struct AmipCaseParams kappa,
                                  enum AmipSide side,
                                  double xi,
                                  double *out);

// Pairwise partition accuracy between two vote vectors over the same `n`
// justices.
//
// # Safety
// `pred` and `actual` must hold `n` entries.
enum AmipStatus amip_pairwise_accuracy(const enum AmipSide *pred,
                                       const enum AmipSide *actual,
                                       size_t n,
                                       double *out);

// Predicts the vote partition of a case over the fit's full roster.
// `partition` and `marginals` must each hold `n` entries, where `n` is the
// fit's number of justices; `marginals` may be null.
//
// # Safety
// Handles must be live; `case_id` NUL-terminated; arrays sized `n`.
enum AmipStatus amip_predict_case(const struct AmipFit *fit,
                                  const struct AmipMixtures *mixtures,
                                  const char *case_id,
                                  enum AmipKeep keep,
                                  size_t samples,
                                  uint64_t seed,
                                  enum AmipSide *partition,
                                  double *marginals,
                                  size_t n);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AMICUS_IP_H */
