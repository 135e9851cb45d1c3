#ifndef SLICETRUST_H
#define SLICETRUST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of resolving one goal.
 */
typedef enum {
  ST_OUTCOME_SATISFIED = 0,
  ST_OUTCOME_NO_DERIVATION = 1,
  ST_OUTCOME_CYCLE = 2,
  ST_OUTCOME_BUDGET = 3,
  ST_OUTCOME_PREREQ = 4,
} StOutcome;

/**
 * Result code of every fallible call.
 */
typedef enum {
  ST_STATUS_OK = 0,
  ST_STATUS_NULL_ARGUMENT = 1,
  ST_STATUS_INVALID_UTF8 = 2,
  ST_STATUS_PARSE = 3,
  ST_STATUS_VALIDATION = 4,
  ST_STATUS_SIGNATURE = 5,
  ST_STATUS_KEY = 6,
  ST_STATUS_RESOLUTION = 7,
  ST_STATUS_PANIC = 99,
} StStatus;

/**
 * Trust status, ordered trusted < uncertain < untrusted.
 */
typedef enum {
  ST_TRUST_TRUSTED = 0,
  ST_TRUST_UNCERTAIN = 1,
  ST_TRUST_UNTRUSTED = 2,
} StTrust;

/**
 * Opaque property certificate handle.
 */
typedef struct StCertificate StCertificate;

/**
 * Opaque fact base handle.
 */
typedef struct StFactBase StFactBase;

/**
 * Opaque rule base handle.
 */
typedef struct StRuleBase StRuleBase;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *st_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void st_string_free(char *s);

/**
 * Library version as a static string.
 */
const char *st_version(void);

/**
 * An empty rule base for `realm`.
 *
 * # Safety
 * `realm` must be a valid C string; `out` must be writable.
 */
StStatus st_rulebase_new(const char *realm, StRuleBase **out);

/**
 * Parses and validates a rule file.
 *
 * # Safety
 * `realm` and `rules` must be valid C strings; `out` must be writable.
 */
StStatus st_rulebase_parse(const char *realm, const char *rules, StRuleBase **out);

/**
 * Parses, validates and appends one rule.
 *
 * # Safety
 * `rb` must be a live handle; `rule` a valid C string.
 */
StStatus st_rulebase_add(StRuleBase *rb, const char *rule);

/**
 * Number of rules; 0 for null.
 *
 * # Safety
 * `rb` must be null or a live handle.
 */
size_t st_rulebase_len(const StRuleBase *rb);

/**
 * Canonical text of the rule base.
 *
 * # Safety
 * `rb` must be a live handle; `out` must be writable.
 */
StStatus st_rulebase_to_text(const StRuleBase *rb, char **out);

/**
 * # Safety
 * `rb` must be null or a handle not yet freed.
 */
void st_rulebase_free(StRuleBase *rb);

/**
 * An empty fact base.
 */
StFactBase *st_factbase_new(void);

/**
 * Asserts a ground literal such as `SatC(vm1, no_malware)`.
 *
 * # Safety
 * `fb` must be a live handle; `fact` a valid C string.
 */
StStatus st_factbase_assert(StFactBase *fb, const char *fact);

/**
 * Whether the ground literal is present. Parse failures report `false`
 * and set the last error.
 *
 * # Safety
 * `fb` must be a live handle; `fact` a valid C string.
 */
bool st_factbase_contains(const StFactBase *fb, const char *fact);

/**
 * Number of facts; 0 for null.
 *
 * # Safety
 * `fb` must be null or a live handle.
 */
size_t st_factbase_len(const StFactBase *fb);

/**
 * Closes `facts` under `rules` into a new fact base.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
StStatus st_forward_close(const StFactBase *facts, const StRuleBase *rules, StFactBase **out);

/**
 * # Safety
 * `fb` must be null or a handle not yet freed.
 */
void st_factbase_free(StFactBase *fb);

/**
 * Resolves one goal by backward chaining. A zero limit selects the
 * default (depth 64, 100000 steps). `trace` may be null; otherwise it
 * receives the derivation trace as text.
 *
 * # Safety
 * Handles must be live; `goal` a valid C string; `outcome` writable.
 */
StStatus st_resolve(const StFactBase *facts,
                    const StRuleBase *rules,
                    const char *goal,
                    uint32_t max_depth,
                    uint32_t max_steps,
                    StOutcome *outcome,
                    char **trace);

/**
 * Parses a property certificate document.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
StStatus st_certificate_parse(const uint8_t *data, size_t len, StCertificate **out);

/**
 * Serialises the certificate in its canonical document form.
 *
 * # Safety
 * `cert` must be a live handle; `out` must be writable.
 */
StStatus st_certificate_to_xml(const StCertificate *cert, char **out);

/**
 * Certificate id.
 *
 * # Safety
 * `cert` must be a live handle; `out` must be writable.
 */
StStatus st_certificate_id(const StCertificate *cert, char **out);

/**
 * Re-signs the certificate with the key derived from `seed`.
 *
 * # Safety
 * `cert` must be a live handle.
 */
StStatus st_certificate_sign_with_seed(StCertificate *cert, uint64_t seed);

/**
 * PEM public key for the signing key derived from `seed`.
 *
 * # Safety
 * `out` must be writable.
 */
StStatus st_public_key_from_seed(uint64_t seed, char **out);

/**
 * Checks the certificate signature against a PEM public key. A bad
 * signature is not an error: `valid` is set to false.
 *
 * # Safety
 * `cert` must be a live handle; `public_key_pem` a valid C string; `valid`
 * writable.
 */
StStatus st_certificate_verify(const StCertificate *cert, const char *public_key_pem, bool *valid);

/**
 * # Safety
 * `cert` must be null or a handle not yet freed.
 */
void st_certificate_free(StCertificate *cert);

/**
 * Least upper bound of `n` statuses; trusted when `n` is 0.
 *
 * # Safety
 * `statuses` must point to `n` readable values, or be null with `n == 0`.
 */
StTrust st_trust_aggregate(const StTrust *statuses, size_t n);

/**
 * `(with_trust - base) / base`.
 */
double st_overhead_ratio(double base, double with_trust);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLICETRUST_H */
