#ifndef SEQRULE_H
#define SEQRULE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Marks "no cell" wherever a cell index is passed or returned.
#define SEQRULE_NO_CELL SIZE_MAX



typedef enum SeqruleStatus {
  SEQRULE_STATUS_OK = 0,
  SEQRULE_STATUS_NULL_POINTER = 1,
  SEQRULE_STATUS_INVALID_ARGUMENT = 2,
  // A store or agent precondition was broken (unbound cell, taken
  // successor, cycle, out-of-range index).
  SEQRULE_STATUS_CONTRACT_VIOLATION = 3,
  SEQRULE_STATUS_MALFORMED_OBSERVATION = 4,
  SEQRULE_STATUS_IO = 5,
  SEQRULE_STATUS_PANIC = 6,
} SeqruleStatus;

typedef enum SeqruleOutcome {
  SEQRULE_OUTCOME_NEGATIVE = -1,
  SEQRULE_OUTCOME_ZERO = 0,
  SEQRULE_OUTCOME_POSITIVE = 1,
} SeqruleOutcome;

typedef enum SeqrulePolicy {
  SEQRULE_POLICY_LEARNED = 0,
  SEQRULE_POLICY_CUED = 1,
  SEQRULE_POLICY_DUMMY = 2,
} SeqrulePolicy;

typedef enum SeqruleAnswerVoters {
  SEQRULE_ANSWER_VOTERS_POSITIVE = 0,
  SEQRULE_ANSWER_VOTERS_NON_NEGATIVE = 1,
} SeqruleAnswerVoters;

typedef struct SeqruleAgent SeqruleAgent;

typedef struct SeqruleStore SeqruleStore;

// Channel 0..4 is CUE, A1, A2, ANS; value is 0 or 1.
typedef struct SeqruleToken {
  uint8_t channel;
  uint8_t value;
} SeqruleToken;

typedef struct SeqruleAgentParams {
  size_t cells;
  double decay;
  double delta;
  // A [`SeqrulePolicy`] value.
  uint32_t policy;
  // A [`SeqruleAnswerVoters`] value.
  uint32_t answer_voters;
  bool self_reinforce;
} SeqruleAgentParams;

typedef struct SeqruleTrialParams {
  struct SeqruleAgentParams agent;
  size_t episodes;
  uint64_t seed;
  size_t gap_steps;
} SeqruleTrialParams;

typedef struct SeqruleSpaceCounts {
  size_t configurations;
  size_t attention_branches;
  size_t total;
} SeqruleSpaceCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or "" after a success.
// The pointer stays valid until the next call into this library.
const char *seqrule_last_error(void);

// # Safety
// `out` must be valid for a write.
enum SeqruleStatus seqrule_store_new(size_t n_cells, double decay, struct SeqruleStore **out);

// # Safety
// `store` must come from `seqrule_store_new` and not be used afterwards.
// Null is ignored.
void seqrule_store_free(struct SeqruleStore *store);

// Recycles the least active cell. Pass the episode's previous cell as
// `prev` (or `SEQRULE_NO_CELL`) so its own chain is not released.
//
// # Safety
// Pointers must be valid.
enum SeqruleStatus seqrule_store_allocate(struct SeqruleStore *store,
                                          size_t prev,
                                          size_t *out_cell);

// Binds an attended token to a freshly allocated `cell`, after `prev`.
//
// # Safety
// `store` must be valid.
enum SeqruleStatus seqrule_store_bind(struct SeqruleStore *store,
                                      size_t prev,
                                      size_t cell,
                                      struct SeqruleToken token);

// # Safety
// `store` must be valid.
enum SeqruleStatus seqrule_store_decay_tick(struct SeqruleStore *store);

// # Safety
// `store` must be valid.
enum SeqruleStatus seqrule_store_refresh(struct SeqruleStore *store, size_t cell);

// Writes up to `cap` sequence-initial cells holding `token` into `out`
// (which may be null when `cap` is 0) and the full count into `out_len`.
//
// # Safety
// `out` must hold `cap` elements.
enum SeqruleStatus seqrule_store_seed_states(const struct SeqruleStore *store,
                                             struct SeqruleToken token,
                                             size_t *out,
                                             size_t cap,
                                             size_t *out_len);

// Successor (`forward`) or predecessor of `cell`, or `SEQRULE_NO_CELL`.
//
// # Safety
// Pointers must be valid.
enum SeqruleStatus seqrule_store_neighbor(const struct SeqruleStore *store,
                                          size_t cell,
                                          bool forward,
                                          size_t *out_cell);

// Adds `delta` to `cell` and every predecessor. `out_visited` (nullable)
// receives the number of cells touched.
//
// # Safety
// `store` must be valid; `out_visited` null or valid.
enum SeqruleStatus seqrule_store_reverse_replay_assign(struct SeqruleStore *store,
                                                       size_t cell,
                                                       double delta,
                                                       size_t *out_visited);

// # Safety
// Pointers must be valid.
enum SeqruleStatus seqrule_store_value(const struct SeqruleStore *store, size_t cell, double *out);

// # Safety
// Pointers must be valid.
enum SeqruleStatus seqrule_store_activity(const struct SeqruleStore *store,
                                          size_t cell,
                                          double *out);

// `ContractViolation` with a description if the transition relation or
// token index is inconsistent.
//
// # Safety
// `store` must be valid.
enum SeqruleStatus seqrule_store_check(const struct SeqruleStore *store);

// Learned policy, decay 0.9, delta 1.0, non-negative answer voters,
// self-reinforcement on.
struct SeqruleAgentParams seqrule_agent_params_default(size_t cells);

// # Safety
// Pointers must be valid.
enum SeqruleStatus seqrule_agent_new(const struct SeqruleAgentParams *params,
                                     uint64_t seed,
                                     struct SeqruleAgent **out);

// # Safety
// `agent` must come from `seqrule_agent_new` and not be used afterwards.
// Null is ignored.
void seqrule_agent_free(struct SeqruleAgent *agent);

// # Safety
// `agent` must be valid.
enum SeqruleStatus seqrule_agent_begin_episode(struct SeqruleAgent *agent);

// Feeds one 8-bit observation (one byte per bit, each 0 or 1) and writes
// the attended channel.
//
// # Safety
// `bits` must point at 8 bytes; `out_channel` must be valid.
enum SeqruleStatus seqrule_agent_step(struct SeqruleAgent *agent,
                                      const uint8_t *bits,
                                      uint8_t *out_channel);

// Writes the predicted answer and sets `out_has` to false when the agent
// abstains.
//
// # Safety
// Pointers must be valid.
enum SeqruleStatus seqrule_agent_predict_answer(struct SeqruleAgent *agent,
                                                struct SeqruleToken *out,
                                                bool *out_has);

// # Safety
// Pointers must be valid.
enum SeqruleStatus seqrule_agent_finish_episode(struct SeqruleAgent *agent,
                                                struct SeqruleToken actual,
                                                enum SeqruleOutcome *out);

// Runs one seeded trial and writes one outcome per episode into `out`,
// which must hold `cap >= params->episodes` elements.
//
// # Safety
// Pointers must be valid.
enum SeqruleStatus seqrule_run_trial(const struct SeqruleTrialParams *params,
                                     enum SeqruleOutcome *out,
                                     size_t cap);

// Loads a TOML run configuration (same keys as the command-line `run`),
// runs the sweep and writes its output files. A non-null `out_dir`
// overrides the file's `out`.
//
// # Safety
// `config_path` must be a NUL-terminated path; `out_dir` null or one.
enum SeqruleStatus seqrule_run_config(const char *config_path, const char *out_dir);

// # Safety
// `out` must be valid.
enum SeqruleStatus seqrule_enumerate(struct SeqruleSpaceCounts *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEQRULE_H */
