#ifndef RELAXED_FIFO_H
#define RELAXED_FIFO_H

/* Generated by cbindgen from relaxed-fifo-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Reserved element value: never pushable, used internally for empty cells.
 */
#define RF_EMPTY_VALUE UINT64_MAX

/**
 * Status code of every C-ABI call.
 */
typedef enum RfStatus {
  /**
   * The operation succeeded.
   */
  RF_STATUS_OK = 0,
  /**
   * Push failed: the queue is full.
   */
  RF_STATUS_FULL = 1,
  /**
   * Pop failed: the queue was observed empty.
   */
  RF_STATUS_EMPTY = 2,
  /**
   * A parameter is out of range (or the reserved value was pushed).
   */
  RF_STATUS_INVALID_ARGUMENT = 3,
  /**
   * A required pointer was null.
   */
  RF_STATUS_NULL_POINTER = 4,
  /**
   * An internal invariant failed; the structure should be discarded.
   */
  RF_STATUS_INTERNAL_ERROR = 5,
} RfStatus;

/**
 * Opaque bounded lock-free relaxed FIFO (block ring).
 */
typedef struct RfBlockFifo RfBlockFifo;

/**
 * Opaque per-thread handle of an [`RfBlockFifo`].
 */
typedef struct RfBlockFifoHandle RfBlockFifoHandle;

/**
 * Opaque relaxed FIFO over timestamped sub-queues.
 */
typedef struct RfMultiFifo RfMultiFifo;

/**
 * Opaque per-thread handle of an [`RfMultiFifo`].
 */
typedef struct RfMultiFifoHandle RfMultiFifoHandle;

/**
 * Opaque strict (exact FIFO) mutex-guarded queue.
 */
typedef struct RfStrictQueue RfStrictQueue;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a block-ring FIFO.
 *
 * `threads` is the maximum number of concurrently active handles,
 * `block_factor` the blocks per window per thread, `block_size` the cells
 * per block (1..=65535), `ring_factor` the ring length in windows (>= 3).
 * Pass `use_bitset = false` to disable the occupancy-bitset accelerator.
 * On success writes the new queue to `out`.
 */
enum RfStatus rf_blockfifo_new(size_t threads,
                               size_t block_factor,
                               size_t block_size,
                               size_t ring_factor,
                               uint64_t seed,
                               bool use_bitset,
                               struct RfBlockFifo **out);

/**
 * Frees a queue. All handles must have been freed first.
 */
void rf_blockfifo_free(struct RfBlockFifo *queue);

/**
 * Writes the queue's nominal element capacity to `out`.
 */
enum RfStatus rf_blockfifo_capacity(const struct RfBlockFifo *queue, size_t *out);

/**
 * Creates the handle for one thread (`thread_id < threads`). The queue must
 * outlive the handle; the handle must only be used by one thread at a time.
 */
enum RfStatus rf_blockfifo_handle_new(const struct RfBlockFifo *queue,
                                      size_t thread_id,
                                      struct RfBlockFifoHandle **out);

void rf_blockfifo_handle_free(struct RfBlockFifoHandle *handle);

/**
 * Appends `value`. Returns `RF_STATUS_FULL` when the bounded queue cannot
 * accept it and `RF_STATUS_INVALID_ARGUMENT` for the reserved value.
 */
enum RfStatus rf_blockfifo_push(struct RfBlockFifoHandle *handle, uint64_t value);

/**
 * Removes an element into `out`. `RF_STATUS_EMPTY` means the queue was
 * genuinely empty at some instant during the call.
 */
enum RfStatus rf_blockfifo_pop(struct RfBlockFifoHandle *handle, uint64_t *out);

/**
 * Creates a multi-queue FIFO: `queue_factor >= 2` sub-queues per thread,
 * each holding `sub_queue_capacity` elements, re-randomized every
 * `stickiness >= 1` operations.
 */
enum RfStatus rf_multififo_new(size_t threads,
                               size_t queue_factor,
                               uint32_t stickiness,
                               size_t sub_queue_capacity,
                               uint64_t seed,
                               struct RfMultiFifo **out);

void rf_multififo_free(struct RfMultiFifo *queue);

/**
 * Writes the structure's total element capacity to `out`.
 */
enum RfStatus rf_multififo_capacity(const struct RfMultiFifo *queue, size_t *out);

/**
 * Creates the handle for one thread; same contract as the block-ring
 * handle.
 */
enum RfStatus rf_multififo_handle_new(const struct RfMultiFifo *queue,
                                      size_t thread_id,
                                      struct RfMultiFifoHandle **out);

void rf_multififo_handle_free(struct RfMultiFifoHandle *handle);

enum RfStatus rf_multififo_push(struct RfMultiFifoHandle *handle, uint64_t value);

/**
 * Removes the earlier-stamped of two sampled sub-queue heads into `out`.
 * `RF_STATUS_EMPTY` is best effort: it means one full scan saw every
 * sub-queue empty.
 */
enum RfStatus rf_multififo_pop(struct RfMultiFifoHandle *handle, uint64_t *out);

/**
 * Expected steady-state mean rank error of a multi-queue FIFO with
 * `queue_factor * threads` sub-queues.
 */
double rf_multififo_expected_rank_error(size_t queue_factor, size_t threads);

/**
 * Creates the strict (exact FIFO) baseline queue. Its operations take the
 * queue pointer directly; no per-thread handle is needed.
 */
enum RfStatus rf_strict_new(size_t capacity, struct RfStrictQueue **out);

void rf_strict_free(struct RfStrictQueue *queue);

enum RfStatus rf_strict_push(const struct RfStrictQueue *queue, uint64_t value);

enum RfStatus rf_strict_pop(const struct RfStrictQueue *queue, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELAXED_FIFO_H */
