//! C ABI for the relaxed-fifo queues.
//!
//! Queues and per-thread handles are opaque heap objects. The general
//! contract, spelled out per function below:
//!
//! * every constructor has a matching `_free`; pointers must not be used
//!   after freeing;
//! * a queue must outlive all handles created from it;
//! * a handle belongs to one thread at a time, the queue itself may be shared
//!   freely;
//! * `RF_EMPTY_VALUE` (`UINT64_MAX`) is reserved and cannot be pushed.
//!
//! All functions return an [`RfStatus`]; out-parameters are written only on
//! `RF_STATUS_OK`. Panics never unwind across the boundary — a violated
//! internal invariant surfaces as `RF_STATUS_INTERNAL_ERROR`.

use std::panic::{catch_unwind, AssertUnwindSafe};

use relaxed_fifo::blockfifo::BfHandle;
use relaxed_fifo::multififo::{self, MfHandle};
use relaxed_fifo::{
    BlockFifo, BlockFifoParams, Fifo, MultiFifo, MultiFifoParams, StrictQueue, EMPTY,
};

/// Reserved element value: never pushable, used internally for empty cells.
pub const RF_EMPTY_VALUE: u64 = u64::MAX;

/// Status code of every C-ABI call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RfStatus {
    /// The operation succeeded.
    Ok = 0,
    /// Push failed: the queue is full.
    Full = 1,
    /// Pop failed: the queue was observed empty.
    Empty = 2,
    /// A parameter is out of range (or the reserved value was pushed).
    InvalidArgument = 3,
    /// A required pointer was null.
    NullPointer = 4,
    /// An internal invariant failed; the structure should be discarded.
    InternalError = 5,
}

/// Opaque bounded lock-free relaxed FIFO (block ring).
pub struct RfBlockFifo {
    inner: BlockFifo,
}

/// Opaque per-thread handle of an [`RfBlockFifo`].
pub struct RfBlockFifoHandle {
    inner: BfHandle<'static>,
}

/// Opaque relaxed FIFO over timestamped sub-queues.
pub struct RfMultiFifo {
    inner: MultiFifo,
}

/// Opaque per-thread handle of an [`RfMultiFifo`].
pub struct RfMultiFifoHandle {
    inner: MfHandle<'static>,
}

/// Opaque strict (exact FIFO) mutex-guarded queue.
pub struct RfStrictQueue {
    inner: StrictQueue,
}

fn guarded(body: impl FnOnce() -> RfStatus) -> RfStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(RfStatus::InternalError)
}

/// Creates a block-ring FIFO.
///
/// `threads` is the maximum number of concurrently active handles,
/// `block_factor` the blocks per window per thread, `block_size` the cells
/// per block (1..=65535), `ring_factor` the ring length in windows (>= 3).
/// Pass `use_bitset = false` to disable the occupancy-bitset accelerator.
/// On success writes the new queue to `out`.
#[no_mangle]
pub unsafe extern "C" fn rf_blockfifo_new(
    threads: usize,
    block_factor: usize,
    block_size: usize,
    ring_factor: usize,
    seed: u64,
    use_bitset: bool,
    out: *mut *mut RfBlockFifo,
) -> RfStatus {
    if out.is_null() {
        return RfStatus::NullPointer;
    }
    if threads == 0
        || block_factor == 0
        || !(1..=u16::MAX as usize).contains(&block_size)
        || ring_factor < 3
    {
        return RfStatus::InvalidArgument;
    }
    guarded(|| {
        let queue = BlockFifo::new(BlockFifoParams {
            threads,
            block_factor,
            block_size,
            ring_factor,
            seed,
            use_bitset,
        });
        out.write(Box::into_raw(Box::new(RfBlockFifo { inner: queue })));
        RfStatus::Ok
    })
}

/// Frees a queue. All handles must have been freed first.
#[no_mangle]
pub unsafe extern "C" fn rf_blockfifo_free(queue: *mut RfBlockFifo) {
    if !queue.is_null() {
        drop(Box::from_raw(queue));
    }
}

/// Writes the queue's nominal element capacity to `out`.
#[no_mangle]
pub unsafe extern "C" fn rf_blockfifo_capacity(
    queue: *const RfBlockFifo,
    out: *mut usize,
) -> RfStatus {
    if queue.is_null() || out.is_null() {
        return RfStatus::NullPointer;
    }
    out.write((*queue).inner.capacity());
    RfStatus::Ok
}

/// Creates the handle for one thread (`thread_id < threads`). The queue must
/// outlive the handle; the handle must only be used by one thread at a time.
#[no_mangle]
pub unsafe extern "C" fn rf_blockfifo_handle_new(
    queue: *const RfBlockFifo,
    thread_id: usize,
    out: *mut *mut RfBlockFifoHandle,
) -> RfStatus {
    if queue.is_null() || out.is_null() {
        return RfStatus::NullPointer;
    }
    guarded(|| {
        let handle = (*queue).inner.handle(thread_id);
        // lifetime erased: the caller guarantees the queue outlives the handle
        let handle = std::mem::transmute::<BfHandle<'_>, BfHandle<'static>>(handle);
        out.write(Box::into_raw(Box::new(RfBlockFifoHandle { inner: handle })));
        RfStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn rf_blockfifo_handle_free(handle: *mut RfBlockFifoHandle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Appends `value`. Returns `RF_STATUS_FULL` when the bounded queue cannot
/// accept it and `RF_STATUS_INVALID_ARGUMENT` for the reserved value.
#[no_mangle]
pub unsafe extern "C" fn rf_blockfifo_push(
    handle: *mut RfBlockFifoHandle,
    value: u64,
) -> RfStatus {
    if handle.is_null() {
        return RfStatus::NullPointer;
    }
    if value == EMPTY {
        return RfStatus::InvalidArgument;
    }
    guarded(|| {
        if (*handle).inner.push(value) {
            RfStatus::Ok
        } else {
            RfStatus::Full
        }
    })
}

/// Removes an element into `out`. `RF_STATUS_EMPTY` means the queue was
/// genuinely empty at some instant during the call.
#[no_mangle]
pub unsafe extern "C" fn rf_blockfifo_pop(
    handle: *mut RfBlockFifoHandle,
    out: *mut u64,
) -> RfStatus {
    if handle.is_null() || out.is_null() {
        return RfStatus::NullPointer;
    }
    guarded(|| match (*handle).inner.pop() {
        Some(value) => {
            out.write(value);
            RfStatus::Ok
        }
        None => RfStatus::Empty,
    })
}

/// Creates a multi-queue FIFO: `queue_factor >= 2` sub-queues per thread,
/// each holding `sub_queue_capacity` elements, re-randomized every
/// `stickiness >= 1` operations.
#[no_mangle]
pub unsafe extern "C" fn rf_multififo_new(
    threads: usize,
    queue_factor: usize,
    stickiness: u32,
    sub_queue_capacity: usize,
    seed: u64,
    out: *mut *mut RfMultiFifo,
) -> RfStatus {
    if out.is_null() {
        return RfStatus::NullPointer;
    }
    if threads == 0 || queue_factor < 2 || stickiness == 0 || sub_queue_capacity == 0 {
        return RfStatus::InvalidArgument;
    }
    guarded(|| {
        let queue = MultiFifo::new(MultiFifoParams {
            threads,
            queue_factor,
            stickiness,
            sub_queue_capacity,
            seed,
        });
        out.write(Box::into_raw(Box::new(RfMultiFifo { inner: queue })));
        RfStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn rf_multififo_free(queue: *mut RfMultiFifo) {
    if !queue.is_null() {
        drop(Box::from_raw(queue));
    }
}

/// Writes the structure's total element capacity to `out`.
#[no_mangle]
pub unsafe extern "C" fn rf_multififo_capacity(
    queue: *const RfMultiFifo,
    out: *mut usize,
) -> RfStatus {
    if queue.is_null() || out.is_null() {
        return RfStatus::NullPointer;
    }
    out.write((*queue).inner.capacity());
    RfStatus::Ok
}

/// Creates the handle for one thread; same contract as the block-ring
/// handle.
#[no_mangle]
pub unsafe extern "C" fn rf_multififo_handle_new(
    queue: *const RfMultiFifo,
    thread_id: usize,
    out: *mut *mut RfMultiFifoHandle,
) -> RfStatus {
    if queue.is_null() || out.is_null() {
        return RfStatus::NullPointer;
    }
    guarded(|| {
        let handle = (*queue).inner.handle(thread_id);
        let handle = std::mem::transmute::<MfHandle<'_>, MfHandle<'static>>(handle);
        out.write(Box::into_raw(Box::new(RfMultiFifoHandle { inner: handle })));
        RfStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn rf_multififo_handle_free(handle: *mut RfMultiFifoHandle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

#[no_mangle]
pub unsafe extern "C" fn rf_multififo_push(
    handle: *mut RfMultiFifoHandle,
    value: u64,
) -> RfStatus {
    if handle.is_null() {
        return RfStatus::NullPointer;
    }
    if value == EMPTY {
        return RfStatus::InvalidArgument;
    }
    guarded(|| {
        if (*handle).inner.push(value) {
            RfStatus::Ok
        } else {
            RfStatus::Full
        }
    })
}

/// Removes the earlier-stamped of two sampled sub-queue heads into `out`.
/// `RF_STATUS_EMPTY` is best effort: it means one full scan saw every
/// sub-queue empty.
#[no_mangle]
pub unsafe extern "C" fn rf_multififo_pop(
    handle: *mut RfMultiFifoHandle,
    out: *mut u64,
) -> RfStatus {
    if handle.is_null() || out.is_null() {
        return RfStatus::NullPointer;
    }
    guarded(|| match (*handle).inner.pop() {
        Some(value) => {
            out.write(value);
            RfStatus::Ok
        }
        None => RfStatus::Empty,
    })
}

/// Expected steady-state mean rank error of a multi-queue FIFO with
/// `queue_factor * threads` sub-queues.
#[no_mangle]
pub extern "C" fn rf_multififo_expected_rank_error(queue_factor: usize, threads: usize) -> f64 {
    multififo::expected_rank_error(queue_factor, threads)
}

/// Creates the strict (exact FIFO) baseline queue. Its operations take the
/// queue pointer directly; no per-thread handle is needed.
#[no_mangle]
pub unsafe extern "C" fn rf_strict_new(capacity: usize, out: *mut *mut RfStrictQueue) -> RfStatus {
    if out.is_null() {
        return RfStatus::NullPointer;
    }
    if capacity == 0 {
        return RfStatus::InvalidArgument;
    }
    guarded(|| {
        out.write(Box::into_raw(Box::new(RfStrictQueue {
            inner: StrictQueue::new(capacity),
        })));
        RfStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn rf_strict_free(queue: *mut RfStrictQueue) {
    if !queue.is_null() {
        drop(Box::from_raw(queue));
    }
}

#[no_mangle]
pub unsafe extern "C" fn rf_strict_push(queue: *const RfStrictQueue, value: u64) -> RfStatus {
    if queue.is_null() {
        return RfStatus::NullPointer;
    }
    if value == EMPTY {
        return RfStatus::InvalidArgument;
    }
    guarded(|| {
        if (*queue).inner.push(value) {
            RfStatus::Ok
        } else {
            RfStatus::Full
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rf_strict_pop(queue: *const RfStrictQueue, out: *mut u64) -> RfStatus {
    if queue.is_null() || out.is_null() {
        return RfStatus::NullPointer;
    }
    guarded(|| match (*queue).inner.pop() {
        Some(value) => {
            out.write(value);
            RfStatus::Ok
        }
        None => RfStatus::Empty,
    })
}
