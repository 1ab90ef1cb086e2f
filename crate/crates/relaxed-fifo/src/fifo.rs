use std::sync::atomic::AtomicU64;
use std::sync::Arc;

use crate::element::Element;
use crate::rank::OpRecord;

/// Common surface of every queue in this crate.
///
/// A queue is shared by reference among up to `p` threads; each thread drives
/// it through its own [`FifoHandle`], which carries the thread's random-number
/// state, cached block or sub-queue indices, and the optional operation log.
/// Handles must not be shared between threads concurrently.
pub trait Fifo: Sync {
    type Handle<'q>: FifoHandle
    where
        Self: 'q;

    /// Creates the handle for one participating thread. `thread_id` must be
    /// unique per concurrently active handle and below the queue's thread
    /// bound.
    fn handle(&self, thread_id: usize) -> Self::Handle<'_>;

    /// Nominal element capacity.
    fn capacity(&self) -> usize;
}

/// Derives a per-handle generator seed from the queue's root seed, so runs
/// are reproducible while handles stay decorrelated.
pub(crate) fn handle_seed(root: u64, thread_id: usize) -> u64 {
    let mut z = root ^ (thread_id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub trait FifoHandle: Send {
    /// Appends `value`. Returns false iff the queue was full. `value` must
    /// not be [`EMPTY`](crate::EMPTY).
    fn push(&mut self, value: Element) -> bool;

    /// Removes an element, or returns `None` if the queue was observed empty.
    fn pop(&mut self) -> Option<Element>;

    /// Starts logging every operation of this handle, stamped by `clock`.
    fn enable_recording(&mut self, clock: Arc<AtomicU64>, capacity: usize);

    /// Stops recording and hands back this handle's log (stamp-ascending).
    fn take_records(&mut self) -> Vec<OpRecord>;
}
