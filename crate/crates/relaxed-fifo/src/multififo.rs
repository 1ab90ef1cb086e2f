//! Relaxed FIFO built from `c * p` lock-protected ring buffers of
//! timestamped elements.
//!
//! A push draws a timestamp from a global counter and appends to one randomly
//! chosen sub-queue. A pop samples two distinct sub-queues, compares their
//! cached head timestamps, and removes the head with the earlier stamp — the
//! power of two choices keeps the rank error linear in the number of
//! sub-queues. With *stickiness* `s`, a thread reuses its chosen sub-queue
//! (or pop pair) for `s` consecutive operations before re-randomizing, which
//! trades rank error for fewer cache misses. A thread that fails to acquire a
//! sub-queue lock re-randomizes immediately instead of spinning.
//!
//! Each sub-queue caches its head timestamp in an atomic word so pops can
//! compare heads without locking; the cache is maintained at every push into
//! an empty buffer and at every removal. Unlike the block ring, a failed pop
//! here is best effort: the emptiness scan reads the head caches without
//! synchronizing with in-flight operations.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use crate::element::{Element, EMPTY};
use crate::fifo::{handle_seed, Fifo, FifoHandle};
use crate::pad::CachePadded;
use crate::rank::{OpKind, OpRecord, Recorder};

/// Head-stamp sentinel of an empty sub-queue; compares greater than every
/// real timestamp.
const VACANT: u64 = u64::MAX;

#[derive(Clone, Debug)]
pub struct MultiFifoParams {
    /// Maximum number of threads operating concurrently (`p`).
    pub threads: usize,
    /// Sub-queues per thread (`c`, at least 2).
    pub queue_factor: usize,
    /// Consecutive operations per sticky choice (`s`, at least 1).
    pub stickiness: u32,
    /// Capacity of each sub-queue (`m`).
    pub sub_queue_capacity: usize,
    /// Root seed for the per-handle generators.
    pub seed: u64,
}

impl Default for MultiFifoParams {
    fn default() -> Self {
        MultiFifoParams {
            threads: 1,
            queue_factor: 2,
            stickiness: 1,
            sub_queue_capacity: 1 << 10,
            seed: 0,
        }
    }
}

impl MultiFifoParams {
    /// Sizes the sub-queues so the structure holds at least `min_elements`,
    /// rounding the per-queue capacity up to a power of two.
    pub fn with_total_capacity(mut self, min_elements: usize) -> Self {
        let queues = (self.threads * self.queue_factor).max(1);
        self.sub_queue_capacity = min_elements.div_ceil(queues).next_power_of_two();
        self
    }
}

#[derive(Clone, Copy)]
struct Stamped {
    stamp: u64,
    value: Element,
}

struct SubRing {
    buf: Box<[Stamped]>,
    head: usize,
    len: usize,
}

impl SubRing {
    fn head_stamp(&self) -> u64 {
        if self.len == 0 {
            VACANT
        } else {
            self.buf[self.head].stamp
        }
    }
}

struct SubQueue {
    lock: AtomicBool,
    /// Timestamp of the head element, `VACANT` when empty. Exact whenever the
    /// lock is free.
    head_stamp: AtomicU64,
    ring: UnsafeCell<SubRing>,
}

// The ring is only touched while holding `lock`.
unsafe impl Sync for SubQueue {}

impl SubQueue {
    fn with_capacity(capacity: usize) -> Self {
        SubQueue {
            lock: AtomicBool::new(false),
            head_stamp: AtomicU64::new(VACANT),
            ring: UnsafeCell::new(SubRing {
                buf: vec![
                    Stamped {
                        stamp: VACANT,
                        value: EMPTY
                    };
                    capacity
                ]
                .into_boxed_slice(),
                head: 0,
                len: 0,
            }),
        }
    }

    fn try_lock(&self) -> Option<SubGuard<'_>> {
        if self.lock.swap(true, Ordering::Acquire) {
            None
        } else {
            Some(SubGuard { queue: self })
        }
    }

    fn lock_spinning(&self) -> SubGuard<'_> {
        loop {
            if let Some(guard) = self.try_lock() {
                return guard;
            }
            std::hint::spin_loop();
        }
    }
}

struct SubGuard<'a> {
    queue: &'a SubQueue,
}

impl SubGuard<'_> {
    fn ring(&mut self) -> &mut SubRing {
        // sound: the test-and-set lock is held for the guard's lifetime
        unsafe { &mut *self.queue.ring.get() }
    }

    fn ring_ref(&self) -> &SubRing {
        unsafe { &*self.queue.ring.get() }
    }

    fn is_full(&self) -> bool {
        let ring = self.ring_ref();
        ring.len == ring.buf.len()
    }

    fn head_stamp(&self) -> u64 {
        self.ring_ref().head_stamp()
    }

    /// Appends under the lock and maintains the head cache when the buffer
    /// was empty.
    fn push_back(&mut self, stamp: u64, value: Element) {
        let ring = self.ring();
        debug_assert!(ring.len < ring.buf.len());
        let at = (ring.head + ring.len) % ring.buf.len();
        ring.buf[at] = Stamped { stamp, value };
        ring.len += 1;
        if ring.len == 1 {
            self.queue.head_stamp.store(stamp, Ordering::Release);
        }
    }

    /// Removes the head under the lock and refreshes the head cache.
    fn pop_front(&mut self) -> Stamped {
        let ring = self.ring();
        debug_assert!(ring.len > 0);
        let taken = ring.buf[ring.head];
        ring.head = (ring.head + 1) % ring.buf.len();
        ring.len -= 1;
        let next = ring.head_stamp();
        self.queue.head_stamp.store(next, Ordering::Release);
        taken
    }
}

impl Drop for SubGuard<'_> {
    fn drop(&mut self) {
        // the head cache must be exact at every lock release
        debug_assert_eq!(
            self.queue.head_stamp.load(Ordering::Relaxed),
            self.ring_ref().head_stamp()
        );
        self.queue.lock.store(false, Ordering::Release);
    }
}

pub struct MultiFifo {
    queues: Box<[CachePadded<SubQueue>]>,
    /// Global insertion clock; fetch-add gives every element a unique,
    /// totally ordered timestamp.
    clock: CachePadded<AtomicU64>,
    params: MultiFifoParams,
}

impl MultiFifo {
    pub fn new(params: MultiFifoParams) -> Self {
        assert!(params.threads >= 1, "at least one thread");
        assert!(params.queue_factor >= 2, "queue factor must be at least 2");
        assert!(params.stickiness >= 1, "stickiness must be at least 1");
        assert!(params.sub_queue_capacity >= 1, "sub-queues need capacity");
        let count = params.threads * params.queue_factor;
        let queues = (0..count)
            .map(|_| CachePadded::new(SubQueue::with_capacity(params.sub_queue_capacity)))
            .collect();
        MultiFifo {
            queues,
            clock: CachePadded::new(AtomicU64::new(0)),
            params,
        }
    }

    pub fn params(&self) -> &MultiFifoParams {
        &self.params
    }

    /// Current lengths of all sub-queues (locks each one briefly);
    /// diagnostic only.
    pub fn sub_queue_lens(&self) -> Vec<usize> {
        self.queues
            .iter()
            .map(|q| q.lock_spinning().ring_ref().len)
            .collect()
    }

    #[cfg(test)]
    fn sub_queue_stamps(&self, at: usize) -> Vec<u64> {
        let guard = self.queues[at].lock_spinning();
        let ring = guard.ring_ref();
        (0..ring.len)
            .map(|i| ring.buf[(ring.head + i) % ring.buf.len()].stamp)
            .collect()
    }
}

impl Fifo for MultiFifo {
    type Handle<'q> = MfHandle<'q>
    where
        Self: 'q;

    fn handle(&self, thread_id: usize) -> MfHandle<'_> {
        assert!(
            thread_id < self.params.threads,
            "thread id {thread_id} out of range (p = {})",
            self.params.threads
        );
        MfHandle {
            queue: self,
            rng: SmallRng::seed_from_u64(handle_seed(self.params.seed, thread_id)),
            push_queue: 0,
            push_uses: 0,
            pop_pair: (0, 0),
            pop_uses: 0,
            recorder: None,
        }
    }

    fn capacity(&self) -> usize {
        self.queues.len() * self.params.sub_queue_capacity
    }
}

/// Expected steady-state mean rank error of a structure with `c * p`
/// sub-queues under uniform two-choice pops.
pub fn expected_rank_error(queue_factor: usize, threads: usize) -> f64 {
    let cp = (queue_factor * threads) as f64;
    5.0 / 6.0 * cp - 1.0 + 1.0 / (6.0 * cp)
}

/// Per-thread handle: sticky push queue, sticky pop pair, generator.
pub struct MfHandle<'q> {
    queue: &'q MultiFifo,
    rng: SmallRng,
    push_queue: usize,
    push_uses: u32,
    pop_pair: (usize, usize),
    pop_uses: u32,
    recorder: Option<Recorder>,
}

impl MfHandle<'_> {
    /// Appends `value`; false iff every sub-queue was observed full in one
    /// full scan.
    pub fn push(&mut self, value: Element) -> bool {
        let ok = self.push_inner(value);
        if ok {
            if let Some(rec) = self.recorder.as_mut() {
                rec.record(OpKind::Push, value);
            }
        }
        ok
    }

    /// Removes the earlier-stamped head of two sampled sub-queues; `None` iff
    /// a full scan over all head caches saw every sub-queue empty.
    pub fn pop(&mut self) -> Option<Element> {
        let popped = self.pop_inner();
        if let Some(rec) = self.recorder.as_mut() {
            rec.record(OpKind::Pop, popped.unwrap_or(EMPTY));
        }
        popped
    }

    fn push_inner(&mut self, value: Element) -> bool {
        assert_ne!(value, EMPTY, "the sentinel cannot be pushed");
        let q = self.queue;
        let n = q.queues.len();
        loop {
            if self.push_uses == 0 {
                self.push_queue = self.rng.random_range(0..n);
                self.push_uses = q.params.stickiness;
            }
            let Some(mut guard) = q.queues[self.push_queue].try_lock() else {
                // lock failure: re-randomize rather than spin
                self.push_uses = 0;
                continue;
            };
            if guard.is_full() {
                drop(guard);
                self.push_uses = 0;
                return self.push_scanning_all(value);
            }
            // the timestamp is drawn under the lock, at the moment the
            // element becomes visible, so stamps strictly increase from head
            // to tail within every sub-queue
            let stamp = q.clock.fetch_add(1, Ordering::Relaxed);
            guard.push_back(stamp, value);
            drop(guard);
            self.push_uses -= 1;
            return true;
        }
    }

    /// Slow path once a full sub-queue was hit: walk every sub-queue and
    /// append to the first with room; fail only after observing all of them
    /// full under their locks.
    fn push_scanning_all(&mut self, value: Element) -> bool {
        let q = self.queue;
        let n = q.queues.len();
        let start = self.rng.random_range(0..n);
        for step in 0..n {
            let mut guard = q.queues[(start + step) % n].lock_spinning();
            if !guard.is_full() {
                let stamp = q.clock.fetch_add(1, Ordering::Relaxed);
                guard.push_back(stamp, value);
                return true;
            }
        }
        false
    }

    fn pop_inner(&mut self) -> Option<Element> {
        let q = self.queue;
        let n = q.queues.len();
        // transient-emptiness resample budget before the full scan
        let mut resamples = n;
        loop {
            if self.pop_uses == 0 {
                self.pop_pair = self.random_pair(n);
                self.pop_uses = q.params.stickiness;
            }
            let (a, b) = self.pop_pair;
            let stamp_a = q.queues[a].head_stamp.load(Ordering::Acquire);
            let stamp_b = q.queues[b].head_stamp.load(Ordering::Acquire);
            if stamp_a == VACANT && stamp_b == VACANT {
                self.pop_uses = 0;
                if resamples > 0 {
                    resamples -= 1;
                    continue;
                }
                if q.queues
                    .iter()
                    .all(|sq| sq.head_stamp.load(Ordering::Acquire) == VACANT)
                {
                    return None;
                }
                resamples = n;
                continue;
            }
            let (target, stamp, other) = if stamp_a <= stamp_b {
                (a, stamp_a, b)
            } else {
                (b, stamp_b, a)
            };
            let Some(mut guard) = q.queues[target].try_lock() else {
                self.pop_uses = 0;
                continue;
            };
            if guard.head_stamp() != stamp {
                // head changed between sampling and locking
                drop(guard);
                self.pop_uses = 0;
                continue;
            }
            let taken = guard.pop_front();
            drop(guard);
            debug_assert_eq!(taken.stamp, stamp);
            // two-choice dominance: the loser queue's head can only have
            // moved to a later stamp since we sampled it
            debug_assert!(taken.stamp <= q.queues[other].head_stamp.load(Ordering::Acquire));
            self.pop_uses -= 1;
            return Some(taken.value);
        }
    }

    /// Two distinct sub-queue indices, uniformly random.
    fn random_pair(&mut self, n: usize) -> (usize, usize) {
        let a = self.rng.random_range(0..n);
        let b = (a + 1 + self.rng.random_range(0..n - 1)) % n;
        (a, b)
    }
}

impl FifoHandle for MfHandle<'_> {
    fn push(&mut self, value: Element) -> bool {
        MfHandle::push(self, value)
    }

    fn pop(&mut self) -> Option<Element> {
        MfHandle::pop(self)
    }

    fn enable_recording(&mut self, clock: Arc<AtomicU64>, capacity: usize) {
        self.recorder = Some(Recorder::new(clock, capacity));
    }

    fn take_records(&mut self) -> Vec<OpRecord> {
        self.recorder.take().map(Recorder::into_log).unwrap_or_default()
    }
}
