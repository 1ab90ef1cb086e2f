//! Bounded, lock-free, relaxed FIFO over a ring of fixed-size blocks.
//!
//! The ring holds `k * w` blocks of `C` cells each, where `w = B * p` is the
//! window size. Two windows slide over the ring: pushes claim unclaimed
//! blocks inside the *push window*, pops drain blocks inside the *pop window*
//! trailing right behind it. A thread keeps pushing into its claimed block
//! until the block fills or the window moves past it, so most operations are
//! uncontended single-block work; window maintenance is amortized over whole
//! blocks.
//!
//! Every block is governed by one packed header word (epoch, pop counter,
//! push counter, claim bit), so claiming, committing an element, reserving an
//! element, and closing a block are each a single CAS. Block indices encode
//! `position + ring_length * epoch`; a CAS can only succeed when both the
//! position and the epoch match, which defuses ABA on recycled blocks.
//!
//! Elements are committed by a three-step protocol: write the cell, then
//! publish it by bumping the header's push counter; if publishing fails the
//! cell is rolled back. Pops symmetrically *reserve* a cell through the
//! header before swapping it out, and the pop that reserves the last element
//! closes the block (bumping its epoch) so the windows can advance past it.
//!
//! A failed pop is meaningful: `pop` returns `None` only if every block of
//! the pop window was closed, every push-window header showed zero committed
//! elements, and the push window had not moved meanwhile — at that instant
//! the queue was genuinely empty.

use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};
use std::sync::Arc;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use crate::bitset::Bitset;
use crate::element::{Element, EMPTY};
use crate::fifo::{handle_seed, Fifo, FifoHandle};
use crate::header::{BlockHeader, EPOCH_MASK};
use crate::pad::CachePadded;
use crate::rank::{OpKind, OpRecord, Recorder};

const INVALID_INDEX: i64 = -1;

/// Construction parameters.
#[derive(Clone, Debug)]
pub struct BlockFifoParams {
    /// Maximum number of threads operating concurrently (`p`).
    pub threads: usize,
    /// Blocks per window per thread (`B`); the window spans `B * p` blocks.
    pub block_factor: usize,
    /// Cells per block (`C`).
    pub block_size: usize,
    /// Ring length in windows (`k`, at least 3).
    pub ring_factor: usize,
    /// Root seed for the per-handle generators.
    pub seed: u64,
    /// Maintain and consult the occupancy bitset when searching pop blocks.
    pub use_bitset: bool,
}

impl Default for BlockFifoParams {
    fn default() -> Self {
        BlockFifoParams {
            threads: 1,
            block_factor: 1,
            block_size: 63,
            ring_factor: 4,
            seed: 0,
            use_bitset: true,
        }
    }
}

impl BlockFifoParams {
    /// Cells per window.
    pub fn window_cells(&self) -> usize {
        self.threads * self.block_factor * self.block_size
    }

    /// Grows the ring factor until at least `min_elements` fit comfortably,
    /// keeping two windows of slack for the sliding machinery.
    pub fn with_usable_capacity(mut self, min_elements: usize) -> Self {
        let per_window = self.window_cells().max(1);
        self.ring_factor = (min_elements.div_ceil(per_window) + 2).max(3);
        self
    }
}

/// One cache line of the block slab.
#[repr(align(64))]
struct Line([AtomicU64; 8]);

pub struct BlockFifo {
    lines: Box<[Line]>,
    /// Words per block: the header plus `C` cells, padded to a line multiple.
    stride: usize,
    /// Ring length in blocks.
    ring: usize,
    /// Window length in blocks.
    window: usize,
    block_size: usize,
    push_window: CachePadded<AtomicI64>,
    pop_window: CachePadded<AtomicI64>,
    bitset: Option<Bitset>,
    params: BlockFifoParams,
}

impl BlockFifo {
    pub fn new(params: BlockFifoParams) -> Self {
        assert!(params.threads >= 1, "at least one thread");
        assert!(params.block_factor >= 1, "block factor must be positive");
        assert!(
            (1..=u16::MAX as usize).contains(&params.block_size),
            "block size must fit the 16-bit header counters"
        );
        assert!(params.ring_factor >= 3, "ring factor must be at least 3");

        let window = params.threads * params.block_factor;
        let ring = params.ring_factor * window;
        let block_size = params.block_size;
        let stride = (block_size + 1).next_multiple_of(8);
        let words = ring * stride;
        let init_word = |i: usize| {
            let within = i % stride;
            if within == 0 || within > block_size {
                // header (epoch 0, unclaimed) and padding
                0
            } else {
                EMPTY
            }
        };
        let lines = (0..words / 8)
            .map(|line| Line(std::array::from_fn(|j| AtomicU64::new(init_word(line * 8 + j)))))
            .collect();

        BlockFifo {
            lines,
            stride,
            ring,
            window,
            block_size,
            // the pop window starts directly behind the push window
            push_window: CachePadded::new(AtomicI64::new(window as i64)),
            pop_window: CachePadded::new(AtomicI64::new(0)),
            bitset: params.use_bitset.then(|| Bitset::new(ring)),
            params,
        }
    }

    pub fn params(&self) -> &BlockFifoParams {
        &self.params
    }

    /// Elements the queue can hold while leaving the windows room to slide.
    pub fn usable_capacity(&self) -> usize {
        (self.params.ring_factor - 2) * self.window * self.block_size
    }

    #[inline]
    fn word(&self, index: usize) -> &AtomicU64 {
        &self.lines[index >> 3].0[index & 7]
    }

    #[inline]
    fn header_at(&self, pos: usize) -> &AtomicU64 {
        self.word(pos * self.stride)
    }

    #[inline]
    fn cell_at(&self, pos: usize, slot: usize) -> &AtomicU64 {
        debug_assert!(slot < self.block_size);
        self.word(pos * self.stride + 1 + slot)
    }

    #[inline]
    fn position(&self, index: i64) -> usize {
        debug_assert!(index >= 0);
        (index % self.ring as i64) as usize
    }

    /// Full (untruncated) epoch of a block index.
    #[inline]
    fn lap(&self, index: i64) -> u64 {
        (index / self.ring as i64) as u64
    }

    /// Epoch of a block index truncated to the header's 31 bits.
    #[inline]
    fn epoch_bits(&self, index: i64) -> u64 {
        self.lap(index) & EPOCH_MASK
    }

    #[inline]
    fn load_header(&self, pos: usize) -> BlockHeader {
        BlockHeader::from_raw(self.header_at(pos).load(Ordering::Acquire))
    }

    /// Three-step commit: claim the cell at the header's push counter, then
    /// publish it by CAS-ing the header forward. A failed publish rolls the
    /// cell back. The element is visible to pops only after the header CAS.
    fn insert_in_block(&self, header: BlockHeader, index: i64, value: Element) -> bool {
        let pos = self.position(index);
        let slot = header.push_count() as usize;
        debug_assert!(slot < self.block_size);
        let cell = self.cell_at(pos, slot);
        if cell
            .compare_exchange(EMPTY, value, Ordering::Release, Ordering::Relaxed)
            .is_err()
        {
            // an uncommitted write from a stalled thread still occupies it
            return false;
        }
        hook!("insert:cell_claimed");
        if self
            .header_at(pos)
            .compare_exchange(
                header.raw(),
                header.committed().raw(),
                Ordering::AcqRel,
                Ordering::Relaxed,
            )
            .is_ok()
        {
            return true;
        }
        hook!("insert:rollback");
        cell.store(EMPTY, Ordering::Release);
        false
    }

    /// Reserves the cell at the header's pop counter: bumps the counter, or
    /// closes the block (epoch bump, claim released) when at most one element
    /// is left. On success with `header.push_count() > 0` the caller owns
    /// cell `header.pop_count()`.
    fn reserve_element(&self, header: BlockHeader, index: i64) -> bool {
        let closing = header.pop_count() + 1 >= header.push_count();
        let next = if closing {
            header.closed()
        } else {
            header.reserved()
        };
        let pos = self.position(index);
        hook!("pop:reserve_cas");
        if self
            .header_at(pos)
            .compare_exchange(header.raw(), next.raw(), Ordering::AcqRel, Ordering::Relaxed)
            .is_err()
        {
            return false;
        }
        if closing {
            if let Some(bitset) = &self.bitset {
                bitset.clear(pos, self.lap(index));
            }
        }
        true
    }

    #[inline]
    fn take_cell(&self, pos: usize, slot: usize) -> Element {
        let value = self.cell_at(pos, slot).swap(EMPTY, Ordering::AcqRel);
        debug_assert_ne!(value, EMPTY, "a reserved cell must hold a committed element");
        value
    }

    /// The failed-pop check: true only if no push-window header shows a
    /// committed element and the push window did not move during the scan.
    /// No elements can appear in closed pop-window blocks and none can leave
    /// the push window, so a true result means the queue was empty at some
    /// instant within the calling pop.
    fn push_window_is_empty(&self, push_w: i64) -> bool {
        for index in push_w..push_w + self.window as i64 {
            let header = self.load_header(self.position(index));
            if header.push_count() > 0 {
                return false;
            }
        }
        self.push_window.load(Ordering::Acquire) == push_w
    }
}

impl Fifo for BlockFifo {
    type Handle<'q> = BfHandle<'q>
    where
        Self: 'q;

    fn handle(&self, thread_id: usize) -> BfHandle<'_> {
        assert!(
            thread_id < self.params.threads,
            "thread id {thread_id} out of range (p = {})",
            self.params.threads
        );
        BfHandle {
            queue: self,
            rng: SmallRng::seed_from_u64(handle_seed(self.params.seed, thread_id)),
            push_block: INVALID_INDEX,
            pop_block: INVALID_INDEX,
            recorder: None,
        }
    }

    fn capacity(&self) -> usize {
        self.ring * self.block_size
    }
}

/// Per-thread handle: cached push/pop block indices plus the thread's
/// generator for randomized window scans.
pub struct BfHandle<'q> {
    queue: &'q BlockFifo,
    rng: SmallRng,
    push_block: i64,
    pop_block: i64,
    recorder: Option<Recorder>,
}

impl BfHandle<'_> {
    /// Appends `value`; false iff the queue is full.
    pub fn push(&mut self, value: Element) -> bool {
        let ok = self.push_inner(value);
        if ok {
            if let Some(rec) = self.recorder.as_mut() {
                rec.record(OpKind::Push, value);
            }
        }
        ok
    }

    /// Removes some element near the queue's head; `None` iff the queue was
    /// empty at some instant during the call.
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
        let mut window = q.push_window.load(Ordering::Acquire);
        hook!("push:window_loaded");

        // fast path: keep filling the block this thread already claimed
        if self.push_block >= window {
            let pos = q.position(self.push_block);
            let header = q.load_header(pos);
            if header.epoch() == q.epoch_bits(self.push_block)
                && (header.push_count() as usize) < q.block_size
                && q.insert_in_block(header, self.push_block, value)
            {
                if header.push_count() as usize + 1 == q.block_size {
                    self.push_block = INVALID_INDEX;
                }
                return true;
            }
        }

        loop {
            // search the window for an unclaimed block, from a random start
            let offset = self.rng.random_range(0..q.window);
            for step in 0..q.window {
                let index = window + ((offset + step) % q.window) as i64;
                let pos = q.position(index);
                let unclaimed = BlockHeader::unclaimed(q.epoch_bits(index));
                if q.header_at(pos).load(Ordering::Acquire) != unclaimed.raw() {
                    continue;
                }
                let claimed = BlockHeader::claimed_empty(q.epoch_bits(index));
                hook!("push:claim_cas");
                if q.header_at(pos)
                    .compare_exchange(
                        unclaimed.raw(),
                        claimed.raw(),
                        Ordering::AcqRel,
                        Ordering::Relaxed,
                    )
                    .is_err()
                {
                    continue;
                }
                if let Some(bitset) = &q.bitset {
                    bitset.set(pos, q.lap(index));
                }
                hook!("push:block_claimed");
                if q.insert_in_block(claimed, index, value) {
                    self.push_block = if q.block_size == 1 { INVALID_INDEX } else { index };
                    return true;
                }
                // the first cell still holds an uncommitted write from an
                // earlier epoch; leave the block for the pops to close
            }
            // At-or-beyond comparison: the pop window slides in single-block
            // steps, so the distance can step over the exact ring length
            // while this thread is scanning. Only reporting full on equality
            // would let pushers advance the window forever.
            if window + q.window as i64 - q.pop_window.load(Ordering::Acquire) >= q.ring as i64 {
                self.push_block = INVALID_INDEX;
                return false; // queue is full
            }
            hook!("push:advance_window");
            window = match q.push_window.compare_exchange(
                window,
                window + q.window as i64,
                Ordering::AcqRel,
                Ordering::Acquire,
            ) {
                Ok(_) => window + q.window as i64,
                Err(current) => current,
            };
        }
    }

    fn pop_inner(&mut self) -> Option<Element> {
        let q = self.queue;

        // fast path: the block this thread last popped from
        if self.pop_block != INVALID_INDEX {
            let pos = q.position(self.pop_block);
            let header = q.load_header(pos);
            if header.epoch() == q.epoch_bits(self.pop_block)
                && q.reserve_element(header, self.pop_block)
            {
                debug_assert!(header.push_count() > 0);
                return Some(q.take_cell(pos, header.pop_count() as usize));
            }
        }

        loop {
            let pop_w = q.pop_window.load(Ordering::Acquire);
            let push_w = q.push_window.load(Ordering::Acquire);
            debug_assert!(pop_w + (q.window as i64) <= push_w);

            if pop_w + (q.window as i64) < push_w {
                let first = q.load_header(q.position(pop_w));
                if first.epoch() != q.epoch_bits(pop_w) {
                    // first block is closed: slide the pop window past it
                    hook!("pop:slide_cas");
                    let _ = q.pop_window.compare_exchange(
                        pop_w,
                        pop_w + 1,
                        Ordering::AcqRel,
                        Ordering::Relaxed,
                    );
                    continue;
                }
            }

            let offset = self.rng.random_range(0..q.window);

            // first pass: blocks nobody has popped from yet, to spread
            // deleting threads over distinct blocks
            if let Some(value) = self.scan_fresh_blocks(pop_w, offset) {
                return Some(value);
            }

            // second pass: any non-closed block; keep retrying a block until
            // we take an element from it or it closes under us
            for step in 0..q.window {
                let index = pop_w + ((offset + step) % q.window) as i64;
                let pos = q.position(index);
                loop {
                    let header = q.load_header(pos);
                    if header.epoch() != q.epoch_bits(index) {
                        break; // closed
                    }
                    if q.reserve_element(header, index) && header.push_count() > 0 {
                        self.pop_block = index;
                        return Some(q.take_cell(pos, header.pop_count() as usize));
                    }
                }
            }

            // the whole pop window is closed
            if pop_w + q.window as i64 == push_w {
                hook!("pop:empty_scan");
                if q.push_window_is_empty(push_w) {
                    return None;
                }
                hook!("pop:advance_windows");
                let _ = q.push_window.compare_exchange(
                    push_w,
                    push_w + q.window as i64,
                    Ordering::AcqRel,
                    Ordering::Relaxed,
                );
                let _ = q.pop_window.compare_exchange(
                    pop_w,
                    pop_w + q.window as i64,
                    Ordering::AcqRel,
                    Ordering::Relaxed,
                );
            }
        }
    }

    /// One preference pass over the window looking for blocks with a zero pop
    /// counter, guided by the occupancy bitset when enabled. Purely advisory:
    /// every hit is re-validated against the block header before reserving.
    fn scan_fresh_blocks(&mut self, pop_w: i64, offset: usize) -> Option<Element> {
        let q = self.queue;
        if let Some(bitset) = &q.bitset {
            let mut probe = offset;
            for _ in 0..q.window {
                let index = bitset.find_set(pop_w, q.window, probe)?;
                if let Some(value) = self.try_fresh_block(index) {
                    return Some(value);
                }
                let next = ((index - pop_w) as usize + 1) % q.window;
                if next == offset {
                    break; // came full circle
                }
                probe = next;
            }
            None
        } else {
            for step in 0..q.window {
                let index = pop_w + ((offset + step) % q.window) as i64;
                if let Some(value) = self.try_fresh_block(index) {
                    return Some(value);
                }
            }
            None
        }
    }

    fn try_fresh_block(&mut self, index: i64) -> Option<Element> {
        let q = self.queue;
        let pos = q.position(index);
        let header = q.load_header(pos);
        if header.epoch() == q.epoch_bits(index)
            && header.pop_count() == 0
            && header.push_count() > 0
            && q.reserve_element(header, index)
        {
            self.pop_block = index;
            return Some(q.take_cell(pos, 0));
        }
        None
    }
}

impl FifoHandle for BfHandle<'_> {
    fn push(&mut self, value: Element) -> bool {
        BfHandle::push(self, value)
    }

    fn pop(&mut self) -> Option<Element> {
        BfHandle::pop(self)
    }

    fn enable_recording(&mut self, clock: Arc<AtomicU64>, capacity: usize) {
        self.recorder = Some(Recorder::new(clock, capacity));
    }

    fn take_records(&mut self) -> Vec<OpRecord> {
        self.recorder.take().map(Recorder::into_log).unwrap_or_default()
    }
}
