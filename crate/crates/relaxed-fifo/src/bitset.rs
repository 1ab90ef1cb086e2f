//! Occupancy bitset for the block ring: one bit per block meaning "possibly
//! contains elements".
//!
//! Bits are packed 32 per atomic unit together with a 32-bit unit epoch, so a
//! bit update and its epoch check are one single-word CAS. Each unit sits on
//! its own cache line. The epoch guards against a late clear wiping the bit of
//! a block that was already recycled: clears only apply when the unit epoch
//! matches, and a set from a newer epoch wholesale-resets the unit's stale
//! bits first.
//!
//! Errors are one-sided by construction: a bit may remain set after its block
//! drained, but a block holding committed elements in the current window
//! epoch always has its bit set. Readers therefore treat hits as hints and
//! re-validate block headers before acting on them; misses may only skip
//! blocks that headers would confirm empty.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::pad::CachePadded;

/// Blocks covered by one atomic unit. Minimal unit size keeps contention on
/// each word low.
pub const BLOCKS_PER_UNIT: usize = 32;

pub struct Bitset {
    units: Box<[CachePadded<AtomicU64>]>,
    /// Total number of block positions (the ring length).
    blocks: usize,
}

#[inline]
fn pack(bits: u32, epoch: u32) -> u64 {
    ((epoch as u64) << 32) | bits as u64
}

#[inline]
fn unpack(unit: u64) -> (u32, u32) {
    (unit as u32, (unit >> 32) as u32)
}

/// True when `a` is ahead of `b` in wrapping 32-bit epoch order.
#[inline]
fn newer(a: u32, b: u32) -> bool {
    (a.wrapping_sub(b) as i32) > 0
}

impl Bitset {
    pub fn new(blocks: usize) -> Self {
        assert!(blocks > 0);
        let unit_count = blocks.div_ceil(BLOCKS_PER_UNIT);
        let units = (0..unit_count)
            .map(|_| CachePadded::new(AtomicU64::new(0)))
            .collect();
        Bitset { units, blocks }
    }

    /// Marks block `pos` as possibly occupied in window epoch `epoch`.
    /// Called by the thread that claimed the block for pushing. A unit still
    /// carrying bits from an older epoch is reset to just this bit; a set
    /// from an older epoch than the unit's is dropped.
    pub fn set(&self, pos: usize, epoch: u64) {
        debug_assert!(pos < self.blocks);
        let unit = &self.units[pos / BLOCKS_PER_UNIT];
        let bit = 1u32 << (pos % BLOCKS_PER_UNIT);
        let target = epoch as u32;
        let mut current = unit.load(Ordering::Acquire);
        loop {
            let (bits, unit_epoch) = unpack(current);
            let next = if unit_epoch == target {
                pack(bits | bit, target)
            } else if newer(target, unit_epoch) {
                pack(bit, target)
            } else {
                return;
            };
            match unit.compare_exchange_weak(current, next, Ordering::AcqRel, Ordering::Acquire) {
                Ok(_) => return,
                Err(actual) => current = actual,
            }
        }
    }

    /// Clears block `pos`'s bit. Called by the thread that closed the block.
    /// A mismatched unit epoch means the unit was recycled; the clear is then
    /// a no-op.
    pub fn clear(&self, pos: usize, epoch: u64) {
        debug_assert!(pos < self.blocks);
        let unit = &self.units[pos / BLOCKS_PER_UNIT];
        let bit = 1u32 << (pos % BLOCKS_PER_UNIT);
        let target = epoch as u32;
        let mut current = unit.load(Ordering::Acquire);
        loop {
            let (bits, unit_epoch) = unpack(current);
            if unit_epoch != target || bits & bit == 0 {
                return;
            }
            let next = pack(bits & !bit, target);
            match unit.compare_exchange_weak(current, next, Ordering::AcqRel, Ordering::Acquire) {
                Ok(_) => return,
                Err(actual) => current = actual,
            }
        }
    }

    /// Searches the window of `len` blocks starting at block index `first`
    /// for a set bit, probing cyclically from `start_offset` within the
    /// window. Returns the block index of the hit. Each unit is inspected
    /// with a constant number of instructions (mask + count trailing zeros);
    /// units whose epoch does not match the window's are skipped, since their
    /// bits describe another lap of the ring. `None` means the hint is
    /// exhausted and the caller falls back to the header scan.
    pub fn find_set(&self, first: i64, len: usize, start_offset: usize) -> Option<i64> {
        debug_assert!(len <= self.blocks);
        debug_assert!(start_offset < len);
        self.scan(first + start_offset as i64, len - start_offset)
            .or_else(|| self.scan(first, start_offset))
    }

    /// Linear scan over `count` consecutive block indices starting at `from`.
    fn scan(&self, from: i64, count: usize) -> Option<i64> {
        let mut index = from;
        let mut remaining = count;
        while remaining > 0 {
            let pos = (index % self.blocks as i64) as usize;
            let lap = (index / self.blocks as i64) as u64;
            let in_unit = pos % BLOCKS_PER_UNIT;
            // one probe covers the chunk up to the unit end, the ring end, or
            // the scan end, whichever comes first
            let span = (BLOCKS_PER_UNIT - in_unit)
                .min(self.blocks - pos)
                .min(remaining);
            let (bits, unit_epoch) = unpack(self.units[pos / BLOCKS_PER_UNIT].load(Ordering::Acquire));
            if unit_epoch == lap as u32 {
                let mask = if span == BLOCKS_PER_UNIT {
                    u32::MAX
                } else {
                    ((1u32 << span) - 1) << in_unit
                };
                let hits = bits & mask;
                if hits != 0 {
                    let offset = hits.trailing_zeros() as i64 - in_unit as i64;
                    return Some(index + offset);
                }
            }
            index += span as i64;
            remaining -= span;
        }
        None
    }
}
