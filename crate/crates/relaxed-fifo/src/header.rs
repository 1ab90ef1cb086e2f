//! Packed block header word.
//!
//! Layout (LSB to MSB): claim bit (1), push counter (16), pop counter (16),
//! epoch (31). A block can hold up to 65535 cells, and a single block position
//! can be recycled ~2.1e9 times before its 31-bit epoch wraps; both bounds are
//! far beyond any configuration this crate accepts.

pub(crate) const EPOCH_BITS: u32 = 31;
pub(crate) const EPOCH_MASK: u64 = (1 << EPOCH_BITS) - 1;

const CLAIMED_BIT: u64 = 1;
const PUSH_SHIFT: u32 = 1;
const POP_SHIFT: u32 = 17;
const EPOCH_SHIFT: u32 = 33;
const COUNTER_MASK: u64 = 0xFFFF;

/// One block header, packed into a single atomically updated word.
#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) struct BlockHeader(u64);

impl BlockHeader {
    #[inline]
    pub(crate) fn new(epoch: u64, pop: u32, push: u32, claimed: bool) -> Self {
        debug_assert!(epoch <= EPOCH_MASK);
        debug_assert!(pop as u64 <= COUNTER_MASK && push as u64 <= COUNTER_MASK);
        debug_assert!(pop <= push);
        BlockHeader(
            (epoch << EPOCH_SHIFT)
                | ((pop as u64) << POP_SHIFT)
                | ((push as u64) << PUSH_SHIFT)
                | (claimed as u64),
        )
    }

    #[inline]
    pub(crate) fn from_raw(raw: u64) -> Self {
        BlockHeader(raw)
    }

    #[inline]
    pub(crate) fn raw(self) -> u64 {
        self.0
    }

    /// Epoch truncated to 31 bits; compare against `lap & EPOCH_MASK`.
    #[inline]
    pub(crate) fn epoch(self) -> u64 {
        self.0 >> EPOCH_SHIFT
    }

    #[inline]
    pub(crate) fn pop_count(self) -> u32 {
        ((self.0 >> POP_SHIFT) & COUNTER_MASK) as u32
    }

    #[inline]
    pub(crate) fn push_count(self) -> u32 {
        ((self.0 >> PUSH_SHIFT) & COUNTER_MASK) as u32
    }

    #[inline]
    pub(crate) fn claimed(self) -> bool {
        self.0 & CLAIMED_BIT != 0
    }

    /// Header of a fresh unclaimed block in the given epoch.
    #[inline]
    pub(crate) fn unclaimed(epoch: u64) -> Self {
        BlockHeader::new(epoch, 0, 0, false)
    }

    /// Header right after a successful claim.
    #[inline]
    pub(crate) fn claimed_empty(epoch: u64) -> Self {
        BlockHeader::new(epoch, 0, 0, true)
    }

    /// Header after committing one more element. The pop counter is carried
    /// over so that a commit racing with concurrent pops cannot resurrect
    /// already-taken cells.
    #[inline]
    pub(crate) fn committed(self) -> Self {
        BlockHeader::new(self.epoch(), self.pop_count(), self.push_count() + 1, true)
    }

    /// Header after reserving the cell at the current pop counter.
    #[inline]
    pub(crate) fn reserved(self) -> Self {
        BlockHeader::new(self.epoch(), self.pop_count() + 1, self.push_count(), true)
    }

    /// Closed header: epoch bumped, counters reset, claim released.
    #[inline]
    pub(crate) fn closed(self) -> Self {
        BlockHeader::new((self.epoch() + 1) & EPOCH_MASK, 0, 0, false)
    }
}

impl std::fmt::Debug for BlockHeader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockHeader")
            .field("epoch", &self.epoch())
            .field("pop", &self.pop_count())
            .field("push", &self.push_count())
            .field("claimed", &self.claimed())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pack_unpack_roundtrip() {
        let h = BlockHeader::new(5, 2, 3, true);
        assert_eq!(h.epoch(), 5);
        assert_eq!(h.pop_count(), 2);
        assert_eq!(h.push_count(), 3);
        assert!(h.claimed());
    }

    #[test]
    fn transitions() {
        let h = BlockHeader::claimed_empty(0);
        let h = h.committed();
        assert_eq!((h.epoch(), h.pop_count(), h.push_count(), h.claimed()), (0, 0, 1, true));
        let h = h.committed().committed();
        let r = h.reserved();
        assert_eq!((r.pop_count(), r.push_count()), (1, 3));
        let c = r.closed();
        assert_eq!((c.epoch(), c.pop_count(), c.push_count(), c.claimed()), (1, 0, 0, false));
    }

    #[test]
    fn epoch_wraps_inside_mask() {
        let h = BlockHeader::new(EPOCH_MASK, 0, 1, true);
        assert_eq!(h.closed().epoch(), 0);
    }

    proptest! {
        #[test]
        fn any_field_combination_roundtrips(
            epoch in 0u64..=EPOCH_MASK,
            pop in 0u32..=0xFFFF,
            push in 0u32..=0xFFFF,
            claimed in proptest::bool::ANY,
        ) {
            prop_assume!(pop <= push);
            let h = BlockHeader::new(epoch, pop, push, claimed);
            prop_assert_eq!(h.epoch(), epoch);
            prop_assert_eq!(h.pop_count(), pop);
            prop_assert_eq!(h.push_count(), push);
            prop_assert_eq!(h.claimed(), claimed);
            prop_assert_eq!(BlockHeader::from_raw(h.raw()), h);
        }
    }
}
