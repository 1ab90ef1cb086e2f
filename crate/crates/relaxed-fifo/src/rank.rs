//! Rank-error measurement.
//!
//! A pop has rank error `r` when `r` elements that were pushed earlier are
//! still in the queue at the moment of the pop. The strict queue always has
//! rank error 0; the relaxed queues trade rank errors for throughput.
//!
//! Measurement is offline: while recording is enabled, every operation stamps
//! itself with a shared fetch-and-add clock and appends an [`OpRecord`] to a
//! per-thread log. After the run the logs are merged by stamp and [`replay`]
//! simulates the resulting sequential history, charging each pop the number of
//! live elements with an older push stamp. The recorded order only
//! approximates the true linearization order of a concurrent run, so
//! concurrent measurements are statistical, not exact.

use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::element::{Element, EMPTY};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Push,
    Pop,
}

/// One timestamped queue operation. Failed pops are recorded with
/// `value == EMPTY` and are ignored by the replay.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpRecord {
    pub stamp: u64,
    pub kind: OpKind,
    pub value: Element,
}

/// Shared stamp source for one recorded run.
pub fn recording_clock() -> Arc<AtomicU64> {
    Arc::new(AtomicU64::new(0))
}

/// Per-handle operation log. Stamps are taken as close to the operation's
/// linearization point as the queue implementations allow: pushes right after
/// the commit, pops right after the element is reserved or removed.
pub struct Recorder {
    clock: Arc<AtomicU64>,
    log: Vec<OpRecord>,
}

impl Recorder {
    pub fn new(clock: Arc<AtomicU64>, capacity: usize) -> Self {
        Recorder {
            clock,
            log: Vec::with_capacity(capacity),
        }
    }

    #[inline]
    pub(crate) fn record(&mut self, kind: OpKind, value: Element) {
        let stamp = self.clock.fetch_add(1, Ordering::Relaxed);
        self.log.push(OpRecord { stamp, kind, value });
    }

    pub(crate) fn into_log(self) -> Vec<OpRecord> {
        self.log
    }
}

/// Merges per-thread logs (each already stamp-ascending) into one replayable
/// trace.
///
/// Stamps are taken right after an operation completes, so a thread preempted
/// between committing a push and stamping it can be overtaken by the pop of
/// that very element: the merged order then shows the pop before its push.
/// Such inversions are repaired by delaying each orphan pop to directly after
/// its matching push, and the result is re-stamped sequentially. Pops that
/// never find a matching push are kept (at the end), so the replay still
/// rejects genuinely corrupt logs.
pub fn merge_logs(logs: Vec<Vec<OpRecord>>) -> Vec<OpRecord> {
    repair_stamp_skew(merge_by_stamp(logs))
}

fn merge_by_stamp(logs: Vec<Vec<OpRecord>>) -> Vec<OpRecord> {
    let total = logs.iter().map(Vec::len).sum();
    let mut merged = Vec::with_capacity(total);

    struct Head {
        stamp: u64,
        log: usize,
    }
    impl PartialEq for Head {
        fn eq(&self, other: &Self) -> bool {
            self.stamp == other.stamp
        }
    }
    impl Eq for Head {}
    impl PartialOrd for Head {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Head {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            // reversed for a min-heap
            other.stamp.cmp(&self.stamp)
        }
    }

    let mut cursors: Vec<std::vec::IntoIter<OpRecord>> =
        logs.into_iter().map(Vec::into_iter).collect();
    let mut heap = BinaryHeap::with_capacity(cursors.len());
    let mut pending: Vec<Option<OpRecord>> = Vec::with_capacity(cursors.len());
    for (i, cur) in cursors.iter_mut().enumerate() {
        let head = cur.next();
        if let Some(rec) = head {
            heap.push(Head {
                stamp: rec.stamp,
                log: i,
            });
        }
        pending.push(head);
    }
    while let Some(Head { log, .. }) = heap.pop() {
        let rec = pending[log].take().expect("heap entry without record");
        merged.push(rec);
        if let Some(next) = cursors[log].next() {
            heap.push(Head {
                stamp: next.stamp,
                log,
            });
            pending[log] = Some(next);
        }
    }
    merged
}

fn repair_stamp_skew(records: Vec<OpRecord>) -> Vec<OpRecord> {
    let mut live: HashMap<u64, u64> = HashMap::new();
    let mut orphans: HashMap<u64, VecDeque<OpRecord>> = HashMap::new();
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        match rec.kind {
            OpKind::Push => {
                out.push(rec);
                match orphans.entry(rec.value) {
                    Entry::Occupied(mut slot) => {
                        // a pop whose stamp beat its push: replay it here
                        let pop = slot.get_mut().pop_front().expect("non-empty orphan queue");
                        if slot.get().is_empty() {
                            slot.remove();
                        }
                        out.push(pop);
                    }
                    Entry::Vacant(_) => *live.entry(rec.value).or_insert(0) += 1,
                }
            }
            OpKind::Pop => {
                if rec.value == EMPTY {
                    out.push(rec);
                    continue;
                }
                match live.get_mut(&rec.value) {
                    Some(count) if *count > 0 => {
                        *count -= 1;
                        out.push(rec);
                    }
                    _ => orphans.entry(rec.value).or_default().push_back(rec),
                }
            }
        }
    }
    // whatever is left cannot be explained by stamp skew; surface it
    let mut unmatched: Vec<OpRecord> = orphans.into_values().flatten().collect();
    unmatched.sort_unstable_by_key(|r| r.stamp);
    out.extend(unmatched);
    for (at, rec) in out.iter_mut().enumerate() {
        rec.stamp = at as u64;
    }
    out
}

/// Aggregated rank errors of one replayed trace.
///
/// The histogram buckets by powers of two: bucket 0 counts rank error 0,
/// bucket `k` counts errors in `[2^(k-1), 2^k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankReport {
    pub count: u64,
    pub mean: f64,
    pub max: u64,
    pub histogram: Vec<u64>,
}

/// Column names matching [`RankReport::csv_row`].
pub const RANK_CSV_HEADER: &str = "count,mean,max,p50,p99,p999";

impl RankReport {
    fn bucket(error: u64) -> usize {
        if error == 0 {
            0
        } else {
            64 - error.leading_zeros() as usize
        }
    }

    /// Serializes the report as `count,mean,max,p50,p99,p999`; the
    /// percentiles are histogram-bucket upper bounds.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.4},{},{},{},{}",
            self.count,
            self.mean,
            self.max,
            self.percentile(0.5),
            self.percentile(0.99),
            self.percentile(0.999)
        )
    }

    /// Upper bound of the bucket containing the q-quantile (q in [0, 1]).
    pub fn percentile(&self, q: f64) -> u64 {
        if self.count == 0 {
            return 0;
        }
        let threshold = (q * self.count as f64).ceil() as u64;
        let mut seen = 0;
        for (bucket, &n) in self.histogram.iter().enumerate() {
            seen += n;
            if seen >= threshold.max(1) {
                return if bucket == 0 { 0 } else { (1u64 << bucket) - 1 };
            }
        }
        self.max
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("record {index}: pop of value {value:#x} (stamp {stamp}) has no matching live push")]
    UnmatchedPop { index: usize, stamp: u64, value: u64 },
    #[error("records are not sorted by stamp at index {index}")]
    UnsortedStamps { index: usize },
}

/// Replays a stamp-sorted trace against a sequential queue ordered by push
/// stamp and aggregates the rank error of every successful pop.
///
/// Runs in O(n log n): live elements are tracked in a Fenwick tree indexed by
/// push arrival rank, so counting the live predecessors of a popped element is
/// a single prefix sum. Pops of `EMPTY` (failed pops) contribute nothing. A
/// pop whose value has no live matching push is reported as an error; when a
/// value was pushed several times, pops match the oldest live push.
pub fn replay(records: &[OpRecord]) -> Result<RankReport, ReplayError> {
    let push_total = records.iter().filter(|r| r.kind == OpKind::Push).count();
    let mut live = FenwickTree::new(push_total);
    // value -> FIFO queue of live push ranks
    let mut by_value: HashMap<u64, VecDeque<usize>> = HashMap::new();
    let mut next_rank = 0;

    let mut count = 0u64;
    let mut sum = 0u64;
    let mut max = 0u64;
    let mut histogram = vec![0u64; 1];

    let mut last_stamp = None;
    for (index, rec) in records.iter().enumerate() {
        if last_stamp.is_some_and(|s| rec.stamp <= s) {
            return Err(ReplayError::UnsortedStamps { index });
        }
        last_stamp = Some(rec.stamp);

        match rec.kind {
            OpKind::Push => {
                live.add(next_rank, 1);
                by_value.entry(rec.value).or_default().push_back(next_rank);
                next_rank += 1;
            }
            OpKind::Pop => {
                if rec.value == EMPTY {
                    continue;
                }
                let rank = match by_value.entry(rec.value) {
                    Entry::Occupied(mut slot) => {
                        let rank = slot.get_mut().pop_front();
                        if slot.get().is_empty() {
                            slot.remove();
                        }
                        rank
                    }
                    Entry::Vacant(_) => None,
                };
                let Some(rank) = rank else {
                    return Err(ReplayError::UnmatchedPop {
                        index,
                        stamp: rec.stamp,
                        value: rec.value,
                    });
                };
                let error = live.prefix_sum(rank);
                live.add(rank, -1);

                count += 1;
                sum += error;
                max = max.max(error);
                let bucket = RankReport::bucket(error);
                if bucket >= histogram.len() {
                    histogram.resize(bucket + 1, 0);
                }
                histogram[bucket] += 1;
            }
        }
    }

    let mean = if count == 0 {
        0.0
    } else {
        sum as f64 / count as f64
    };
    Ok(RankReport {
        count,
        mean,
        max,
        histogram,
    })
}

/// Fenwick tree over push arrival ranks; supports point update and prefix sum.
struct FenwickTree {
    tree: Vec<i64>,
}

impl FenwickTree {
    fn new(len: usize) -> Self {
        FenwickTree {
            tree: vec![0; len + 1],
        }
    }

    fn add(&mut self, index: usize, delta: i64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over ranks strictly below `index`.
    fn prefix_sum(&self, index: usize) -> u64 {
        let mut sum = 0i64;
        let mut i = index;
        while i > 0 {
            sum += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        debug_assert!(sum >= 0);
        sum as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn push(stamp: u64, value: u64) -> OpRecord {
        OpRecord {
            stamp,
            kind: OpKind::Push,
            value,
        }
    }

    fn pop(stamp: u64, value: u64) -> OpRecord {
        OpRecord {
            stamp,
            kind: OpKind::Pop,
            value,
        }
    }

    /// Quadratic reference: live elements kept in push order; the rank error
    /// of a pop is the position of the popped element in that list.
    pub(crate) fn brute_force_replay(records: &[OpRecord]) -> Result<RankReport, ()> {
        let mut live: Vec<u64> = Vec::new();
        let mut count = 0u64;
        let mut sum = 0u64;
        let mut max = 0u64;
        let mut histogram = vec![0u64; 1];
        for rec in records {
            match rec.kind {
                OpKind::Push => live.push(rec.value),
                OpKind::Pop => {
                    if rec.value == EMPTY {
                        continue;
                    }
                    let at = live.iter().position(|&v| v == rec.value).ok_or(())?;
                    live.remove(at);
                    let error = at as u64;
                    count += 1;
                    sum += error;
                    max = max.max(error);
                    let bucket = RankReport::bucket(error);
                    if bucket >= histogram.len() {
                        histogram.resize(bucket + 1, 0);
                    }
                    histogram[bucket] += 1;
                }
            }
        }
        let mean = if count == 0 {
            0.0
        } else {
            sum as f64 / count as f64
        };
        Ok(RankReport {
            count,
            mean,
            max,
            histogram,
        })
    }

    #[test]
    fn swapped_pair() {
        // push a, push b, pop b, pop a -> rank errors [1, 0]
        let trace = [push(0, 10), push(1, 11), pop(2, 11), pop(3, 10)];
        let report = replay(&trace).unwrap();
        assert_eq!(report.count, 2);
        assert_eq!(report.mean, 0.5);
        assert_eq!(report.max, 1);
        assert_eq!(report.histogram, vec![1, 1]);
    }

    #[test]
    fn strict_fifo_trace_has_zero_errors() {
        let mut trace = Vec::new();
        let mut stamp = 0;
        for v in 0..1000 {
            trace.push(push(stamp, v));
            stamp += 1;
        }
        for v in 0..1000 {
            trace.push(pop(stamp, v));
            stamp += 1;
        }
        let report = replay(&trace).unwrap();
        assert_eq!(report.count, 1000);
        assert_eq!(report.mean, 0.0);
        assert_eq!(report.max, 0);
    }

    #[test]
    fn failed_pops_contribute_nothing() {
        let trace = [pop(0, EMPTY), push(1, 7), pop(2, 7), pop(3, EMPTY)];
        let report = replay(&trace).unwrap();
        assert_eq!(report.count, 1);
        assert_eq!(report.max, 0);
    }

    #[test]
    fn unmatched_pop_is_rejected() {
        let trace = [push(0, 1), pop(1, 2)];
        assert_eq!(
            replay(&trace),
            Err(ReplayError::UnmatchedPop {
                index: 1,
                stamp: 1,
                value: 2
            })
        );
    }

    #[test]
    fn duplicate_values_match_oldest_push() {
        let trace = [push(0, 5), push(1, 9), push(2, 5), pop(3, 5), pop(4, 5)];
        let report = replay(&trace).unwrap();
        // First pop takes the rank-0 copy (error 0); second takes the copy
        // behind the live 9 (error 1).
        assert_eq!(report.count, 2);
        assert_eq!(report.max, 1);
        assert_eq!(report.mean, 0.5);
        assert_eq!(report, brute_force_replay(&trace).unwrap());
    }

    #[test]
    fn unsorted_stamps_rejected() {
        let trace = [push(5, 1), push(5, 2)];
        assert_eq!(replay(&trace), Err(ReplayError::UnsortedStamps { index: 1 }));
    }

    #[test]
    fn merge_is_stamp_sorted() {
        let logs = vec![
            vec![push(0, 1), push(4, 2)],
            vec![push(1, 3), push(2, 4)],
            vec![],
            vec![push(3, 5)],
        ];
        let merged = merge_logs(logs);
        let stamps: Vec<u64> = merged.iter().map(|r| r.stamp).collect();
        assert_eq!(stamps, vec![0, 1, 2, 3, 4]);
        let values: Vec<u64> = merged.iter().map(|r| r.value).collect();
        assert_eq!(values, vec![1, 3, 4, 5, 2]);
    }

    #[test]
    fn merge_repairs_pop_stamped_before_its_push() {
        // thread A pushed 7 but was preempted before stamping; thread B's pop
        // of 7 got the earlier stamp
        let logs = vec![vec![push(0, 6), push(3, 7)], vec![pop(1, 6), pop(2, 7)]];
        let merged = merge_logs(logs);
        let sequence: Vec<(OpKind, u64)> = merged.iter().map(|r| (r.kind, r.value)).collect();
        assert_eq!(
            sequence,
            vec![
                (OpKind::Push, 6),
                (OpKind::Pop, 6),
                (OpKind::Push, 7),
                (OpKind::Pop, 7),
            ]
        );
        let report = replay(&merged).unwrap();
        assert_eq!(report.count, 2);
    }

    #[test]
    fn merge_keeps_genuinely_unmatched_pops_for_rejection() {
        // a pop of a value that was never pushed is a logging bug, not skew
        let logs = vec![vec![push(0, 1), pop(2, 1)], vec![pop(1, 9)]];
        let merged = merge_logs(logs);
        assert_eq!(merged.len(), 3);
        assert!(matches!(
            replay(&merged),
            Err(ReplayError::UnmatchedPop { value: 9, .. })
        ));
    }

    #[test]
    fn percentiles_come_from_buckets() {
        let report = RankReport {
            count: 100,
            mean: 1.0,
            max: 9,
            histogram: vec![50, 25, 15, 6, 4],
        };
        assert_eq!(report.percentile(0.5), 0);
        assert_eq!(report.percentile(0.99), 15);
        assert_eq!(report.percentile(1.0), 15);
        assert_eq!(report.csv_row(), "100,1.0000,9,0,15,15");
    }

    proptest! {
        /// The Fenwick-based replay and the quadratic scan agree on random
        /// traces with out-of-order pops and duplicate values.
        #[test]
        fn replay_matches_brute_force(ops in proptest::collection::vec((0u8..4, 0u64..16), 1..400)) {
            let mut live: Vec<u64> = Vec::new();
            let mut trace = Vec::new();
            let mut stamp = 0;
            for (action, value) in ops {
                if action == 0 || live.is_empty() {
                    trace.push(push(stamp, value));
                    live.push(value);
                } else {
                    // pop a pseudo-random live element to create reordering
                    let at = (value as usize * 7 + action as usize) % live.len();
                    let v = live.remove(at);
                    trace.push(pop(stamp, v));
                }
                stamp += 1;
            }
            let fast = replay(&trace).unwrap();
            let slow = brute_force_replay(&trace).unwrap();
            prop_assert_eq!(fast, slow);
        }
    }
}
