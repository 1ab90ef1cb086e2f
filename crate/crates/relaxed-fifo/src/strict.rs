//! Strict FIFO baseline: a bounded ring buffer behind one mutex.
//!
//! Every operation serializes on the lock, so pops always return elements in
//! exact insertion order (rank error 0). The queue exists as a correctness
//! oracle and as the lower bound in throughput comparisons, not as a
//! competitive design.

use std::sync::atomic::AtomicU64;
use std::sync::{Arc, Mutex};

use crate::element::{Element, EMPTY};
use crate::fifo::{Fifo, FifoHandle};
use crate::rank::{OpKind, OpRecord, Recorder};

pub struct StrictQueue {
    inner: Mutex<Ring>,
    capacity: usize,
}

struct Ring {
    buf: Box<[Element]>,
    head: usize,
    len: usize,
}

impl StrictQueue {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be non-zero");
        StrictQueue {
            inner: Mutex::new(Ring {
                buf: vec![EMPTY; capacity].into_boxed_slice(),
                head: 0,
                len: 0,
            }),
            capacity,
        }
    }

    /// Appends at the tail; returns false iff the queue is full.
    pub fn push(&self, value: Element) -> bool {
        assert_ne!(value, EMPTY, "the sentinel cannot be pushed");
        let mut ring = self.inner.lock().unwrap();
        if ring.len == self.capacity {
            return false;
        }
        let at = (ring.head + ring.len) % self.capacity;
        ring.buf[at] = value;
        ring.len += 1;
        true
    }

    /// Removes the oldest element; `None` iff the queue is empty.
    pub fn pop(&self) -> Option<Element> {
        let mut ring = self.inner.lock().unwrap();
        if ring.len == 0 {
            return None;
        }
        let value = ring.buf[ring.head];
        ring.head = (ring.head + 1) % self.capacity;
        ring.len -= 1;
        Some(value)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub struct StrictHandle<'q> {
    queue: &'q StrictQueue,
    recorder: Option<Recorder>,
}

impl Fifo for StrictQueue {
    type Handle<'q> = StrictHandle<'q>
    where
        Self: 'q;

    fn handle(&self, _thread_id: usize) -> StrictHandle<'_> {
        StrictHandle {
            queue: self,
            recorder: None,
        }
    }

    fn capacity(&self) -> usize {
        self.capacity
    }
}

impl FifoHandle for StrictHandle<'_> {
    fn push(&mut self, value: Element) -> bool {
        let ok = self.queue.push(value);
        if ok {
            if let Some(rec) = self.recorder.as_mut() {
                rec.record(OpKind::Push, value);
            }
        }
        ok
    }

    fn pop(&mut self) -> Option<Element> {
        let popped = self.queue.pop();
        if let Some(rec) = self.recorder.as_mut() {
            rec.record(OpKind::Pop, popped.unwrap_or(EMPTY));
        }
        popped
    }

    fn enable_recording(&mut self, clock: Arc<AtomicU64>, capacity: usize) {
        self.recorder = Some(Recorder::new(clock, capacity));
    }

    fn take_records(&mut self) -> Vec<OpRecord> {
        self.recorder.take().map(Recorder::into_log).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_into_empty() {
        let q = StrictQueue::new(4);
        assert!(q.push(7));
        assert_eq!(q.len(), 1);
        assert_eq!(q.pop(), Some(7));
    }

    #[test]
    fn push_into_full_fails() {
        let q = StrictQueue::new(3);
        for v in 0..3 {
            assert!(q.push(v));
        }
        assert!(!q.push(1));
        assert_eq!(q.len(), 3);
    }

    #[test]
    fn fifo_order_preserved() {
        let q = StrictQueue::new(8);
        for v in [1, 2, 3] {
            assert!(q.push(v));
        }
        assert_eq!(q.pop(), Some(1));
        assert_eq!(q.pop(), Some(2));
        assert_eq!(q.pop(), Some(3));
    }

    #[test]
    fn pop_empty_fails() {
        let q = StrictQueue::new(2);
        assert_eq!(q.pop(), None);
        assert!(q.push(5));
        assert_eq!(q.pop(), Some(5));
        assert_eq!(q.pop(), None);
    }

    #[test]
    fn wraps_around() {
        let q = StrictQueue::new(2);
        for round in 0..10 {
            assert!(q.push(round));
            assert_eq!(q.pop(), Some(round));
        }
    }

    #[test]
    #[should_panic(expected = "sentinel")]
    fn sentinel_rejected() {
        let q = StrictQueue::new(2);
        q.push(EMPTY);
    }

    #[test]
    fn recording_stamps_form_a_permutation() {
        use crate::fifo::{Fifo, FifoHandle};
        use crate::rank::{recording_clock, OpKind};

        let q = StrictQueue::new(64);
        let mut h = q.handle(0);
        h.enable_recording(recording_clock(), 64);
        let n = 20u64;
        for v in 0..n {
            assert!(FifoHandle::push(&mut h, v));
        }
        for _ in 0..n {
            assert!(FifoHandle::pop(&mut h).is_some());
        }
        let records = h.take_records();
        assert_eq!(records.len() as u64, 2 * n);
        let stamps: Vec<u64> = records.iter().map(|r| r.stamp).collect();
        assert_eq!(stamps, (0..2 * n).collect::<Vec<u64>>());
        assert_eq!(records.iter().filter(|r| r.kind == OpKind::Push).count() as u64, n);
        // a disabled recorder produces nothing
        let mut quiet = q.handle(0);
        assert!(FifoHandle::push(&mut quiet, 1));
        assert!(quiet.take_records().is_empty());
    }
}
