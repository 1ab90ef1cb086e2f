//! Relaxed concurrent FIFO queues.
//!
//! Strict concurrent FIFO queues serialize every operation on the head and
//! tail of the queue, which caps their throughput no matter how many threads
//! participate. The queues in this crate trade a bounded amount of reordering
//! (measured as *rank error*: how many older elements a pop skipped over) for
//! drastically reduced contention:
//!
//! * [`BlockFifo`] — a bounded, lock-free ring of fixed-size blocks. Pushes
//!   claim private blocks inside a sliding *push window*, pops drain blocks
//!   inside a *pop window* trailing behind it. Block headers pack an epoch,
//!   both counters, and a claim bit into one word, so every state transition
//!   is a single CAS and a recycled block can never be confused with an old
//!   one.
//! * [`MultiFifo`] — an array of `c * p` small lock-protected ring buffers of
//!   timestamped elements. Pushes pick one buffer at random, pops sample two
//!   and take the older head.
//! * [`StrictQueue`] — a mutex-guarded ring buffer used as the exact-FIFO
//!   baseline and as an oracle in tests.
//!
//! The companion modules measure what the relaxation costs: [`rank`] records
//! per-operation logs and replays them into rank-error statistics, [`bench`]
//! drives push-pop and producer-consumer workloads, and [`bfs`] runs a
//! parallel breadth-first search on top of any of the queues.
//!
//! All randomness is drawn from per-handle generators seeded from the queue's
//! root seed, so runs are reproducible.

// Test-only scheduler hook, used to force specific interleavings and to
// inject stalls at CAS boundaries. Compiles to nothing outside `cfg(test)`.
#[cfg(test)]
macro_rules! hook {
    ($point:literal) => {
        crate::test_hooks::fire($point)
    };
}
#[cfg(not(test))]
macro_rules! hook {
    ($point:literal) => {};
}

pub mod bench;
pub mod bfs;
pub mod bitset;
pub mod blockfifo;
mod element;
mod fifo;
mod header;
pub mod multififo;
mod pad;
pub mod rank;
pub mod strict;

pub use element::{Element, EMPTY};
pub use fifo::{Fifo, FifoHandle};
pub use blockfifo::{BlockFifo, BlockFifoParams};
pub use multififo::{MultiFifo, MultiFifoParams};
pub use strict::StrictQueue;

#[cfg(test)]
pub(crate) mod test_hooks {
    use std::cell::RefCell;

    type Hook = Box<dyn FnMut(&'static str)>;

    thread_local! {
        static HOOK: RefCell<Option<Hook>> = const { RefCell::new(None) };
    }

    /// Installs a hook for the current thread. The hook must not call back
    /// into any queue operation.
    pub fn install(hook: impl FnMut(&'static str) + 'static) {
        HOOK.with(|slot| *slot.borrow_mut() = Some(Box::new(hook)));
    }

    pub fn clear() {
        HOOK.with(|slot| *slot.borrow_mut() = None);
    }

    pub fn fire(point: &'static str) {
        HOOK.with(|slot| {
            if let Some(hook) = slot.borrow_mut().as_mut() {
                hook(point);
            }
        });
    }
}
