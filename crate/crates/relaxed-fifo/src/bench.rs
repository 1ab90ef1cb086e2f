//! Micro-benchmark harness: push-pop and producer-consumer workloads over any
//! queue in the crate, with optional rank-error recording and CSV output.
//!
//! * push-pop: every worker alternates one push and one pop, keeping the
//!   population constant around the prefill; throughput is iterations per
//!   second and the run is rejected if any operation failed.
//! * producer-consumer: a fixed split of threads pushes while the rest pops;
//!   the queue may legitimately run full or empty, failed operations are
//!   counted and retried, and throughput is the minimum of completed pushes
//!   and pops per second.

use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Barrier};
use std::time::{Duration, Instant};

use crate::element::Element;
use crate::fifo::{Fifo, FifoHandle};
use crate::rank::{self, merge_logs, replay, OpRecord, RankReport};

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub threads: usize,
    /// Producer-consumer split; ignored by push-pop.
    pub producers: usize,
    pub consumers: usize,
    pub prefill: usize,
    pub duration: Duration,
    /// Reported in the CSV; the queues carry their own seeds.
    pub seed: u64,
    pub record_ranks: bool,
    pub pin: bool,
    /// Drain the queue afterwards and check that nothing was lost or
    /// duplicated (producer-consumer only; meant for tests).
    pub verify_conservation: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            threads: 1,
            producers: 1,
            consumers: 1,
            prefill: 1024,
            duration: Duration::from_secs(1),
            seed: 1,
            record_ranks: false,
            pin: false,
            verify_conservation: false,
        }
    }
}

/// Default prefill when none is given: large enough that neither workload
/// drains or fills the queue in steady state.
pub fn default_prefill(threads: usize, largest_tuning_param: usize) -> usize {
    100_000usize.max(100 * threads * largest_tuning_param.max(1))
}

#[derive(Debug)]
pub struct BenchResult {
    pub ops_per_sec: f64,
    pub wall_seconds: f64,
    pub per_thread_ops: Vec<u64>,
    pub failed_pushes: u64,
    pub failed_pops: u64,
    /// Whether every worker was successfully pinned (when pinning was on).
    pub pinned: Option<bool>,
    pub ranks: Option<RankReport>,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("run invalidated: {failed_pushes} failed pushes, {failed_pops} failed pops")]
    FailedOperations { failed_pushes: u64, failed_pops: u64 },
    #[error("conservation violated: {0}")]
    Conservation(String),
    #[error(transparent)]
    Replay(#[from] rank::ReplayError),
    #[error("csv: {0}")]
    Io(#[from] io::Error),
}

/// Benchmark payloads encode the pushing thread and a per-thread counter, so
/// every value is distinct and pops can be matched back to pushes.
pub fn encode_value(thread: usize, counter: u64) -> Element {
    debug_assert!(thread < 1 << 16);
    debug_assert!(counter < 1 << 48);
    ((thread as u64) << 48) | counter
}

pub fn decode_value(value: Element) -> (usize, u64) {
    ((value >> 48) as usize, value & ((1 << 48) - 1))
}

/// Pins the calling thread to one hardware thread; best effort.
#[cfg(target_os = "linux")]
pub fn pin_current_thread(cpu: usize) -> bool {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let target = cpu % cores;
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_ZERO(&mut set);
        libc::CPU_SET(target, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
    }
}

#[cfg(not(target_os = "linux"))]
pub fn pin_current_thread(_cpu: usize) -> bool {
    false
}

struct WorkerOutcome {
    ops: u64,
    pushes: u64,
    pops: u64,
    failed_pushes: u64,
    failed_pops: u64,
    pinned: bool,
    records: Vec<OpRecord>,
    popped_values: Vec<Element>,
}

/// Prefills the queue with distinct values tagged with a pseudo-thread id one
/// past the worker range.
fn prefill<Q: Fifo>(
    queue: &Q,
    cfg: &BenchConfig,
    clock: Option<&Arc<std::sync::atomic::AtomicU64>>,
) -> Result<Vec<OpRecord>, BenchError> {
    let mut handle = queue.handle(0);
    if let Some(clock) = clock {
        handle.enable_recording(Arc::clone(clock), cfg.prefill + 1);
    }
    for i in 0..cfg.prefill {
        if !handle.push(encode_value(cfg.threads, i as u64)) {
            return Err(BenchError::InvalidConfig(format!(
                "queue filled after {i} of {} prefill elements",
                cfg.prefill
            )));
        }
    }
    Ok(handle.take_records())
}

/// Alternating push-pop workload. Zero failed operations are tolerated: the
/// configuration must size capacity and prefill so the queue never runs full
/// or empty.
pub fn run_push_pop<Q: Fifo>(queue: &Q, cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    if cfg.threads == 0 {
        return Err(BenchError::InvalidConfig("at least one thread".into()));
    }
    if queue.capacity() <= cfg.prefill + cfg.threads {
        return Err(BenchError::InvalidConfig(format!(
            "capacity {} must exceed prefill {} plus threads {}",
            queue.capacity(),
            cfg.prefill,
            cfg.threads
        )));
    }
    if cfg.prefill < cfg.threads {
        return Err(BenchError::InvalidConfig(format!(
            "prefill {} cannot cover the transient drain of {} threads",
            cfg.prefill, cfg.threads
        )));
    }

    let clock = cfg.record_ranks.then(rank::recording_clock);
    let prefill_log = prefill(queue, cfg, clock.as_ref())?;

    let stop = AtomicBool::new(false);
    let barrier = Barrier::new(cfg.threads + 1);
    let mut outcomes: Vec<WorkerOutcome> = Vec::with_capacity(cfg.threads);
    let mut wall = 0.0f64;

    std::thread::scope(|s| {
        let mut joins = Vec::with_capacity(cfg.threads);
        for tid in 0..cfg.threads {
            let mut handle = queue.handle(tid);
            if let Some(clock) = &clock {
                handle.enable_recording(Arc::clone(clock), 1 << 16);
            }
            let stop = &stop;
            let barrier = &barrier;
            let pin = cfg.pin;
            joins.push(s.spawn(move || {
                let pinned = if pin { pin_current_thread(tid) } else { false };
                barrier.wait();
                let mut counter = 0u64;
                let mut ops = 0u64;
                let mut pops = 0u64;
                let mut failed_pushes = 0u64;
                let mut failed_pops = 0u64;
                while !stop.load(Ordering::Relaxed) {
                    let value = encode_value(tid, counter);
                    if handle.push(value) {
                        counter += 1;
                    } else {
                        failed_pushes += 1;
                    }
                    match handle.pop() {
                        Some(_) => pops += 1,
                        None => failed_pops += 1,
                    }
                    ops += 1;
                }
                WorkerOutcome {
                    ops,
                    pushes: counter,
                    pops,
                    failed_pushes,
                    failed_pops,
                    pinned,
                    records: handle.take_records(),
                    popped_values: Vec::new(),
                }
            }));
        }
        barrier.wait();
        let started = Instant::now();
        std::thread::sleep(cfg.duration);
        stop.store(true, Ordering::Relaxed);
        wall = started.elapsed().as_secs_f64();
        for join in joins {
            outcomes.push(join.join().expect("worker panicked"));
        }
    });

    let failed_pushes: u64 = outcomes.iter().map(|o| o.failed_pushes).sum();
    let failed_pops: u64 = outcomes.iter().map(|o| o.failed_pops).sum();
    if failed_pushes + failed_pops > 0 {
        return Err(BenchError::FailedOperations {
            failed_pushes,
            failed_pops,
        });
    }

    let ranks = finish_recording(cfg, prefill_log, &mut outcomes)?;
    let total_ops: u64 = outcomes.iter().map(|o| o.ops).sum();
    Ok(BenchResult {
        ops_per_sec: total_ops as f64 / wall,
        wall_seconds: wall,
        per_thread_ops: outcomes.iter().map(|o| o.ops).collect(),
        failed_pushes,
        failed_pops,
        pinned: cfg.pin.then(|| outcomes.iter().all(|o| o.pinned)),
        ranks,
    })
}

/// Split-role workload: `producers` threads push, `consumers` threads pop.
/// The queue may run full or empty; failures are counted and the losing side
/// retries. Throughput is `min(pushes, pops) / duration`.
pub fn run_prodcon<Q: Fifo>(queue: &Q, cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    if cfg.producers == 0 || cfg.consumers == 0 {
        return Err(BenchError::InvalidConfig(
            "need at least one producer and one consumer".into(),
        ));
    }
    if cfg.producers + cfg.consumers != cfg.threads {
        return Err(BenchError::InvalidConfig(format!(
            "producers {} + consumers {} must equal threads {}",
            cfg.producers, cfg.consumers, cfg.threads
        )));
    }
    if queue.capacity() <= cfg.prefill + cfg.threads {
        return Err(BenchError::InvalidConfig(format!(
            "capacity {} must exceed prefill {} plus threads {}",
            queue.capacity(),
            cfg.prefill,
            cfg.threads
        )));
    }

    let clock = cfg.record_ranks.then(rank::recording_clock);
    let prefill_log = prefill(queue, cfg, clock.as_ref())?;

    let stop = AtomicBool::new(false);
    let barrier = Barrier::new(cfg.threads + 1);
    let mut outcomes: Vec<WorkerOutcome> = Vec::with_capacity(cfg.threads);
    let mut wall = 0.0f64;

    std::thread::scope(|s| {
        let mut joins = Vec::with_capacity(cfg.threads);
        for tid in 0..cfg.threads {
            let mut handle = queue.handle(tid);
            if let Some(clock) = &clock {
                handle.enable_recording(Arc::clone(clock), 1 << 16);
            }
            let stop = &stop;
            let barrier = &barrier;
            let pin = cfg.pin;
            let is_producer = tid < cfg.producers;
            let collect = cfg.verify_conservation;
            joins.push(s.spawn(move || {
                let pinned = if pin { pin_current_thread(tid) } else { false };
                barrier.wait();
                let mut counter = 0u64;
                let mut ops = 0u64;
                let mut pops = 0u64;
                let mut failed_pushes = 0u64;
                let mut failed_pops = 0u64;
                let mut popped_values = Vec::new();
                while !stop.load(Ordering::Relaxed) {
                    if is_producer {
                        if handle.push(encode_value(tid, counter)) {
                            counter += 1;
                        } else {
                            failed_pushes += 1;
                            std::hint::spin_loop();
                        }
                    } else {
                        match handle.pop() {
                            Some(v) => {
                                pops += 1;
                                if collect {
                                    popped_values.push(v);
                                }
                            }
                            None => {
                                failed_pops += 1;
                                std::hint::spin_loop();
                            }
                        }
                    }
                    ops += 1;
                }
                WorkerOutcome {
                    ops,
                    pushes: counter,
                    pops,
                    failed_pushes,
                    failed_pops,
                    pinned,
                    records: handle.take_records(),
                    popped_values,
                }
            }));
        }
        barrier.wait();
        let started = Instant::now();
        std::thread::sleep(cfg.duration);
        stop.store(true, Ordering::Relaxed);
        wall = started.elapsed().as_secs_f64();
        for join in joins {
            outcomes.push(join.join().expect("worker panicked"));
        }
    });

    if cfg.verify_conservation {
        verify_prodcon_conservation(queue, cfg, &mut outcomes)?;
    }

    let ranks = finish_recording(cfg, prefill_log, &mut outcomes)?;
    let pushes: u64 = outcomes.iter().map(|o| o.pushes).sum();
    let pops: u64 = outcomes.iter().map(|o| o.pops).sum();
    Ok(BenchResult {
        ops_per_sec: pushes.min(pops) as f64 / wall,
        wall_seconds: wall,
        per_thread_ops: outcomes.iter().map(|o| o.ops).collect(),
        failed_pushes: outcomes.iter().map(|o| o.failed_pushes).sum(),
        failed_pops: outcomes.iter().map(|o| o.failed_pops).sum(),
        pinned: cfg.pin.then(|| outcomes.iter().all(|o| o.pinned)),
        ranks,
    })
}

fn finish_recording(
    cfg: &BenchConfig,
    prefill_log: Vec<OpRecord>,
    outcomes: &mut [WorkerOutcome],
) -> Result<Option<RankReport>, BenchError> {
    if !cfg.record_ranks {
        return Ok(None);
    }
    let mut logs = vec![prefill_log];
    for outcome in outcomes.iter_mut() {
        logs.push(std::mem::take(&mut outcome.records));
    }
    Ok(Some(replay(&merge_logs(logs))?))
}

/// Drains the leftover elements and checks that the popped-plus-drained
/// values are exactly the prefill plus everything the producers pushed.
fn verify_prodcon_conservation<Q: Fifo>(
    queue: &Q,
    cfg: &BenchConfig,
    outcomes: &mut [WorkerOutcome],
) -> Result<(), BenchError> {
    let mut seen: Vec<Element> = outcomes
        .iter_mut()
        .flat_map(|o| std::mem::take(&mut o.popped_values))
        .collect();
    let mut drain = queue.handle(0);
    while let Some(v) = drain.pop() {
        seen.push(v);
    }
    seen.sort_unstable();
    let mut expected: Vec<Element> = (0..cfg.prefill)
        .map(|i| encode_value(cfg.threads, i as u64))
        .collect();
    for (tid, outcome) in outcomes.iter().enumerate() {
        if tid < cfg.producers {
            expected.extend((0..outcome.pushes).map(|i| encode_value(tid, i)));
        }
    }
    expected.sort_unstable();
    if seen != expected {
        return Err(BenchError::Conservation(format!(
            "expected {} distinct elements, recovered {}",
            expected.len(),
            seen.len()
        )));
    }
    Ok(())
}

pub const CSV_HEADER: &str = "queue,params,workload,threads,producers,consumers,duration_s,ops_per_s,failed_pops,rank_mean,rank_max,rank_p99,seed";

#[derive(Clone, Debug)]
pub struct CsvRow {
    pub queue: String,
    pub params: String,
    pub workload: &'static str,
    pub threads: usize,
    pub producers: Option<usize>,
    pub consumers: Option<usize>,
    pub duration_s: f64,
    pub ops_per_s: f64,
    pub failed_pops: u64,
    pub rank_mean: Option<f64>,
    pub rank_max: Option<u64>,
    pub rank_p99: Option<u64>,
    pub seed: u64,
}

impl CsvRow {
    pub fn from_result(
        queue: impl Into<String>,
        params: impl Into<String>,
        workload: &'static str,
        cfg: &BenchConfig,
        result: &BenchResult,
    ) -> Self {
        let prodcon = workload == "prodcon";
        CsvRow {
            queue: queue.into(),
            params: params.into(),
            workload,
            threads: cfg.threads,
            producers: prodcon.then_some(cfg.producers),
            consumers: prodcon.then_some(cfg.consumers),
            duration_s: result.wall_seconds,
            ops_per_s: result.ops_per_sec,
            failed_pops: result.failed_pops,
            rank_mean: result.ranks.as_ref().map(|r| r.mean),
            rank_max: result.ranks.as_ref().map(|r| r.max),
            rank_p99: result.ranks.as_ref().map(|r| r.percentile(0.99)),
            seed: cfg.seed,
        }
    }

    fn write_to(&self, out: &mut impl Write) -> io::Result<()> {
        fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{:.1},{},{},{},{},{}",
            self.queue,
            self.params,
            self.workload,
            self.threads,
            opt(&self.producers),
            opt(&self.consumers),
            self.duration_s,
            self.ops_per_s,
            self.failed_pops,
            self.rank_mean.map(|m| format!("{m:.4}")).unwrap_or_default(),
            opt(&self.rank_max),
            opt(&self.rank_p99),
            self.seed,
        )
    }
}

/// Appends rows to `path`, writing the header first when the file is new or
/// empty.
pub fn append_csv(path: &Path, rows: &[CsvRow]) -> io::Result<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(file, "{CSV_HEADER}")?;
    }
    for row in rows {
        row.write_to(&mut file)?;
    }
    Ok(())
}

/// Writes rows to any sink (used for stdout output).
pub fn write_csv(out: &mut impl Write, rows: &[CsvRow]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        row.write_to(out)?;
    }
    Ok(())
}
