//! Micro-benchmark CLI.
//!
//! Example:
//!   bench --workload pushpop --queue bf --threads 8 --duration-s 5 \
//!         --bf-block-size 511 --record-ranks --csv results.csv

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, ValueEnum};

use relaxed_fifo::bench::{
    append_csv, default_prefill, run_prodcon, run_push_pop, write_csv, BenchConfig, BenchError,
    BenchResult, CsvRow,
};
use relaxed_fifo::{BlockFifo, BlockFifoParams, Fifo, MultiFifo, MultiFifoParams, StrictQueue};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WorkloadArg {
    Pushpop,
    Prodcon,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QueueArg {
    Bf,
    Mf,
    Strict,
}

#[derive(Parser)]
#[command(name = "bench", about = "Throughput and rank-error micro-benchmarks")]
struct Args {
    #[arg(long, value_enum)]
    workload: WorkloadArg,
    #[arg(long, value_enum)]
    queue: QueueArg,
    #[arg(long)]
    threads: usize,
    /// Producer count (prodcon only).
    #[arg(long)]
    producers: Option<usize>,
    /// Consumer count (prodcon only).
    #[arg(long)]
    consumers: Option<usize>,
    /// Elements pre-inserted before the measurement; defaults to a size that
    /// keeps the queue from running empty.
    #[arg(long)]
    prefill: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    duration_s: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Record every operation and report rank-error statistics.
    #[arg(long)]
    record_ranks: bool,
    /// Pin workers to hardware threads (best effort).
    #[arg(long)]
    pin: bool,
    /// Disable the block ring's occupancy bitset.
    #[arg(long)]
    no_bitset: bool,
    /// Blocks per window per thread (B).
    #[arg(long, default_value_t = 1)]
    bf_block_factor: usize,
    /// Cells per block (C).
    #[arg(long, default_value_t = 63)]
    bf_block_size: usize,
    /// Ring length in windows (k); sized automatically when omitted.
    #[arg(long)]
    bf_ring_factor: Option<usize>,
    /// Sub-queues per thread (c).
    #[arg(long, default_value_t = 2)]
    mf_queue_factor: usize,
    /// Sticky operations per random choice (s).
    #[arg(long, default_value_t = 1)]
    mf_stickiness: u32,
    /// Per-sub-queue capacity (m); sized automatically when omitted.
    #[arg(long)]
    mf_subqueue_cap: Option<usize>,
    /// Strict-queue capacity; sized automatically when omitted.
    #[arg(long)]
    capacity: Option<usize>,
    /// Append rows to this CSV (header written once); stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Repetitions per configuration.
    #[arg(long, default_value_t = 5)]
    reps: usize,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(rows) => {
            let result = match &args.csv {
                Some(path) => append_csv(path, &rows),
                None => write_csv(&mut std::io::stdout().lock(), &rows),
            };
            if let Err(err) = result {
                eprintln!("bench: csv output failed: {err}");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(BenchError::InvalidConfig(msg)) => {
            eprintln!("bench: invalid configuration: {msg}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("bench: {err}");
            ExitCode::from(1)
        }
    }
}

fn run(args: &Args) -> Result<Vec<CsvRow>, BenchError> {
    let workload = match args.workload {
        WorkloadArg::Pushpop => "pushpop",
        WorkloadArg::Prodcon => "prodcon",
    };
    let largest_param = match args.queue {
        QueueArg::Bf => args.bf_block_size,
        QueueArg::Mf => args.mf_queue_factor,
        QueueArg::Strict => 1,
    };
    let prefill = args
        .prefill
        .unwrap_or_else(|| default_prefill(args.threads, largest_param));

    let mut rows = Vec::with_capacity(args.reps);
    for rep in 0..args.reps {
        let seed = args.seed.wrapping_add(rep as u64);
        let cfg = BenchConfig {
            threads: args.threads,
            producers: args.producers.unwrap_or(args.threads / 2),
            consumers: args
                .consumers
                .unwrap_or(args.threads - args.threads / 2),
            prefill,
            duration: Duration::from_secs_f64(args.duration_s),
            seed,
            record_ranks: args.record_ranks,
            pin: args.pin,
            verify_conservation: false,
        };
        let row = match args.queue {
            QueueArg::Bf => {
                let params = BlockFifoParams {
                    threads: args.threads,
                    block_factor: args.bf_block_factor,
                    block_size: args.bf_block_size,
                    ring_factor: args.bf_ring_factor.unwrap_or(3),
                    seed,
                    use_bitset: !args.no_bitset,
                };
                let params = match args.bf_ring_factor {
                    Some(_) => params,
                    None => params.with_usable_capacity(2 * prefill + 64 * args.threads),
                };
                let queue = BlockFifo::new(params.clone());
                let result = dispatch(&queue, &cfg, workload)?;
                let param_str = format!(
                    "B={};C={};k={};bitset={}{}",
                    params.block_factor,
                    params.block_size,
                    params.ring_factor,
                    if params.use_bitset { "on" } else { "off" },
                    pin_note(&result)
                );
                CsvRow::from_result("bf", param_str, workload, &cfg, &result)
            }
            QueueArg::Mf => {
                let params = MultiFifoParams {
                    threads: args.threads,
                    queue_factor: args.mf_queue_factor,
                    stickiness: args.mf_stickiness,
                    sub_queue_capacity: args.mf_subqueue_cap.unwrap_or(1),
                    seed,
                };
                let params = match args.mf_subqueue_cap {
                    Some(_) => params,
                    None => params.with_total_capacity(2 * prefill + 64 * args.threads),
                };
                let queue = MultiFifo::new(params.clone());
                let result = dispatch(&queue, &cfg, workload)?;
                let param_str = format!(
                    "c={};s={};m={}{}",
                    params.queue_factor,
                    params.stickiness,
                    params.sub_queue_capacity,
                    pin_note(&result)
                );
                CsvRow::from_result("mf", param_str, workload, &cfg, &result)
            }
            QueueArg::Strict => {
                let capacity = args.capacity.unwrap_or(2 * prefill + 64 * args.threads + 1024);
                let queue = StrictQueue::new(capacity);
                let result = dispatch(&queue, &cfg, workload)?;
                let param_str = format!("capacity={}{}", capacity, pin_note(&result));
                CsvRow::from_result("strict", param_str, workload, &cfg, &result)
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

fn dispatch<Q: Fifo>(
    queue: &Q,
    cfg: &BenchConfig,
    workload: &'static str,
) -> Result<BenchResult, BenchError> {
    if workload == "pushpop" {
        run_push_pop(queue, cfg)
    } else {
        run_prodcon(queue, cfg)
    }
}

fn pin_note(result: &BenchResult) -> String {
    match result.pinned {
        Some(true) => ";pin=ok".to_string(),
        Some(false) => ";pin=failed".to_string(),
        None => String::new(),
    }
}
