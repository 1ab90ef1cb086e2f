//! Parallel BFS CLI.
//!
//! Examples:
//!   bfs --graph gnm --n 16384 --avg-deg 64 --sources 8 --queue bf --threads 8
//!   bfs --graph file --path edges.txt --queue mf --threads 4 --verify

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use rand::rngs::SmallRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use relaxed_fifo::bfs::{
    distance_checksum, gen_gnm, parallel_bfs, read_edge_list, sequential_bfs,
    suggested_queue_capacity, BfsOutcome, Graph, MAX_SOURCES,
};
use relaxed_fifo::{BlockFifo, BlockFifoParams, MultiFifo, MultiFifoParams, StrictQueue};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphArg {
    Gnm,
    File,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QueueArg {
    Bf,
    Mf,
    Strict,
}

#[derive(Parser)]
#[command(name = "bfs", about = "Parallel breadth-first search over a relaxed FIFO")]
struct Args {
    #[arg(long, value_enum)]
    graph: GraphArg,
    /// Node count (gnm).
    #[arg(long)]
    n: Option<usize>,
    /// Average degree (gnm).
    #[arg(long, default_value_t = 64)]
    avg_deg: usize,
    /// Edge-list file (file).
    #[arg(long)]
    path: Option<PathBuf>,
    /// Number of simultaneous searches (sources sampled from the seed).
    #[arg(long, default_value_t = 1)]
    sources: usize,
    #[arg(long, value_enum)]
    queue: QueueArg,
    #[arg(long)]
    threads: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Append the result row to this CSV; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Check the parallel distances against the sequential oracle.
    #[arg(long)]
    verify: bool,
    /// Disable the block ring's occupancy bitset.
    #[arg(long)]
    no_bitset: bool,
    #[arg(long, default_value_t = 1)]
    bf_block_factor: usize,
    #[arg(long, default_value_t = 63)]
    bf_block_size: usize,
    #[arg(long)]
    bf_ring_factor: Option<usize>,
    #[arg(long, default_value_t = 2)]
    mf_queue_factor: usize,
    #[arg(long, default_value_t = 1)]
    mf_stickiness: u32,
    #[arg(long)]
    mf_subqueue_cap: Option<usize>,
}

const CSV_HEADER: &str = "graph,n,m,sources,queue,params,threads,time_s,stale_pops,checksum";

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("bfs: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(args: &Args) -> Result<ExitCode, String> {
    if args.threads == 0 {
        return Err("need at least one thread".into());
    }
    if args.sources == 0 || args.sources > MAX_SOURCES {
        return Err(format!("sources must be in 1..={MAX_SOURCES}"));
    }
    let (graph, graph_name) = match args.graph {
        GraphArg::Gnm => {
            let n = args.n.ok_or("gnm needs --n")?;
            (gen_gnm(n, args.avg_deg, args.seed), "gnm".to_string())
        }
        GraphArg::File => {
            let path = args.path.as_ref().ok_or("file graphs need --path")?;
            let graph = read_edge_list(path).map_err(|e| e.to_string())?;
            let name = path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".to_string());
            (graph, name)
        }
    };
    if graph.node_count() == 0 {
        return Err("graph has no nodes".into());
    }
    if args.sources > graph.node_count() {
        return Err("more sources than nodes".into());
    }

    let mut rng = SmallRng::seed_from_u64(args.seed ^ 0x5F5F_5F5F);
    let mut nodes: Vec<u32> = (0..graph.node_count() as u32).collect();
    nodes.shuffle(&mut rng);
    let sources: Vec<u32> = nodes.into_iter().take(args.sources).collect();

    let capacity = suggested_queue_capacity(&graph, sources.len());
    let (outcome, params) = run_queue(args, &graph, &sources, capacity);

    if args.verify {
        for (si, &source) in sources.iter().enumerate() {
            if outcome.distances[si] != sequential_bfs(&graph, source) {
                eprintln!("bfs: verification FAILED for source {source}");
                return Ok(ExitCode::from(1));
            }
        }
        eprintln!("bfs: verification passed for {} searches", sources.len());
    }

    let row = format!(
        "{},{},{},{},{},{},{},{:.6},{},{:#x}",
        graph_name,
        graph.node_count(),
        graph.edge_count(),
        sources.len(),
        queue_name(args.queue),
        params,
        args.threads,
        outcome.wall_seconds,
        outcome.stale_pops,
        distance_checksum(&outcome.distances),
    );
    match &args.csv {
        Some(path) => {
            let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
            let mut file = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| e.to_string())?;
            if fresh {
                writeln!(file, "{CSV_HEADER}").map_err(|e| e.to_string())?;
            }
            writeln!(file, "{row}").map_err(|e| e.to_string())?;
        }
        None => {
            println!("{CSV_HEADER}");
            println!("{row}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn queue_name(queue: QueueArg) -> &'static str {
    match queue {
        QueueArg::Bf => "bf",
        QueueArg::Mf => "mf",
        QueueArg::Strict => "strict",
    }
}

fn run_queue(
    args: &Args,
    graph: &Graph,
    sources: &[u32],
    capacity: usize,
) -> (BfsOutcome, String) {
    match args.queue {
        QueueArg::Bf => {
            let params = BlockFifoParams {
                threads: args.threads,
                block_factor: args.bf_block_factor,
                block_size: args.bf_block_size,
                ring_factor: args.bf_ring_factor.unwrap_or(3),
                seed: args.seed,
                use_bitset: !args.no_bitset,
            };
            let params = match args.bf_ring_factor {
                Some(_) => params,
                None => params.with_usable_capacity(capacity),
            };
            let queue = BlockFifo::new(params.clone());
            let outcome = parallel_bfs(graph, sources, &queue, args.threads);
            let desc = format!(
                "B={};C={};k={};bitset={}",
                params.block_factor,
                params.block_size,
                params.ring_factor,
                if params.use_bitset { "on" } else { "off" }
            );
            (outcome, desc)
        }
        QueueArg::Mf => {
            let params = MultiFifoParams {
                threads: args.threads,
                queue_factor: args.mf_queue_factor,
                stickiness: args.mf_stickiness,
                sub_queue_capacity: args.mf_subqueue_cap.unwrap_or(1),
                seed: args.seed,
            };
            let params = match args.mf_subqueue_cap {
                Some(_) => params,
                None => params.with_total_capacity(capacity),
            };
            let queue = MultiFifo::new(params.clone());
            let outcome = parallel_bfs(graph, sources, &queue, args.threads);
            let desc = format!(
                "c={};s={};m={}",
                params.queue_factor, params.stickiness, params.sub_queue_capacity
            );
            (outcome, desc)
        }
        QueueArg::Strict => {
            let queue = StrictQueue::new(capacity);
            let outcome = parallel_bfs(graph, sources, &queue, args.threads);
            (outcome, format!("capacity={capacity}"))
        }
    }
}
