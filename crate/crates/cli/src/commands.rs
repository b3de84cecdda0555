//! The seven subcommands. Each returns `Usage` (exit 2) for bad flag
//! combinations and `Runtime` (exit 1) for anything that fails after the
//! invocation itself was well-formed.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;

use maxsim_core::candidates::Strategy;
use maxsim_core::corpus::id_table_path;
use maxsim_core::eval::metrics::{self, MetricReport};
use maxsim_core::eval::stats::paired_ttest;
use maxsim_core::eval::sweep::{sweep, write_sweep_csv, SweepConfig, SIGNIFICANCE_LEVEL};
use maxsim_core::eval::synth::{synth, SynthParams};
use maxsim_core::eval::trec::{write_firststage_run, write_run, Qrels, TrecRun};
use maxsim_core::ivfpq::{
    build_index, default_partitions, DEFAULT_KPRIME, DEFAULT_K_SUB, DEFAULT_M, DEFAULT_NPROBE,
    DEFAULT_TRAIN_FRACTION,
};
use maxsim_core::rerank::{
    first_stage, run_pipeline, write_timings_csv, PipelineConfig, DEFAULT_FINAL_DEPTH,
};
use maxsim_core::{Corpus, Index, Queries};

use crate::parse::{parse_baseline_config, parse_grid, parse_strategy};

pub enum CliError {
    /// Bad flag combination or value; exit 2.
    Usage(String),
    /// Well-formed invocation that failed; exit 1.
    Runtime(String),
}

impl From<maxsim_core::Error> for CliError {
    fn from(e: maxsim_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Prefix errors from an operation on one file with its path.
fn at<T>(path: &std::path::Path, r: maxsim_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

type CliResult = Result<(), CliError>;

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// Corpus embeddings (.mvec with sibling .tsv id table)
    #[arg(long)]
    corpus: PathBuf,
    /// Output index path
    #[arg(long)]
    index: PathBuf,
    /// Coarse partitions; default scales with corpus size
    #[arg(long)]
    partitions: Option<usize>,
    /// Product quantizer sub-spaces
    #[arg(long, default_value_t = DEFAULT_M)]
    subquantizers: usize,
    /// Codewords per sub-space (at most 256)
    #[arg(long, default_value_t = DEFAULT_K_SUB)]
    codebook_size: usize,
    /// Fraction of embeddings sampled for training
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    train_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

pub fn run_build(args: &BuildArgs) -> CliResult {
    if !(1..=256).contains(&args.codebook_size) {
        return Err(usage("--codebook-size must be between 1 and 256"));
    }
    if args.subquantizers == 0 {
        return Err(usage("--subquantizers must be positive"));
    }
    if args.partitions == Some(0) {
        return Err(usage("--partitions must be positive"));
    }
    if !(args.train_fraction > 0.0 && args.train_fraction <= 1.0) {
        return Err(usage("--train-fraction must be in (0, 1]"));
    }
    let corpus = at(&args.corpus, Corpus::load(&args.corpus))?;
    let l = args
        .partitions
        .unwrap_or_else(|| default_partitions(corpus.num_embeddings()));
    eprintln!(
        "building: {} docs, {} embeddings, dim {}",
        corpus.num_docs(),
        corpus.num_embeddings(),
        corpus.dim()
    );
    let index = build_index(
        &corpus,
        l,
        args.subquantizers,
        args.codebook_size,
        args.train_fraction,
        args.seed,
    )?;
    at(&args.index, index.save(&args.index))?;
    let bytes = at(&args.index, fs::metadata(&args.index).map_err(Into::into))?.len();
    println!("partitions: {l}");
    println!("subquantizers: {}", args.subquantizers);
    println!("codebook-size: {}", args.codebook_size);
    println!("embeddings: {}", corpus.num_embeddings());
    println!("bytes: {bytes}");
    Ok(())
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// First-stage strategy: kprime, count, sumsim, or maxsim
    #[arg(long, default_value = "kprime")]
    strategy: String,
    /// Per-query-embedding hit list length
    #[arg(long, default_value_t = DEFAULT_KPRIME)]
    kprime: usize,
    /// Candidate cut for ranked strategies
    #[arg(long, conflicts_with = "no_cut")]
    k: Option<usize>,
    /// Re-rank the full ranking instead of cutting it
    #[arg(long)]
    no_cut: bool,
    #[arg(long, default_value_t = DEFAULT_NPROBE)]
    nprobe: usize,
    /// Documents emitted per query
    #[arg(long, default_value_t = DEFAULT_FINAL_DEPTH)]
    depth: usize,
    #[arg(long)]
    run_out: PathBuf,
    #[arg(long)]
    timings_out: Option<PathBuf>,
}

pub fn run_search(args: &SearchArgs) -> CliResult {
    let strategy = parse_strategy(&args.strategy).map_err(usage)?;
    if strategy == Strategy::Kprime && args.k.is_some() {
        return Err(usage(
            "--k cannot be combined with --strategy kprime: the candidate set is unordered and cannot be cut",
        ));
    }
    if strategy.is_ranked() && args.k.is_none() && !args.no_cut {
        return Err(usage(format!(
            "--k is required for strategy '{}' (or pass --no-cut to re-rank the full ranking)",
            strategy.name()
        )));
    }
    if args.k == Some(0) || args.kprime == 0 || args.nprobe == 0 || args.depth == 0 {
        return Err(usage(
            "--k, --kprime, --nprobe, and --depth must be positive",
        ));
    }
    let corpus = at(&args.corpus, Corpus::load(&args.corpus))?;
    let index = at(&args.index, Index::load(&args.index))?;
    let queries = at(&args.queries, Queries::load(&args.queries))?;
    eprintln!(
        "searching: {} queries against {} docs, strategy {}",
        queries.queries().len(),
        corpus.num_docs(),
        strategy.name()
    );
    let cfg = PipelineConfig {
        strategy,
        k_prime: args.kprime,
        nprobe: args.nprobe,
        k: args.k,
        final_depth: args.depth,
    };
    let (runs, timings) = run_pipeline(&corpus, &index, &queries, &cfg)?;
    at(
        &args.run_out,
        write_run(&args.run_out, &runs, &corpus, strategy.name()),
    )?;
    eprintln!("wrote {}", args.run_out.display());
    if let Some(timings_out) = &args.timings_out {
        at(timings_out, write_timings_csv(timings_out, &timings))?;
        eprintln!("wrote {}", timings_out.display());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct FirstStageArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Ranked strategy: count, sumsim, or maxsim
    #[arg(long)]
    strategy: String,
    /// Ranking depth of the emitted run
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_KPRIME)]
    kprime: usize,
    #[arg(long, default_value_t = DEFAULT_NPROBE)]
    nprobe: usize,
    #[arg(long)]
    run_out: PathBuf,
}

pub fn run_firststage(args: &FirstStageArgs) -> CliResult {
    let strategy = parse_strategy(&args.strategy).map_err(usage)?;
    if strategy == Strategy::Kprime {
        return Err(usage(
            "kprime is omitted here: it forms a set, not a ranking",
        ));
    }
    if args.k == 0 || args.kprime == 0 || args.nprobe == 0 {
        return Err(usage("--k, --kprime, and --nprobe must be positive"));
    }
    let corpus = at(&args.corpus, Corpus::load(&args.corpus))?;
    let index = at(&args.index, Index::load(&args.index))?;
    let queries = at(&args.queries, Queries::load(&args.queries))?;
    let cfg = PipelineConfig {
        strategy,
        k_prime: args.kprime,
        nprobe: args.nprobe,
        k: Some(args.k),
        final_depth: DEFAULT_FINAL_DEPTH,
    };
    let rankings = queries
        .queries()
        .iter()
        .map(|q| first_stage(&corpus, &index, q, &cfg))
        .collect::<maxsim_core::Result<Vec<_>>>()?;
    at(
        &args.run_out,
        write_firststage_run(&args.run_out, &rankings, &corpus, strategy.name()),
    )?;
    eprintln!("wrote {}", args.run_out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Comma-separated metrics to report
    #[arg(long, default_value = "mrr,ndcg10,map,recall")]
    metrics: String,
    #[arg(long, default_value_t = DEFAULT_FINAL_DEPTH)]
    recall_depth: usize,
    /// Depth for the mrr metric; 0 means unbounded
    #[arg(long, default_value_t = 0)]
    mrr_depth: usize,
    /// Paired t-tests against this run, Bonferroni over the metric count
    #[arg(long)]
    baseline_run: Option<PathBuf>,
}

fn compute_metric(
    name: &str,
    run: &TrecRun,
    qrels: &Qrels,
    recall_depth: usize,
    mrr_depth: Option<usize>,
) -> MetricReport {
    match name {
        "mrr" => metrics::mrr(run, qrels, mrr_depth),
        "ndcg10" => metrics::ndcg(run, qrels, 10),
        "map" => metrics::map(run, qrels),
        "recall" => metrics::recall_at(run, qrels, recall_depth),
        _ => unreachable!("metric names validated before computation"),
    }
}

pub fn run_evaluate(args: &EvaluateArgs) -> CliResult {
    let mut names = Vec::new();
    for name in args.metrics.split(',') {
        let name = name.trim();
        if !["mrr", "ndcg10", "map", "recall"].contains(&name) {
            return Err(usage(format!(
                "unknown metric '{name}' (valid: mrr, ndcg10, map, recall)"
            )));
        }
        if !names.contains(&name) {
            names.push(name);
        }
    }
    let run = at(&args.run, TrecRun::load(&args.run))?;
    let qrels = at(&args.qrels, Qrels::load(&args.qrels))?;
    let baseline = args
        .baseline_run
        .as_deref()
        .map(|path| at(path, TrecRun::load(path)))
        .transpose()?;

    let mrr_depth = (args.mrr_depth > 0).then_some(args.mrr_depth);
    let mut warned_unjudged = false;
    for name in &names {
        let report = compute_metric(name, &run, &qrels, args.recall_depth, mrr_depth);
        if report.unjudged > 0 && !warned_unjudged {
            eprintln!(
                "warning: {} queries have no relevant documents and are excluded from means",
                report.unjudged
            );
            warned_unjudged = true;
        }
        for (qid, value) in &report.per_query {
            println!("{name}\t{qid}\t{value:.6}");
        }
        println!("{name}\tall\t{:.6}", report.mean);
    }

    if let Some(baseline) = baseline {
        for name in &names {
            let ours = compute_metric(name, &run, &qrels, args.recall_depth, mrr_depth);
            let theirs = compute_metric(name, &baseline, &qrels, args.recall_depth, mrr_depth);
            let same_queries = ours.per_query.len() == theirs.per_query.len()
                && ours
                    .per_query
                    .iter()
                    .zip(&theirs.per_query)
                    .all(|(a, b)| a.0 == b.0);
            if !same_queries {
                return Err(CliError::Runtime(
                    "run and baseline cover different judged queries; paired tests need the same query set"
                        .into(),
                ));
            }
            let ours_values: Vec<f64> = ours.per_query.iter().map(|&(_, v)| v).collect();
            let theirs_values: Vec<f64> = theirs.per_query.iter().map(|&(_, v)| v).collect();
            let test = paired_ttest(&ours_values, &theirs_values, names.len())?;
            println!(
                "ttest\t{name}\tt={:.6}\tp_raw={:.6}\tp_adjusted={:.6}\tsignificant={}",
                test.t,
                test.p_raw,
                test.p_adjusted,
                test.p_adjusted < SIGNIFICANCE_LEVEL
            );
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Strategy under test; kprime sweeps k', ranked strategies sweep k
    #[arg(long)]
    strategy: String,
    /// Values or inclusive start:stop:step ranges, comma-separated
    #[arg(long)]
    grid: String,
    /// Fixed k' while a ranked strategy sweeps k
    #[arg(long, default_value_t = DEFAULT_KPRIME)]
    kprime: usize,
    #[arg(long, default_value_t = DEFAULT_NPROBE)]
    nprobe: usize,
    #[arg(long, default_value_t = DEFAULT_FINAL_DEPTH)]
    depth: usize,
    /// Depth for the mrr column; 0 means unbounded
    #[arg(long, default_value_t = 10)]
    mrr_depth: usize,
    /// Baseline overrides as key=value pairs (strategy, kprime, nprobe, k, depth)
    #[arg(long, default_value = "")]
    baseline_config: String,
    /// Evaluate grid points on the worker pool
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    csv_out: PathBuf,
}

pub fn run_sweep(args: &SweepArgs) -> CliResult {
    let strategy = parse_strategy(&args.strategy).map_err(usage)?;
    let grid = parse_grid(&args.grid).map_err(usage)?;
    let baseline = parse_baseline_config(&args.baseline_config).map_err(usage)?;
    if args.kprime == 0 || args.nprobe == 0 || args.depth == 0 {
        return Err(usage("--kprime, --nprobe, and --depth must be positive"));
    }
    let corpus = at(&args.corpus, Corpus::load(&args.corpus))?;
    let index = at(&args.index, Index::load(&args.index))?;
    let queries = at(&args.queries, Queries::load(&args.queries))?;
    let qrels = at(&args.qrels, Qrels::load(&args.qrels))?;
    let cfg = SweepConfig {
        strategy,
        k_prime: args.kprime,
        nprobe: args.nprobe,
        final_depth: args.depth,
        mrr_depth: (args.mrr_depth > 0).then_some(args.mrr_depth),
        baseline,
        parallel: args.parallel,
    };
    eprintln!(
        "sweeping {} over {} grid points, {} queries",
        strategy.name(),
        grid.len(),
        queries.queries().len()
    );
    let rows = sweep(&corpus, &index, &queries, &qrels, &cfg, &grid)?;
    at(&args.csv_out, write_sweep_csv(&args.csv_out, &rows))?;
    eprintln!("wrote {}", args.csv_out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct CorrelateArgs {
    #[arg(long)]
    run_a: PathBuf,
    #[arg(long)]
    run_b: PathBuf,
    #[arg(long)]
    scatter_out: PathBuf,
}

pub fn run_correlate(args: &CorrelateArgs) -> CliResult {
    let run_a = at(&args.run_a, TrecRun::load(&args.run_a))?;
    let run_b = at(&args.run_b, TrecRun::load(&args.run_b))?;
    let b_ranks: HashMap<&str, HashMap<&str, usize>> = run_b
        .queries
        .iter()
        .map(|(qid, ranking)| {
            let ranks = ranking
                .iter()
                .enumerate()
                .map(|(i, (docno, _))| (docno.as_str(), i + 1))
                .collect();
            (qid.as_str(), ranks)
        })
        .collect();

    let w = at(
        &args.scatter_out,
        fs::File::create(&args.scatter_out).map_err(Into::into),
    )?;
    let mut w = BufWriter::new(w);
    writeln!(w, "qid,docno,rank_a,rank_b")?;
    for (qid, ranking) in &run_a.queries {
        let Some(ranks_b) = b_ranks.get(qid.as_str()) else {
            eprintln!(
                "warning: query {qid} is missing from {}",
                args.run_b.display()
            );
            continue;
        };
        let mut rank_pairs: Vec<(f64, f64)> = Vec::new();
        for (i, (docno, _)) in ranking.iter().enumerate() {
            if let Some(&rank_b) = ranks_b.get(docno.as_str()) {
                writeln!(w, "{qid},{docno},{},{rank_b}", i + 1)?;
                rank_pairs.push(((i + 1) as f64, rank_b as f64));
            }
        }
        let (ra, rb): (Vec<f64>, Vec<f64>) = rank_pairs.into_iter().unzip();
        match maxsim_core::eval::stats::spearman(&ra, &rb) {
            Ok(rho) => println!("spearman\t{qid}\t{rho:.6}"),
            Err(e) => eprintln!("warning: query {qid}: spearman undefined ({e})"),
        }
    }
    for (qid, _) in &run_b.queries {
        if !run_a.queries.iter().any(|(q, _)| q == qid) {
            eprintln!(
                "warning: query {qid} is missing from {}",
                args.run_a.display()
            );
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = SynthParams::default().num_docs)]
    docs: usize,
    #[arg(long, default_value_t = SynthParams::default().doc_len)]
    doc_len: usize,
    #[arg(long, default_value_t = SynthParams::default().num_queries)]
    queries: usize,
    #[arg(long, default_value_t = SynthParams::default().query_len)]
    query_len: usize,
    #[arg(long, default_value_t = SynthParams::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = SynthParams::default().clusters)]
    clusters: usize,
    #[arg(long, default_value_t = SynthParams::default().seed)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run_synth(args: &SynthArgs) -> CliResult {
    if args.docs == 0
        || args.doc_len == 0
        || args.queries == 0
        || args.query_len == 0
        || args.dim == 0
        || args.clusters == 0
    {
        return Err(usage("all synth sizes must be positive"));
    }
    let params = SynthParams {
        num_docs: args.docs,
        doc_len: args.doc_len,
        num_queries: args.queries,
        query_len: args.query_len,
        dim: args.dim,
        clusters: args.clusters,
        seed: args.seed,
    };
    let (corpus, queries, qrels) = synth::<maxsim_core::Real>(&params)?;
    at(
        &args.out_dir,
        fs::create_dir_all(&args.out_dir).map_err(Into::into),
    )?;
    let corpus_path = args.out_dir.join("corpus.mvec");
    let queries_path = args.out_dir.join("queries.mvec");
    let qrels_path = args.out_dir.join("qrels.txt");
    at(&corpus_path, corpus.save(&corpus_path))?;
    at(&queries_path, queries.save(&queries_path))?;
    at(&qrels_path, qrels.save(&qrels_path))?;
    for path in [
        corpus_path.clone(),
        id_table_path(&corpus_path),
        queries_path.clone(),
        id_table_path(&queries_path),
        qrels_path,
    ] {
        println!("{}", path.display());
    }
    Ok(())
}
