//! Cutoff sweeps: one pipeline run per grid point, each significance-tested
//! against the default-configuration baseline.
//!
//! For the Kprime strategy the grid varies k' (the candidate set is never
//! cut); for ranked strategies it varies the cutoff k at a fixed k'. The
//! paired t-test runs on per-query NDCG@10 against the baseline run, with
//! Bonferroni correction over the grid size.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::candidates::Strategy;
use crate::corpus::{MultiVectorCorpus, QuerySet};
use crate::error::{Error, Result};
use crate::ivfpq::IvfPqIndex;
use crate::rerank::{run_pipeline, PipelineConfig};
use crate::scalar::Scalar;

use super::metrics::{map, mrr, ndcg, recall_at};
use super::stats::paired_ttest;
use super::trec::{runs_to_trec, Qrels, TrecRun};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Strategy under test; Kprime sweeps k', ranked strategies sweep k.
    pub strategy: Strategy,
    /// Fixed k' for ranked strategies (ignored when sweeping Kprime).
    pub k_prime: usize,
    pub nprobe: usize,
    pub final_depth: usize,
    /// Depth for the MRR column; None is unbounded.
    pub mrr_depth: Option<usize>,
    /// The reference configuration every grid point is tested against.
    pub baseline: PipelineConfig,
    /// Run grid points on the rayon pool. Rows are unchanged (the sweep
    /// emits no wall-time columns), only throughput differs.
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            strategy: Strategy::Kprime,
            k_prime: crate::ivfpq::DEFAULT_KPRIME,
            nprobe: crate::ivfpq::DEFAULT_NPROBE,
            final_depth: crate::rerank::DEFAULT_FINAL_DEPTH,
            mrr_depth: Some(10),
            baseline: PipelineConfig::default(),
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub mean_candidates: f64,
    pub mrr: f64,
    pub ndcg10: f64,
    pub map: f64,
    pub recall: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

fn per_query_ndcg10(run: &TrecRun, qrels: &Qrels) -> Vec<(String, f64)> {
    ndcg(run, qrels, 10).per_query
}

/// One pipeline run per grid point. Rows keep grid order.
pub fn sweep<F: Scalar>(
    corpus: &MultiVectorCorpus<F>,
    index: &IvfPqIndex<F>,
    queries: &QuerySet<F>,
    qrels: &Qrels,
    cfg: &SweepConfig,
    grid: &[usize],
) -> Result<Vec<SweepRow>> {
    assert!(!grid.is_empty());
    let (baseline_runs, _) = run_pipeline(corpus, index, queries, &cfg.baseline)?;
    let baseline_ndcg = per_query_ndcg10(&runs_to_trec(&baseline_runs, corpus), qrels);

    let evaluate_point = |&point: &usize| -> Result<SweepRow> {
        let point_cfg = PipelineConfig {
            strategy: cfg.strategy,
            k_prime: if cfg.strategy.is_ranked() {
                cfg.k_prime
            } else {
                point
            },
            nprobe: cfg.nprobe,
            k: cfg.strategy.is_ranked().then_some(point),
            final_depth: cfg.final_depth,
        };
        let (runs, timings) = run_pipeline(corpus, index, queries, &point_cfg)?;
        let trec = runs_to_trec(&runs, corpus);

        let point_ndcg = per_query_ndcg10(&trec, qrels);
        let (a, b): (Vec<f64>, Vec<f64>) = point_ndcg
            .iter()
            .zip(&baseline_ndcg)
            .map(|((qa, va), (qb, vb))| {
                // Same query set and qrels on both sides, so the judged
                // qid sequences must line up.
                if qa != qb {
                    return Err(Error::Pairing {
                        left: point_ndcg.len(),
                        right: baseline_ndcg.len(),
                    });
                }
                Ok((*va, *vb))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?
            .into_iter()
            .unzip();
        if a.len() != baseline_ndcg.len() {
            return Err(Error::Pairing {
                left: a.len(),
                right: baseline_ndcg.len(),
            });
        }
        let test = paired_ttest(&a, &b, grid.len())?;

        let mean_candidates =
            timings.iter().map(|t| t.candidates as f64).sum::<f64>() / timings.len().max(1) as f64;
        Ok(SweepRow {
            k: point,
            mean_candidates,
            mrr: mrr(&trec, qrels, cfg.mrr_depth).mean,
            ndcg10: ndcg(&trec, qrels, 10).mean,
            map: map(&trec, qrels).mean,
            recall: recall_at(&trec, qrels, cfg.final_depth).mean,
            p_adjusted: test.p_adjusted,
            significant: test.p_adjusted < SIGNIFICANCE_LEVEL,
        })
    };

    if cfg.parallel {
        grid.par_iter().map(evaluate_point).collect()
    } else {
        grid.iter().map(evaluate_point).collect()
    }
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "k,mean_candidates,mrr,ndcg10,map,recall,p_adjusted,significant"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{:.2},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            r.k, r.mean_candidates, r.mrr, r.ndcg10, r.map, r.recall, r.p_adjusted, r.significant
        )?;
    }
    w.flush()?;
    Ok(())
}
