//! Exact MaxSim scoring and the end-to-end two-stage pipeline.
//!
//! The second stage scores candidates on the uncompressed embeddings and
//! discards first-stage approximate scores entirely: the final ranking
//! depends only on the exact MaxSim values and the documented tie-break.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::candidates::{
    cut, kprime_set, rank_count, rank_maxsim, rank_sumsim, CandidateRanking, Strategy,
};
use crate::corpus::{DocId, MultiVectorCorpus, Query, QuerySet};
use crate::error::{Error, Result};
use crate::ivfpq::{EmbeddingHitList, IvfPqIndex};
use crate::scalar::{dot_wide, Scalar};

pub const DEFAULT_FINAL_DEPTH: usize = 1000;

/// Sum over query embeddings of the best dot product against any document
/// embedding, accumulated in f64.
pub fn maxsim_score<F: Scalar>(
    query: &[F],
    query_dim: usize,
    doc: &[F],
    doc_dim: usize,
) -> Result<f64> {
    if query_dim != doc_dim {
        return Err(Error::Dim {
            left: query_dim,
            right: doc_dim,
        });
    }
    let dim = query_dim;
    assert!(dim > 0 && query.len().is_multiple_of(dim) && doc.len().is_multiple_of(dim));
    assert!(!query.is_empty() && !doc.is_empty());
    let mut total = 0.0f64;
    for phi in query.chunks(dim) {
        let mut best = f64::NEG_INFINITY;
        for psi in doc.chunks(dim) {
            let s = dot_wide(phi, psi);
            if s > best {
                best = s;
            }
        }
        total += best;
    }
    Ok(total)
}

/// One query's final ranking: (DocId, exact score) sorted by
/// (score desc, DocId asc).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRun {
    pub qid: String,
    pub entries: Vec<(DocId, f64)>,
}

/// Exactly score each candidate document and keep the top `final_depth`.
pub fn rerank<F: Scalar>(
    corpus: &MultiVectorCorpus<F>,
    query: &Query<F>,
    candidates: &CandidateRanking,
    final_depth: usize,
) -> Result<ScoredRun> {
    assert!(final_depth >= 1);
    let dim = corpus.dim();
    let mut entries: Vec<(DocId, f64)> = candidates
        .docs
        .par_iter()
        .map(|&d| {
            if d.index() >= corpus.num_docs() {
                return Err(Error::CorpusMismatch(d.0));
            }
            let score = maxsim_score(&query.embeddings, dim, corpus.doc_embeddings(d), dim)?;
            Ok((d, score))
        })
        .collect::<Result<_>>()?;
    entries.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    entries.truncate(final_depth);
    Ok(ScoredRun {
        qid: query.qid.clone(),
        entries,
    })
}

/// End-to-end configuration. `k` must be absent for the Kprime strategy
/// (its candidate set is unordered); absent `k` on a ranked strategy means
/// the whole candidate set goes to the second stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub strategy: Strategy,
    pub k_prime: usize,
    pub nprobe: usize,
    pub k: Option<usize>,
    pub final_depth: usize,
}

impl Default for PipelineConfig {
    /// The default end-to-end configuration: Kprime with k' = 1000 over 10
    /// probed partitions, emitting 1000 documents.
    fn default() -> Self {
        PipelineConfig {
            strategy: Strategy::Kprime,
            k_prime: crate::ivfpq::DEFAULT_KPRIME,
            nprobe: crate::ivfpq::DEFAULT_NPROBE,
            k: None,
            final_depth: DEFAULT_FINAL_DEPTH,
        }
    }
}

/// Wall time spent per stage for one query, plus the number of candidate
/// documents the second stage scored.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTimings {
    pub qid: String,
    pub stage1_ms: f64,
    pub stage2_ms: f64,
    pub candidates: usize,
}

pub fn write_timings_csv(path: &Path, timings: &[StageTimings]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "qid,stage1_ms,stage2_ms,candidates")?;
    for t in timings {
        writeln!(
            w,
            "{},{:.3},{:.3},{}",
            t.qid, t.stage1_ms, t.stage2_ms, t.candidates
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Run first-stage retrieval for every embedding of one query and rank the
/// resulting candidates with the configured strategy.
pub fn first_stage<F: Scalar>(
    corpus: &MultiVectorCorpus<F>,
    index: &IvfPqIndex<F>,
    query: &Query<F>,
    cfg: &PipelineConfig,
) -> Result<CandidateRanking> {
    let dim = corpus.dim();
    let n = query.num_embeddings(dim);
    let hits: Vec<EmbeddingHitList> = (0..n)
        .into_par_iter()
        .map(|i| index.search(query.embedding(i, dim), cfg.k_prime, cfg.nprobe))
        .collect::<Result<_>>()?;
    let ranking = match cfg.strategy {
        Strategy::Kprime => kprime_set(corpus, &hits, &query.qid)?,
        Strategy::Count => rank_count(corpus, &hits, &query.qid)?,
        Strategy::SumSim => rank_sumsim(corpus, &hits, &query.qid)?,
        Strategy::MaxSim => rank_maxsim(corpus, &hits, &query.qid)?,
    };
    match cfg.k {
        Some(k) => cut(&ranking, k),
        None => Ok(ranking),
    }
}

/// Two-stage retrieval for every query: ANN candidates, strategy ranking,
/// optional cut, exact re-rank. Queries run sequentially so per-query wall
/// times do not interleave; parallelism lives inside each stage.
pub fn run_pipeline<F: Scalar>(
    corpus: &MultiVectorCorpus<F>,
    index: &IvfPqIndex<F>,
    queries: &QuerySet<F>,
    cfg: &PipelineConfig,
) -> Result<(Vec<ScoredRun>, Vec<StageTimings>)> {
    if queries.dim() != corpus.dim() {
        return Err(Error::Dim {
            left: queries.dim(),
            right: corpus.dim(),
        });
    }
    if index.dim != corpus.dim() {
        return Err(Error::Dim {
            left: index.dim,
            right: corpus.dim(),
        });
    }
    if index.total != corpus.num_embeddings() {
        return Err(Error::CorpusMismatch(index.total as u32));
    }
    if cfg.strategy == Strategy::Kprime && cfg.k.is_some() {
        return Err(Error::NotRankable(
            "the kprime candidate set is unordered and cannot be cut",
        ));
    }
    assert!(cfg.final_depth >= 1);

    let mut runs = Vec::with_capacity(queries.queries().len());
    let mut timings = Vec::with_capacity(queries.queries().len());
    for query in queries.queries() {
        let t0 = Instant::now();
        let candidates = first_stage(corpus, index, query, cfg)?;
        let stage1_ms = t0.elapsed().as_secs_f64() * 1e3;

        let t1 = Instant::now();
        let run = if candidates.is_empty() {
            ScoredRun {
                qid: query.qid.clone(),
                entries: Vec::new(),
            }
        } else {
            rerank(corpus, query, &candidates, cfg.final_depth)?
        };
        let stage2_ms = t1.elapsed().as_secs_f64() * 1e3;

        timings.push(StageTimings {
            qid: query.qid.clone(),
            stage1_ms,
            stage2_ms,
            candidates: candidates.len(),
        });
        runs.push(run);
    }
    Ok((runs, timings))
}

/// Brute-force exact MaxSim over the whole corpus, the oracle the pipeline
/// converges to under lossless settings.
pub fn exhaustive_maxsim<F: Scalar>(
    corpus: &MultiVectorCorpus<F>,
    query: &Query<F>,
    final_depth: usize,
) -> Result<ScoredRun> {
    let all = CandidateRanking {
        qid: query.qid.clone(),
        strategy: Strategy::Kprime,
        docs: (0..corpus.num_docs() as u32).map(DocId).collect(),
        scores: Vec::new(),
    };
    rerank(corpus, query, &all, final_depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::normalize_rows;
    use crate::ivfpq::build_index;
    use crate::rng::SplitMix64;

    fn synth_corpus(docs: usize, doc_len: usize, dim: usize, seed: u64) -> MultiVectorCorpus<f32> {
        let mut rng = SplitMix64::new(seed);
        let docs: Vec<(String, Vec<f32>)> = (0..docs)
            .map(|d| {
                let mut rows: Vec<f32> = (0..doc_len * dim)
                    .map(|_| rng.next_gaussian() as f32)
                    .collect();
                normalize_rows(&mut rows, dim);
                (format!("D{d}"), rows)
            })
            .collect();
        MultiVectorCorpus::from_docs(dim, docs).unwrap()
    }

    fn synth_queries(n: usize, query_len: usize, dim: usize, seed: u64) -> QuerySet<f32> {
        let mut rng = SplitMix64::new(seed);
        let queries: Vec<(String, Vec<f32>)> = (0..n)
            .map(|q| {
                let mut rows: Vec<f32> = (0..query_len * dim)
                    .map(|_| rng.next_gaussian() as f32)
                    .collect();
                normalize_rows(&mut rows, dim);
                (format!("q{q}"), rows)
            })
            .collect();
        QuerySet::from_queries(dim, queries).unwrap()
    }

    #[test]
    fn two_by_two_hand_case() {
        let q = vec![1.0f32, 0.0, 0.0, 1.0];
        let d = vec![1.0f32, 0.0, 0.5, 0.5];
        assert_eq!(maxsim_score(&q, 2, &d, 2).unwrap(), 1.5);
    }

    #[test]
    fn self_match_of_a_unit_vector_scores_one() {
        let axis = vec![0.0f32, 1.0];
        assert_eq!(maxsim_score(&axis, 2, &axis, 2).unwrap(), 1.0);
        // 0.6 and 0.8 are not exact in f32, so the norm is only approximately one.
        let q = vec![0.6f32, 0.8];
        assert!((maxsim_score(&q, 2, &q, 2).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn matches_naive_triple_loop() {
        let mut rng = SplitMix64::new(5);
        let q: Vec<f32> = (0..4 * 8).map(|_| rng.next_gaussian() as f32).collect();
        let d: Vec<f32> = (0..7 * 8).map(|_| rng.next_gaussian() as f32).collect();
        let got = maxsim_score(&q, 8, &d, 8).unwrap();
        let mut want = 0.0f64;
        for i in 0..4 {
            let mut best = f64::NEG_INFINITY;
            for j in 0..7 {
                let mut s = 0.0f64;
                for t in 0..8 {
                    s += q[i * 8 + t] as f64 * d[j * 8 + t] as f64;
                }
                best = best.max(s);
            }
            want += best;
        }
        assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0));
    }

    #[test]
    fn dim_mismatch_is_an_error() {
        let q = vec![1.0f32, 0.0];
        let d = vec![1.0f32, 0.0, 0.0];
        assert!(matches!(
            maxsim_score(&q, 2, &d, 3),
            Err(Error::Dim { left: 2, right: 3 })
        ));
    }

    #[test]
    fn full_corpus_rerank_equals_brute_force() {
        let corpus = synth_corpus(20, 3, 4, 7);
        let queries = synth_queries(3, 2, 4, 8);
        for query in queries.queries() {
            let run = exhaustive_maxsim(&corpus, query, 20).unwrap();
            // Reference: scalar scan without the rerank plumbing.
            let mut want: Vec<(DocId, f64)> = (0..20u32)
                .map(|d| {
                    let d = DocId(d);
                    let s =
                        maxsim_score(&query.embeddings, 4, corpus.doc_embeddings(d), 4).unwrap();
                    (d, s)
                })
                .collect();
            want.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            assert_eq!(run.entries.len(), want.len());
            for ((gd, gs), (wd, ws)) in run.entries.iter().zip(&want) {
                assert_eq!(gd, wd);
                assert!((gs - ws).abs() <= 1e-6 * ws.abs().max(1.0));
            }
        }
    }

    #[test]
    fn single_candidate_run_has_length_one() {
        let corpus = synth_corpus(5, 2, 4, 9);
        let queries = synth_queries(1, 2, 4, 10);
        let candidates = CandidateRanking {
            qid: "q0".into(),
            strategy: Strategy::SumSim,
            docs: vec![DocId(3)],
            scores: vec![1.0],
        };
        let run = rerank(&corpus, &queries.queries()[0], &candidates, 100).unwrap();
        assert_eq!(run.entries.len(), 1);
        assert_eq!(run.entries[0].0, DocId(3));
    }

    #[test]
    fn candidate_order_does_not_matter() {
        let corpus = synth_corpus(12, 2, 4, 11);
        let queries = synth_queries(1, 3, 4, 12);
        let query = &queries.queries()[0];
        let forward = CandidateRanking {
            qid: query.qid.clone(),
            strategy: Strategy::SumSim,
            docs: (0..12u32).map(DocId).collect(),
            scores: vec![0.0; 12],
        };
        let mut backward = forward.clone();
        backward.docs.reverse();
        assert_eq!(
            rerank(&corpus, query, &forward, 12).unwrap(),
            rerank(&corpus, query, &backward, 12).unwrap()
        );
    }

    #[test]
    fn unknown_doc_id_is_a_corpus_mismatch() {
        let corpus = synth_corpus(5, 2, 4, 13);
        let queries = synth_queries(1, 2, 4, 14);
        let candidates = CandidateRanking {
            qid: "q0".into(),
            strategy: Strategy::SumSim,
            docs: vec![DocId(7)],
            scores: vec![1.0],
        };
        assert!(matches!(
            rerank(&corpus, &queries.queries()[0], &candidates, 10),
            Err(Error::CorpusMismatch(7))
        ));
    }

    #[test]
    fn lossless_pipeline_equals_exhaustive_maxsim() {
        // m = dim with k_sub = total embeddings memorizes every residual;
        // probing all partitions makes stage 1 an exact scan, and the Kprime
        // union with k' = T covers every document.
        let corpus = synth_corpus(32, 4, 4, 15);
        let index = build_index(&corpus, 4, 4, 128, 1.0, 21).unwrap();
        let queries = synth_queries(5, 3, 4, 16);
        let cfg = PipelineConfig {
            strategy: Strategy::Kprime,
            k_prime: 128,
            nprobe: 4,
            k: None,
            final_depth: 10,
        };
        let (runs, timings) = run_pipeline(&corpus, &index, &queries, &cfg).unwrap();
        for (run, query) in runs.iter().zip(queries.queries()) {
            let want = exhaustive_maxsim(&corpus, query, 10).unwrap();
            assert_eq!(run, &want);
        }
        assert_eq!(timings.len(), 5);
        assert!(timings.iter().all(|t| t.candidates == 32));
    }

    #[test]
    fn kprime_with_cut_is_rejected() {
        let corpus = synth_corpus(10, 2, 4, 17);
        let index = build_index(&corpus, 2, 2, 8, 1.0, 23).unwrap();
        let queries = synth_queries(1, 2, 4, 18);
        let cfg = PipelineConfig {
            strategy: Strategy::Kprime,
            k: Some(5),
            ..PipelineConfig::default()
        };
        assert!(matches!(
            run_pipeline(&corpus, &index, &queries, &cfg),
            Err(Error::NotRankable(_))
        ));
    }

    #[test]
    fn smaller_cut_is_a_prefix_of_larger() {
        let corpus = synth_corpus(50, 3, 8, 19);
        let index = build_index(&corpus, 4, 4, 32, 0.5, 25).unwrap();
        let queries = synth_queries(4, 2, 8, 20);
        let mk = |k: usize| PipelineConfig {
            strategy: Strategy::MaxSim,
            k_prime: 30,
            nprobe: 4,
            k: Some(k),
            final_depth: 50,
        };
        for query in queries.queries() {
            let small = first_stage(&corpus, &index, query, &mk(5)).unwrap();
            let large = first_stage(&corpus, &index, query, &mk(15)).unwrap();
            assert_eq!(small.docs[..], large.docs[..small.len()]);
            // Every doc the small run emits is inside the larger candidate set.
            let run = rerank(&corpus, query, &small, 50).unwrap();
            for (d, _) in &run.entries {
                assert!(large.docs.contains(d));
            }
        }
    }

    #[test]
    fn stage2_time_scales_with_cut_size() {
        let corpus = synth_corpus(600, 8, 16, 27);
        let index = build_index(&corpus, 16, 4, 64, 0.25, 29).unwrap();
        let queries = synth_queries(8, 4, 16, 28);
        let mk = |k: usize| PipelineConfig {
            strategy: Strategy::MaxSim,
            k_prime: 600,
            nprobe: 16,
            k: Some(k),
            final_depth: 100,
        };
        let (_, t200) = run_pipeline(&corpus, &index, &queries, &mk(200)).unwrap();
        let (_, t400) = run_pipeline(&corpus, &index, &queries, &mk(400)).unwrap();
        let median = |mut xs: Vec<f64>| -> f64 {
            xs.sort_by(f64::total_cmp);
            xs[xs.len() / 2]
        };
        let m200 = median(t200.iter().map(|t| t.stage2_ms).collect());
        let m400 = median(t400.iter().map(|t| t.stage2_ms).collect());
        assert!(
            m400 >= 1.5 * m200,
            "median stage-2 time {m400}ms at k=400 vs {m200}ms at k=200"
        );
    }

    #[test]
    fn timings_csv_format() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("t.csv");
        write_timings_csv(
            &path,
            &[StageTimings {
                qid: "q1".into(),
                stage1_ms: 1.25,
                stage2_ms: 2.5,
                candidates: 42,
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("qid,stage1_ms,stage2_ms,candidates"));
        assert_eq!(lines.next(), Some("q1,1.250,2.500,42"));
    }

    #[test]
    fn mismatched_query_dim_is_an_error() {
        let corpus = synth_corpus(10, 2, 4, 31);
        let index = build_index(&corpus, 2, 2, 8, 1.0, 33).unwrap();
        let queries = synth_queries(1, 2, 8, 32);
        assert!(matches!(
            run_pipeline(&corpus, &index, &queries, &PipelineConfig::default()),
            Err(Error::Dim { left: 8, right: 4 })
        ));
    }
}
