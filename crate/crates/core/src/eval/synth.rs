//! Seeded synthetic workloads with planted relevance.
//!
//! Documents are spread round-robin over k-means-friendly clusters whose
//! centers sit on the unit sphere; every embedding is a jittered, re-
//! normalized sample of its cluster center. Each query draws one cluster
//! and its qrels mark exactly that cluster's documents relevant, so exact
//! retrieval quality is measurable without external data. Clusters are
//! tight: an embedding is always far closer to its own center than to any
//! other, which keeps the planted structure recoverable after residual
//! quantization and not just by exact scoring.

use crate::corpus::{MultiVectorCorpus, QuerySet};
use crate::error::Result;
use crate::rng::SplitMix64;
use crate::scalar::Scalar;

use super::trec::Qrels;

/// Per-component jitter scale applied to cluster centers before re-
/// normalization. The offset norm grows with sqrt(dim), so this must stay
/// well below 1/sqrt(dim) for typical dims or the mixture blurs into a
/// near-uniform cloud whose top-k margins vanish under quantization noise.
const JITTER: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub num_docs: usize,
    pub doc_len: usize,
    pub num_queries: usize,
    pub query_len: usize,
    pub dim: usize,
    pub clusters: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            num_docs: 1000,
            doc_len: 8,
            num_queries: 50,
            query_len: 4,
            dim: 32,
            clusters: 8,
            seed: 42,
        }
    }
}

fn unit_gaussian(rng: &mut SplitMix64, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.next_gaussian()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

fn jittered<F: Scalar>(rng: &mut SplitMix64, center: &[f64]) -> Vec<F> {
    let mut v: Vec<f64> = center
        .iter()
        .map(|&c| c + JITTER * rng.next_gaussian())
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v.into_iter().map(F::from_f64_lossy).collect()
}

/// Generate (corpus, queries, qrels). Deterministic under the seed: the
/// whole workload comes from one SplitMix64 stream in a fixed order.
pub fn synth<F: Scalar>(p: &SynthParams) -> Result<(MultiVectorCorpus<F>, QuerySet<F>, Qrels)> {
    assert!(
        p.num_docs >= 1
            && p.doc_len >= 1
            && p.num_queries >= 1
            && p.query_len >= 1
            && p.dim >= 1
            && p.clusters >= 1
    );
    let mut rng = SplitMix64::new(p.seed);

    let centers: Vec<Vec<f64>> = (0..p.clusters)
        .map(|_| unit_gaussian(&mut rng, p.dim))
        .collect();

    let mut docs = Vec::with_capacity(p.num_docs);
    for d in 0..p.num_docs {
        let center = &centers[d % p.clusters];
        let mut rows = Vec::with_capacity(p.doc_len * p.dim);
        for _ in 0..p.doc_len {
            rows.extend(jittered::<F>(&mut rng, center));
        }
        docs.push((format!("D{d}"), rows));
    }
    let corpus = MultiVectorCorpus::from_docs(p.dim, docs)?;

    let mut queries = Vec::with_capacity(p.num_queries);
    let mut qrels = Qrels::new();
    for q in 0..p.num_queries {
        let cluster = rng.below(p.clusters as u64) as usize;
        let mut rows = Vec::with_capacity(p.query_len * p.dim);
        for _ in 0..p.query_len {
            rows.extend(jittered::<F>(&mut rng, &centers[cluster]));
        }
        let qid = format!("q{q}");
        for d in 0..p.num_docs {
            if d % p.clusters == cluster {
                qrels.insert(&qid, &format!("D{d}"), 1);
            }
        }
        queries.push((qid, rows));
    }
    let queries = QuerySet::from_queries(p.dim, queries)?;

    Ok((corpus, queries, qrels))
}
