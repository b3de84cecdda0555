//! First-stage candidate generation: maps per-query-embedding hit lists to
//! document sets and ranks them by one of four strategies.
//!
//! Kprime keeps the plain union (an unordered set whose size is controlled
//! only indirectly through k'). Count, SumSim and MaxSim impose a total
//! order so the set can be cut to exactly k documents before re-ranking.

use std::collections::HashMap;

use crate::corpus::{DocId, MultiVectorCorpus};
use crate::error::{Error, Result};
use crate::ivfpq::EmbeddingHitList;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Kprime,
    Count,
    SumSim,
    MaxSim,
}

impl Strategy {
    pub fn is_ranked(self) -> bool {
        self != Strategy::Kprime
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Kprime => "kprime",
            Strategy::Count => "count",
            Strategy::SumSim => "sumsim",
            Strategy::MaxSim => "maxsim",
        }
    }
}

/// One query's candidate documents.
///
/// Ranked strategies fill `scores` parallel to `docs`, sorted by
/// (approx_score desc, DocId asc). Kprime leaves `scores` empty and lists
/// `docs` in ascending DocId order as a canonical set representation.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRanking {
    pub qid: String,
    pub strategy: Strategy,
    pub docs: Vec<DocId>,
    pub scores: Vec<f64>,
}

impl CandidateRanking {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

fn check_no_duplicate_hits(hits: &[EmbeddingHitList]) {
    debug_assert!(
        hits.iter().all(|list| {
            let mut ids: Vec<u64> = list.iter().map(|h| h.embedding.0).collect();
            ids.sort_unstable();
            ids.windows(2).all(|w| w[0] != w[1])
        }),
        "hit lists must not repeat an embedding"
    );
}

/// D(phi_i, k') per query embedding plus their union D(k'), both as
/// ascending DocId sets.
pub fn candidate_sets<F: Scalar>(
    corpus: &MultiVectorCorpus<F>,
    hits: &[EmbeddingHitList],
) -> Result<(Vec<Vec<DocId>>, Vec<DocId>)> {
    check_no_duplicate_hits(hits);
    let mut per_embedding = Vec::with_capacity(hits.len());
    let mut union: Vec<DocId> = Vec::new();
    let mut max_hits = 0usize;
    for list in hits {
        max_hits = max_hits.max(list.len());
        let mut docs: Vec<DocId> = list
            .iter()
            .map(|h| corpus.embedding_to_doc(h.embedding))
            .collect::<Result<_>>()?;
        docs.sort_unstable();
        docs.dedup();
        union.extend_from_slice(&docs);
        per_embedding.push(docs);
    }
    union.sort_unstable();
    union.dedup();
    assert!(union.len() <= hits.len() * max_hits, "union exceeds n * k'");
    Ok((per_embedding, union))
}

fn ranking_from_scores(
    qid: &str,
    strategy: Strategy,
    scores: HashMap<u32, f64>,
) -> CandidateRanking {
    let mut entries: Vec<(u32, f64)> = scores.into_iter().collect();
    entries.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    CandidateRanking {
        qid: qid.to_string(),
        strategy,
        docs: entries.iter().map(|&(d, _)| DocId(d)).collect(),
        scores: entries.iter().map(|&(_, s)| s).collect(),
    }
}

/// Score = how many retrieved embeddings map to the document, summed over
/// all hit lists. Every occurrence counts, including several embeddings of
/// one document retrieved by the same query embedding.
pub fn rank_count<F: Scalar>(
    corpus: &MultiVectorCorpus<F>,
    hits: &[EmbeddingHitList],
    qid: &str,
) -> Result<CandidateRanking> {
    check_no_duplicate_hits(hits);
    let mut scores: HashMap<u32, f64> = HashMap::new();
    for list in hits {
        for hit in list {
            let d = corpus.embedding_to_doc(hit.embedding)?;
            *scores.entry(d.0).or_insert(0.0) += 1.0;
        }
    }
    Ok(ranking_from_scores(qid, Strategy::Count, scores))
}

/// Score = sum of approximate similarities over every hit mapping to the
/// document. Negative similarities are kept as-is.
pub fn rank_sumsim<F: Scalar>(
    corpus: &MultiVectorCorpus<F>,
    hits: &[EmbeddingHitList],
    qid: &str,
) -> Result<CandidateRanking> {
    check_no_duplicate_hits(hits);
    let mut scores: HashMap<u32, f64> = HashMap::new();
    for list in hits {
        for hit in list {
            let d = corpus.embedding_to_doc(hit.embedding)?;
            *scores.entry(d.0).or_insert(0.0) += hit.approx_sim;
        }
    }
    Ok(ranking_from_scores(qid, Strategy::SumSim, scores))
}

/// Approximate MaxSim: per query embedding take the best approximate
/// similarity of the document's retrieved embeddings, then sum over query
/// embeddings. A query embedding retrieving nothing of the document
/// contributes 0.
pub fn rank_maxsim<F: Scalar>(
    corpus: &MultiVectorCorpus<F>,
    hits: &[EmbeddingHitList],
    qid: &str,
) -> Result<CandidateRanking> {
    check_no_duplicate_hits(hits);
    let mut scores: HashMap<u32, f64> = HashMap::new();
    let mut per_embedding: HashMap<u32, f64> = HashMap::new();
    for list in hits {
        per_embedding.clear();
        for hit in list {
            let d = corpus.embedding_to_doc(hit.embedding)?;
            per_embedding
                .entry(d.0)
                .and_modify(|best| *best = best.max(hit.approx_sim))
                .or_insert(hit.approx_sim);
        }
        // One addition per document per query embedding, applied in query
        // embedding order; per-document sums are order-deterministic.
        let mut batch: Vec<(u32, f64)> = per_embedding.iter().map(|(&d, &s)| (d, s)).collect();
        batch.sort_unstable_by_key(|&(d, _)| d);
        for (d, s) in batch {
            *scores.entry(d).or_insert(0.0) += s;
        }
    }
    Ok(ranking_from_scores(qid, Strategy::MaxSim, scores))
}

/// The Kprime strategy: D(k') itself, unordered.
pub fn kprime_set<F: Scalar>(
    corpus: &MultiVectorCorpus<F>,
    hits: &[EmbeddingHitList],
    qid: &str,
) -> Result<CandidateRanking> {
    let (_, union) = candidate_sets(corpus, hits)?;
    Ok(CandidateRanking {
        qid: qid.to_string(),
        strategy: Strategy::Kprime,
        docs: union,
        scores: Vec::new(),
    })
}

/// Keep the first min(k, len) entries of a ranked strategy's output.
pub fn cut(r: &CandidateRanking, k: usize) -> Result<CandidateRanking> {
    if !r.strategy.is_ranked() {
        return Err(Error::NotRankable(
            "the kprime candidate set is unordered and cannot be cut",
        ));
    }
    let n = k.min(r.len());
    Ok(CandidateRanking {
        qid: r.qid.clone(),
        strategy: r.strategy,
        docs: r.docs[..n].to_vec(),
        scores: r.scores[..n].to_vec(),
    })
}
