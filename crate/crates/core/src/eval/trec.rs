//! TREC run files and relevance judgments.
//!
//! Runs are the 6-column text format `qid Q0 docno rank score tag`. On
//! load, ranks are regenerated from the scores (descending, ties by docno
//! ascending); the rank column is only checked for consistency warnings,
//! which makes hand-edited files safe to evaluate.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::candidates::CandidateRanking;
use crate::corpus::MultiVectorCorpus;
use crate::error::{Error, Result};
use crate::rerank::ScoredRun;
use crate::scalar::Scalar;

/// Relevance judgments: per qid, docno -> grade. Grades >= 1 are relevant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    by_qid: HashMap<String, HashMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert one judgment; a repeated (qid, docno) replaces the old grade.
    pub fn insert(&mut self, qid: &str, docno: &str, grade: u32) -> Option<u32> {
        self.by_qid
            .entry(qid.to_string())
            .or_default()
            .insert(docno.to_string(), grade)
    }

    pub fn grade(&self, qid: &str, docno: &str) -> u32 {
        self.by_qid
            .get(qid)
            .and_then(|docs| docs.get(docno))
            .copied()
            .unwrap_or(0)
    }

    pub fn judgments(&self, qid: &str) -> Option<&HashMap<String, u32>> {
        self.by_qid.get(qid)
    }

    /// Number of docs with grade >= 1 for this qid.
    pub fn num_relevant(&self, qid: &str) -> usize {
        self.by_qid
            .get(qid)
            .map(|docs| docs.values().filter(|&&g| g >= 1).count())
            .unwrap_or(0)
    }

    pub fn num_queries(&self) -> usize {
        self.by_qid.len()
    }

    /// Parse the 4-column `qid 0 docno grade` format. Duplicate (qid, docno)
    /// lines keep the last grade, with a warning.
    pub fn load(path: &Path) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        let mut qrels = Qrels::new();
        let mut duplicates = 0usize;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Format(format!(
                    "qrels line {}: expected 4 fields, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let grade: u32 = fields[3].parse().map_err(|_| {
                Error::Format(format!(
                    "qrels line {}: bad grade '{}'",
                    lineno + 1,
                    fields[3]
                ))
            })?;
            if qrels.insert(fields[0], fields[2], grade).is_some() {
                duplicates += 1;
            }
        }
        if duplicates > 0 {
            eprintln!("warning: {duplicates} duplicate qrels lines, kept the last grade of each");
        }
        Ok(qrels)
    }

    /// Write in a deterministic order: qid ascending, docno ascending.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let mut qids: Vec<&String> = self.by_qid.keys().collect();
        qids.sort();
        for qid in qids {
            let mut docs: Vec<(&String, &u32)> = self.by_qid[qid].iter().collect();
            docs.sort();
            for (docno, grade) in docs {
                writeln!(w, "{qid} 0 {docno} {grade}")?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// A loaded run: per qid, (docno, score) in rank order. Ranks are the
/// 1-based positions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrecRun {
    pub queries: Vec<(String, Vec<(String, f64)>)>,
}

impl TrecRun {
    pub fn ranking(&self, qid: &str) -> Option<&[(String, f64)]> {
        self.queries
            .iter()
            .find(|(q, _)| q == qid)
            .map(|(_, entries)| entries.as_slice())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        let mut order: Vec<String> = Vec::new();
        let mut by_qid: HashMap<String, Vec<(String, f64, usize)>> = HashMap::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(Error::Format(format!(
                    "run line {}: expected 6 fields, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let rank: usize = fields[3].parse().map_err(|_| {
                Error::Format(format!("run line {}: bad rank '{}'", lineno + 1, fields[3]))
            })?;
            let score: f64 = fields[4].parse().map_err(|_| {
                Error::Format(format!(
                    "run line {}: bad score '{}'",
                    lineno + 1,
                    fields[4]
                ))
            })?;
            if !score.is_finite() {
                return Err(Error::Format(format!(
                    "run line {}: non-finite score",
                    lineno + 1
                )));
            }
            let qid = fields[0].to_string();
            if !by_qid.contains_key(&qid) {
                order.push(qid.clone());
            }
            by_qid
                .entry(qid)
                .or_default()
                .push((fields[2].to_string(), score, rank));
        }

        let mut queries = Vec::with_capacity(order.len());
        let mut rank_mismatches = 0usize;
        for qid in order {
            let mut entries = by_qid.remove(&qid).unwrap();
            entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut seen: HashMap<&str, ()> = HashMap::with_capacity(entries.len());
            for (pos, (docno, _, file_rank)) in entries.iter().enumerate() {
                if seen.insert(docno.as_str(), ()).is_some() {
                    return Err(Error::Format(format!(
                        "run repeats docno '{docno}' for qid '{qid}'"
                    )));
                }
                if *file_rank != pos + 1 {
                    rank_mismatches += 1;
                }
            }
            queries.push((qid, entries.into_iter().map(|(d, s, _)| (d, s)).collect()));
        }
        if rank_mismatches > 0 {
            eprintln!(
                "warning: {rank_mismatches} run lines had ranks inconsistent with their scores; ranks were regenerated"
            );
        }
        Ok(TrecRun { queries })
    }
}

fn write_entries(
    w: &mut impl Write,
    qid: &str,
    entries: impl Iterator<Item = (String, f64)>,
    tag: &str,
) -> Result<()> {
    for (rank0, (docno, score)) in entries.enumerate() {
        writeln!(w, "{qid} Q0 {docno} {} {score:.6} {tag}", rank0 + 1)?;
    }
    Ok(())
}

/// View in-memory pipeline output as a loaded run, docnos resolved.
pub fn runs_to_trec<F: Scalar>(runs: &[ScoredRun], corpus: &MultiVectorCorpus<F>) -> TrecRun {
    TrecRun {
        queries: runs
            .iter()
            .map(|run| {
                (
                    run.qid.clone(),
                    run.entries
                        .iter()
                        .map(|&(d, s)| (corpus.docno(d).to_string(), s))
                        .collect(),
                )
            })
            .collect(),
    }
}

/// Write exact second-stage runs in query order.
pub fn write_run<F: Scalar>(
    path: &Path,
    runs: &[ScoredRun],
    corpus: &MultiVectorCorpus<F>,
    tag: &str,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for run in runs {
        write_entries(
            &mut w,
            &run.qid,
            run.entries
                .iter()
                .map(|&(d, s)| (corpus.docno(d).to_string(), s)),
            tag,
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Write first-stage approximate rankings as a run. The Kprime strategy is
/// an unordered set and cannot be serialized this way.
pub fn write_firststage_run<F: Scalar>(
    path: &Path,
    rankings: &[CandidateRanking],
    corpus: &MultiVectorCorpus<F>,
    tag: &str,
) -> Result<()> {
    for r in rankings {
        if !r.strategy.is_ranked() {
            return Err(Error::NotRankable(
                "the kprime candidate set is unordered and cannot be written as a run",
            ));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    for r in rankings {
        write_entries(
            &mut w,
            &r.qid,
            r.docs
                .iter()
                .zip(&r.scores)
                .map(|(&d, &s)| (corpus.docno(d).to_string(), s)),
            tag,
        )?;
    }
    w.flush()?;
    Ok(())
}
