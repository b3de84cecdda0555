//! Effectiveness metrics over loaded runs: MRR, NDCG, MAP, Recall@k.
//!
//! A query counts toward the aggregate mean only if its qrels contain at
//! least one relevant document (grade >= 1); the rest are tallied as
//! unjudged. NDCG uses the 2^grade - 1 gain with a log2(rank + 1) discount
//! and an ideal ranking taken from the qrels.

use super::trec::{Qrels, TrecRun};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// (qid, value) for judged queries, in run order.
    pub per_query: Vec<(String, f64)>,
    /// Arithmetic mean over judged queries; 0 when none are judged.
    pub mean: f64,
    /// Queries skipped for having no relevant document in the qrels.
    pub unjudged: usize,
}

fn report(
    run: &TrecRun,
    qrels: &Qrels,
    per_query: impl Fn(&str, &[(String, f64)]) -> f64,
) -> MetricReport {
    let mut values = Vec::new();
    let mut unjudged = 0usize;
    for (qid, entries) in &run.queries {
        if qrels.num_relevant(qid) == 0 {
            unjudged += 1;
            continue;
        }
        values.push((qid.clone(), per_query(qid, entries)));
    }
    let mean = if values.is_empty() {
        0.0
    } else {
        values.iter().map(|(_, v)| v).sum::<f64>() / values.len() as f64
    };
    MetricReport {
        per_query: values,
        mean,
        unjudged,
    }
}

/// Reciprocal rank of the first relevant document within `depth`
/// (`None` = unbounded), else 0.
pub fn mrr(run: &TrecRun, qrels: &Qrels, depth: Option<usize>) -> MetricReport {
    report(run, qrels, |qid, entries| {
        let limit = depth.unwrap_or(entries.len()).min(entries.len());
        for (pos, (docno, _)) in entries[..limit].iter().enumerate() {
            if qrels.grade(qid, docno) >= 1 {
                return 1.0 / (pos + 1) as f64;
            }
        }
        0.0
    })
}

fn gain(grade: u32) -> f64 {
    2.0f64.powi(grade as i32) - 1.0
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

/// NDCG at `depth`: DCG of the run over the ideal DCG from the qrels.
pub fn ndcg(run: &TrecRun, qrels: &Qrels, depth: usize) -> MetricReport {
    report(run, qrels, |qid, entries| {
        let mut dcg = 0.0;
        for (pos, (docno, _)) in entries.iter().take(depth).enumerate() {
            dcg += gain(qrels.grade(qid, docno)) / discount(pos + 1);
        }
        let mut grades: Vec<u32> = qrels
            .judgments(qid)
            .map(|docs| docs.values().copied().collect())
            .unwrap_or_default();
        grades.sort_unstable_by(|a, b| b.cmp(a));
        let idcg: f64 = grades
            .iter()
            .take(depth)
            .enumerate()
            .map(|(pos, &g)| gain(g) / discount(pos + 1))
            .sum();
        // Judged queries have a grade >= 1 somewhere, so idcg > 0.
        dcg / idcg
    })
}

/// Mean average precision over the full run depth.
pub fn map(run: &TrecRun, qrels: &Qrels) -> MetricReport {
    report(run, qrels, |qid, entries| {
        let total = qrels.num_relevant(qid);
        let mut seen = 0usize;
        let mut acc = 0.0;
        for (pos, (docno, _)) in entries.iter().enumerate() {
            if qrels.grade(qid, docno) >= 1 {
                seen += 1;
                acc += seen as f64 / (pos + 1) as f64;
            }
        }
        acc / total as f64
    })
}

/// Fraction of the relevant documents present in the top k.
pub fn recall_at(run: &TrecRun, qrels: &Qrels, k: usize) -> MetricReport {
    report(run, qrels, |qid, entries| {
        let total = qrels.num_relevant(qid);
        let found = entries
            .iter()
            .take(k)
            .filter(|(docno, _)| qrels.grade(qid, docno) >= 1)
            .count();
        found as f64 / total as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_of(qid: &str, docnos: &[&str]) -> TrecRun {
        TrecRun {
            queries: vec![(
                qid.to_string(),
                docnos
                    .iter()
                    .enumerate()
                    .map(|(i, d)| (d.to_string(), (docnos.len() - i) as f64))
                    .collect(),
            )],
        }
    }

    fn qrels_of(qid: &str, graded: &[(&str, u32)]) -> Qrels {
        let mut q = Qrels::new();
        for (d, g) in graded {
            q.insert(qid, d, *g);
        }
        q
    }

    #[test]
    fn mrr_first_relevant_at_rank_three() {
        let run = run_of("q", &["a", "b", "c", "d"]);
        let qrels = qrels_of("q", &[("c", 1)]);
        let r = mrr(&run, &qrels, Some(10));
        assert_eq!(r.per_query, vec![("q".to_string(), 1.0 / 3.0)]);
    }

    #[test]
    fn mrr_cut_off_by_depth() {
        let docnos: Vec<String> = (0..11).map(|i| format!("d{i}")).collect();
        let refs: Vec<&str> = docnos.iter().map(|s| s.as_str()).collect();
        let run = run_of("q", &refs);
        let qrels = qrels_of("q", &[("d10", 1)]); // rank 11
        assert_eq!(mrr(&run, &qrels, Some(10)).mean, 0.0);
        assert_eq!(mrr(&run, &qrels, None).mean, 1.0 / 11.0);
    }

    #[test]
    fn mrr_relevant_at_rank_one() {
        let run = run_of("q", &["a", "b"]);
        let qrels = qrels_of("q", &[("a", 1)]);
        assert_eq!(mrr(&run, &qrels, Some(10)).mean, 1.0);
    }

    #[test]
    fn unbounded_mrr_dominates_depth_ten() {
        for rel_rank in [1usize, 5, 10, 15] {
            let docnos: Vec<String> = (0..20).map(|i| format!("d{i}")).collect();
            let refs: Vec<&str> = docnos.iter().map(|s| s.as_str()).collect();
            let run = run_of("q", &refs);
            let qrels = qrels_of("q", &[(&format!("d{}", rel_rank - 1), 1)]);
            assert!(mrr(&run, &qrels, None).mean >= mrr(&run, &qrels, Some(10)).mean);
        }
    }

    #[test]
    fn ndcg_binary_fixture() {
        // Relevant at ranks 1 and 3, two relevant total:
        // DCG = 1 + 0.5 = 1.5, IDCG = 1 + 1/log2(3).
        let run = run_of("q", &["a", "b", "c"]);
        let qrels = qrels_of("q", &[("a", 1), ("c", 1)]);
        let r = ndcg(&run, &qrels, 10);
        assert!(
            (r.mean - 0.919_720_789_148_187_6).abs() < 1e-9,
            "{}",
            r.mean
        );
    }

    #[test]
    fn perfect_ndcg_is_one() {
        let run = run_of("q", &["a", "b"]);
        let qrels = qrels_of("q", &[("a", 2), ("b", 1)]);
        assert!((ndcg(&run, &qrels, 10).mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ndcg_without_relevant_retrieved_is_zero() {
        let run = run_of("q", &["x", "y"]);
        let qrels = qrels_of("q", &[("a", 1)]);
        assert_eq!(ndcg(&run, &qrels, 10).mean, 0.0);
    }

    #[test]
    fn map_perfect_two_relevant() {
        let run = run_of("q", &["a", "b"]);
        let qrels = qrels_of("q", &[("a", 1), ("b", 1)]);
        assert_eq!(map(&run, &qrels).mean, 1.0);
    }

    #[test]
    fn map_single_relevant_at_rank_two() {
        let run = run_of("q", &["x", "a"]);
        let qrels = qrels_of("q", &[("a", 1)]);
        assert_eq!(map(&run, &qrels).mean, 0.5);
    }

    #[test]
    fn map_three_relevant_fixture() {
        // Relevant at ranks 1 and 3, third unretrieved:
        // (1 + 2/3 + 0) / 3 = 5/9.
        let run = run_of("q", &["a", "x", "b"]);
        let qrels = qrels_of("q", &[("a", 1), ("b", 1), ("c", 1)]);
        let r = map(&run, &qrels);
        assert!((r.mean - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn recall_fixtures() {
        let run = run_of("q", &["a", "x", "b"]);
        let qrels = qrels_of("q", &[("a", 1), ("b", 1)]);
        assert_eq!(recall_at(&run, &qrels, 2).mean, 0.5);
        assert_eq!(recall_at(&run, &qrels, 3).mean, 1.0);
        assert_eq!(recall_at(&run, &qrels, 0).mean, 0.0);
    }

    #[test]
    fn recall_is_monotone_in_k() {
        let run = run_of("q", &["a", "b", "c", "d", "e"]);
        let qrels = qrels_of("q", &[("b", 1), ("d", 1), ("e", 1)]);
        let mut last = 0.0;
        for k in 0..=6 {
            let v = recall_at(&run, &qrels, k).mean;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn unjudged_queries_are_excluded_with_a_count() {
        let mut run = run_of("q1", &["a"]);
        run.queries
            .push(("q2".to_string(), vec![("a".to_string(), 1.0)]));
        let mut qrels = qrels_of("q1", &[("a", 1)]);
        qrels.insert("q2", "a", 0); // judged line but nothing relevant
        let r = mrr(&run, &qrels, Some(10));
        assert_eq!(r.per_query.len(), 1);
        assert_eq!(r.unjudged, 1);
        assert_eq!(r.mean, 1.0);
    }

    #[test]
    fn values_stay_in_unit_interval() {
        let run = run_of("q", &["a", "b", "c", "d"]);
        let qrels = qrels_of("q", &[("a", 3), ("c", 1), ("z", 2)]);
        for v in [
            mrr(&run, &qrels, Some(10)).mean,
            ndcg(&run, &qrels, 10).mean,
            map(&run, &qrels).mean,
            recall_at(&run, &qrels, 4).mean,
        ] {
            assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }
}
