//! Inverted-file product-quantization index over token embeddings.
//!
//! Embeddings are assigned to the coarse centroid maximizing the dot
//! product (the whole pipeline scores by dot products, and for unit
//! vectors the max-dot and min-L2 assignments coincide). Each posting
//! stores the PQ code of the residual x - c, so a search scores
//! dot(phi, c) + ADC(residual code) per candidate embedding.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::bytes::{
    read_exact_or_format, read_f32_le, read_u32_le, read_u64_le, write_f32_le, write_u32_le,
    write_u64_le,
};
use crate::corpus::{EmbeddingId, MultiVectorCorpus};
use crate::error::{Error, Result};
use crate::kmeans::{kmeans_train, KMeansModel};
use crate::pq::{pq_train, PqCodebook};
use crate::rng::SplitMix64;
use crate::scalar::{dot_wide, Scalar};

pub const DEFAULT_KPRIME: usize = 1000;
pub const DEFAULT_NPROBE: usize = 10;
pub const DEFAULT_M: usize = 16;
pub const DEFAULT_K_SUB: usize = 256;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.05;
/// Lloyd iteration budget for both the coarse and the sub-space quantizers.
pub const KMEANS_MAX_ITERS: usize = 25;

const MAGIC: [u8; 4] = *b"IVPQ";
const VERSION: u32 = 1;

/// Default partition count: 4 * sqrt(T) rounded to the nearest power of
/// two, clamped to [16, 65536].
pub fn default_partitions(total: u64) -> usize {
    let target = 4.0 * (total.max(1) as f64).sqrt();
    let exp = target.log2().round().clamp(4.0, 16.0) as u32;
    1usize << exp
}

/// One partition's postings: parallel arrays of embedding ids (ascending)
/// and `m`-byte PQ codes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PostingList {
    pub ids: Vec<u64>,
    pub codes: Vec<u8>,
}

impl PostingList {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvfPqIndex<F> {
    pub dim: usize,
    /// Total embeddings indexed.
    pub total: u64,
    /// Coarse quantizer. Training diagnostics (distortion, history) are not
    /// part of the index artifact and are always zeroed here so that a
    /// save/load round trip compares equal.
    pub coarse: KMeansModel<F>,
    pub cb: PqCodebook<F>,
    pub postings: Vec<PostingList>,
}

/// One approximate nearest-embedding result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingHit {
    pub embedding: EmbeddingId,
    pub approx_sim: f64,
}

/// Up to k' hits for one query embedding, sorted by (approx_sim desc, id asc).
pub type EmbeddingHitList = Vec<EmbeddingHit>;

fn argmax_dot<F: Scalar>(x: &[F], centroids: &[F], l: usize, dim: usize) -> u32 {
    let mut best = 0u32;
    let mut best_s = f64::NEG_INFINITY;
    for c in 0..l {
        let s = dot_wide(x, &centroids[c * dim..(c + 1) * dim]);
        if s > best_s {
            best_s = s;
            best = c as u32;
        }
    }
    best
}

/// Build an index over every embedding of `corpus`. Both quantizers train
/// on a seeded sample of `train_fraction` of the embeddings; the PQ stage
/// trains on that sample's residuals.
pub fn build_index<F: Scalar>(
    corpus: &MultiVectorCorpus<F>,
    l: usize,
    m: usize,
    k_sub: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<IvfPqIndex<F>> {
    assert!(l >= 1 && train_fraction > 0.0 && train_fraction <= 1.0);
    let dim = corpus.dim();
    let total = corpus.num_embeddings();
    if (l as u64) > total {
        return Err(Error::TooFewPoints {
            needed: l,
            have: total as usize,
        });
    }
    let sample_count = ((total as f64 * train_fraction).ceil() as u64).min(total) as usize;
    let needed = l.max(k_sub);
    if sample_count < needed {
        return Err(Error::TooFewPoints {
            needed,
            have: sample_count,
        });
    }

    let mut rng = SplitMix64::new(seed);
    let coarse_seed = rng.next_u64();
    let pq_seed = rng.next_u64();
    let mut sample_ids = rng.sample_indices(total as usize, sample_count);
    sample_ids.sort_unstable();

    let mut sample = Vec::with_capacity(sample_count * dim);
    for &id in &sample_ids {
        sample.extend_from_slice(corpus.embedding(EmbeddingId(id as u64)));
    }
    let coarse = kmeans_train(&sample, dim, l, KMEANS_MAX_ITERS, coarse_seed)?;

    let assignments: Vec<u32> = (0..total as usize)
        .into_par_iter()
        .map(|e| {
            argmax_dot(
                corpus.embedding(EmbeddingId(e as u64)),
                &coarse.centroids,
                l,
                dim,
            )
        })
        .collect();

    let residual = |id: usize| -> Vec<F> {
        let x = corpus.embedding(EmbeddingId(id as u64));
        let c = coarse.centroid(assignments[id] as usize);
        x.iter().zip(c).map(|(&a, &b)| a - b).collect()
    };

    let mut sample_residuals = Vec::with_capacity(sample_count * dim);
    for &id in &sample_ids {
        sample_residuals.extend(residual(id));
    }
    let cb = pq_train(&sample_residuals, dim, m, k_sub, KMEANS_MAX_ITERS, pq_seed)?;

    let codes: Vec<Vec<u8>> = (0..total as usize)
        .into_par_iter()
        .map(|id| cb.encode(&residual(id)))
        .collect();

    let mut postings = vec![PostingList::default(); l];
    for (id, code) in codes.iter().enumerate() {
        let list = &mut postings[assignments[id] as usize];
        list.ids.push(id as u64);
        list.codes.extend_from_slice(code);
    }

    Ok(IvfPqIndex {
        dim,
        total,
        coarse: KMeansModel {
            distortion: 0.0,
            history: Vec::new(),
            ..coarse
        },
        cb,
        postings,
    })
}

/// Heap entry ordered so the max-heap keeps the worst retained hit on top:
/// lower approx_sim is greater, ties prefer the higher id for eviction.
#[derive(Debug)]
struct HeapEntry {
    sim: f64,
    id: u64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.sim.total_cmp(&self.sim).then(self.id.cmp(&other.id))
    }
}

impl<F: Scalar> IvfPqIndex<F> {
    pub fn num_partitions(&self) -> usize {
        self.postings.len()
    }

    /// Top-k' approximate neighbors of one query embedding across the
    /// `nprobe` partitions whose centroids have the largest dot product
    /// with it. `nprobe` beyond the partition count clamps with a warning.
    pub fn search(
        &self,
        query_embedding: &[F],
        k_prime: usize,
        nprobe: usize,
    ) -> Result<EmbeddingHitList> {
        assert!(k_prime >= 1 && nprobe >= 1);
        if query_embedding.len() != self.dim {
            return Err(Error::Dim {
                left: query_embedding.len(),
                right: self.dim,
            });
        }
        let l = self.num_partitions();
        let nprobe = if nprobe > l {
            eprintln!("warning: nprobe {nprobe} exceeds {l} partitions, clamping");
            l
        } else {
            nprobe
        };

        let mut order: Vec<(f64, usize)> = (0..l)
            .map(|p| (dot_wide(query_embedding, self.coarse.centroid(p)), p))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        let table = self.cb.adc_table(query_embedding);
        let m = self.cb.m;
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::with_capacity(k_prime + 1);
        for &(offset, p) in order.iter().take(nprobe) {
            let list = &self.postings[p];
            for (slot, &id) in list.ids.iter().enumerate() {
                let code = &list.codes[slot * m..(slot + 1) * m];
                let sim = offset + table.score(code)?;
                debug_assert!(sim.is_finite());
                let entry = HeapEntry { sim, id };
                if heap.len() < k_prime {
                    heap.push(entry);
                } else if entry.cmp(heap.peek().unwrap()) == Ordering::Less {
                    heap.pop();
                    heap.push(entry);
                }
            }
        }

        let mut entries = heap.into_vec();
        entries.sort_unstable();
        Ok(entries
            .into_iter()
            .map(|e| EmbeddingHit {
                embedding: EmbeddingId(e.id),
                approx_sim: e.sim,
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&MAGIC)?;
        write_u32_le(&mut w, VERSION)?;
        write_u32_le(&mut w, self.dim as u32)?;
        write_u64_le(&mut w, self.total)?;
        write_u32_le(&mut w, self.num_partitions() as u32)?;
        write_u32_le(&mut w, self.cb.m as u32)?;
        write_u32_le(&mut w, self.cb.k_sub as u32)?;

        write_u64_le(&mut w, (self.coarse.centroids.len() * 4) as u64)?;
        for v in &self.coarse.centroids {
            write_f32_le(&mut w, v.to_f32().expect("finite centroid"))?;
        }

        write_u64_le(&mut w, (self.cb.codebooks.len() * 4) as u64)?;
        for v in &self.cb.codebooks {
            write_f32_le(&mut w, v.to_f32().expect("finite codeword"))?;
        }

        let postings_bytes: u64 = self
            .postings
            .iter()
            .map(|p| 8 + p.len() as u64 * (8 + self.cb.m as u64))
            .sum();
        write_u64_le(&mut w, postings_bytes)?;
        for list in &self.postings {
            write_u64_le(&mut w, list.len() as u64)?;
            for (slot, &id) in list.ids.iter().enumerate() {
                write_u64_le(&mut w, id)?;
                w.write_all(&list.codes[slot * self.cb.m..(slot + 1) * self.cb.m])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        read_exact_or_format(&mut r, &mut magic, "magic")?;
        if magic != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {magic:?}, expected {MAGIC:?}"
            )));
        }
        let version = read_u32_le(&mut r, "version")?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported index version {version} (supported: {VERSION})"
            )));
        }
        let dim = read_u32_le(&mut r, "dim")? as usize;
        let total = read_u64_le(&mut r, "total")?;
        let l = read_u32_le(&mut r, "partition count")? as usize;
        let m = read_u32_le(&mut r, "sub-quantizer count")? as usize;
        let k_sub = read_u32_le(&mut r, "codebook size")? as usize;
        if dim == 0 || l == 0 || m == 0 || !(1..=256).contains(&k_sub) {
            return Err(Error::Format(format!(
                "bad header: dim={dim} partitions={l} m={m} k_sub={k_sub}"
            )));
        }
        let sub_dim = dim.div_ceil(m);

        let read_floats = |r: &mut BufReader<File>, expect: usize, what: &str| -> Result<Vec<F>> {
            let bytes = read_u64_le(r, what)?;
            if bytes != (expect * 4) as u64 {
                return Err(Error::Format(format!(
                    "{what} section is {bytes} bytes, expected {}",
                    expect * 4
                )));
            }
            let mut out = Vec::with_capacity(expect);
            for _ in 0..expect {
                out.push(F::from_f32_exact(read_f32_le(r, what)?));
            }
            Ok(out)
        };
        let centroids = read_floats(&mut r, l * dim, "coarse centroids")?;
        let codebooks = read_floats(&mut r, m * k_sub * sub_dim, "codebooks")?;

        let postings_bytes = read_u64_le(&mut r, "postings section")?;
        let mut postings = Vec::with_capacity(l);
        let mut consumed = 0u64;
        let mut seen = vec![false; total as usize];
        for p in 0..l {
            let len = read_u64_le(&mut r, "posting list length")?;
            consumed += 8;
            let mut list = PostingList {
                ids: Vec::with_capacity(len as usize),
                codes: Vec::with_capacity(len as usize * m),
            };
            let mut code = vec![0u8; m];
            for _ in 0..len {
                let id = read_u64_le(&mut r, "posting id")?;
                read_exact_or_format(&mut r, &mut code, "posting code")?;
                consumed += 8 + m as u64;
                if id >= total {
                    return Err(Error::OutOfRange { id, total });
                }
                if seen[id as usize] {
                    return Err(Error::Format(format!(
                        "embedding {id} appears in more than one posting list"
                    )));
                }
                seen[id as usize] = true;
                if let Some(&last) = list.ids.last() {
                    if last >= id {
                        return Err(Error::Format(format!(
                            "partition {p} posting ids not ascending at {id}"
                        )));
                    }
                }
                for &b in &code {
                    if b as usize >= k_sub {
                        return Err(Error::CorruptCode { code: b, k_sub });
                    }
                }
                list.ids.push(id);
                list.codes.extend_from_slice(&code);
            }
            postings.push(list);
        }
        if consumed != postings_bytes {
            return Err(Error::Format(format!(
                "postings section is {consumed} bytes, header declared {postings_bytes}"
            )));
        }
        let indexed: u64 = postings.iter().map(|p| p.len() as u64).sum();
        if indexed != total {
            return Err(Error::Format(format!(
                "posting lists hold {indexed} embeddings, header declared {total}"
            )));
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(Error::Format(
                "trailing bytes after the postings section".into(),
            ));
        }

        Ok(IvfPqIndex {
            dim,
            total,
            coarse: KMeansModel {
                k: l,
                dim,
                centroids,
                distortion: 0.0,
                history: Vec::new(),
            },
            cb: PqCodebook {
                m,
                k_sub,
                sub_dim,
                dim,
                codebooks,
            },
            postings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::normalize_rows;
    use tempfile::TempDir;

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

    fn brute_force_top(corpus: &MultiVectorCorpus<f32>, q: &[f32], k: usize) -> Vec<(u64, f64)> {
        let mut scored: Vec<(u64, f64)> = (0..corpus.num_embeddings())
            .map(|id| (id, dot_wide(q, corpus.embedding(EmbeddingId(id)))))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
    }

    #[test]
    fn four_unit_embeddings_four_singleton_partitions() {
        let docs = vec![
            ("D0".to_string(), vec![1.0f32, 0.0]),
            ("D1".to_string(), vec![0.0, 1.0]),
            ("D2".to_string(), vec![-1.0, 0.0]),
            ("D3".to_string(), vec![0.0, -1.0]),
        ];
        let corpus = MultiVectorCorpus::from_docs(2, docs).unwrap();
        let ix = build_index(&corpus, 4, 2, 4, 1.0, 3).unwrap();
        for list in &ix.postings {
            assert_eq!(list.len(), 1);
        }
        let mut all: Vec<u64> = ix.postings.iter().flat_map(|p| p.ids.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn every_id_in_exactly_one_list() {
        let corpus = synth_corpus(250, 4, 8, 1);
        let ix = build_index(&corpus, 16, 4, 16, 0.5, 7).unwrap();
        let mut seen = vec![0u32; 1000];
        for list in &ix.postings {
            for w in list.ids.windows(2) {
                assert!(w[0] < w[1], "posting ids not ascending");
            }
            for &id in &list.ids {
                seen[id as usize] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn l_exceeding_total_is_too_few_points() {
        let corpus = synth_corpus(2, 2, 4, 2);
        assert!(matches!(
            build_index(&corpus, 5, 2, 2, 1.0, 0),
            Err(Error::TooFewPoints { needed: 5, have: 4 })
        ));
    }

    #[test]
    fn small_sample_is_too_few_points() {
        let corpus = synth_corpus(25, 4, 4, 3);
        // 5% of 100 embeddings is a 5-point sample, below k_sub = 16.
        assert!(matches!(
            build_index(&corpus, 4, 2, 16, 0.05, 0),
            Err(Error::TooFewPoints {
                needed: 16,
                have: 5
            })
        ));
    }

    #[test]
    fn lossless_settings_match_brute_force() {
        // 64 embeddings, m = dim and k_sub = 64 memorize every residual
        // coordinate, so probing all partitions is an exact dot-product scan.
        let corpus = synth_corpus(16, 4, 4, 11);
        let ix = build_index(&corpus, 4, 4, 64, 1.0, 5).unwrap();
        let mut q = vec![0.3f32, -0.1, 0.8, 0.4];
        normalize_rows(&mut q, 4);
        let hits = ix.search(&q, 10, 4).unwrap();
        let oracle = brute_force_top(&corpus, &q, 10);
        assert_eq!(hits.len(), 10);
        for (hit, (oid, osim)) in hits.iter().zip(&oracle) {
            assert_eq!(hit.embedding.0, *oid);
            assert!(
                (hit.approx_sim - osim).abs() <= 1e-5 * osim.abs().max(1.0),
                "approx {} vs exact {osim}",
                hit.approx_sim
            );
        }
    }

    #[test]
    fn approx_sim_matches_scalar_recomputation() {
        let corpus = synth_corpus(50, 4, 8, 21);
        let ix = build_index(&corpus, 8, 4, 16, 0.5, 9).unwrap();
        let mut q = vec![0.1f32, 0.9, -0.3, 0.2, 0.0, 0.5, -0.6, 0.4];
        normalize_rows(&mut q, 8);
        let hits = ix.search(&q, 20, ix.num_partitions()).unwrap();
        assert!(!hits.is_empty());
        for hit in &hits {
            // Locate the hit's partition and code, then redo the arithmetic
            // with plain loops, no ADC table.
            let (p, slot) = ix
                .postings
                .iter()
                .enumerate()
                .find_map(|(p, list)| {
                    list.ids
                        .iter()
                        .position(|&id| id == hit.embedding.0)
                        .map(|slot| (p, slot))
                })
                .unwrap();
            let code = &ix.postings[p].codes[slot * ix.cb.m..(slot + 1) * ix.cb.m];
            let mut reference = dot_wide(&q, ix.coarse.centroid(p));
            let padded_dim = ix.cb.m * ix.cb.sub_dim;
            let mut padded_q = q.clone();
            padded_q.resize(padded_dim, 0.0);
            for (s, &j) in code.iter().enumerate() {
                let word = ix.cb.codeword(s, j as usize);
                for (a, b) in padded_q[s * ix.cb.sub_dim..(s + 1) * ix.cb.sub_dim]
                    .iter()
                    .zip(word)
                {
                    reference += *a as f64 * *b as f64;
                }
            }
            assert!(
                (hit.approx_sim - reference).abs() <= 1e-5 * reference.abs().max(1.0),
                "hit {} vs reference {reference}",
                hit.approx_sim
            );
        }
    }

    #[test]
    fn nprobe_clamps_to_partition_count() {
        let corpus = synth_corpus(20, 4, 4, 4);
        let ix = build_index(&corpus, 4, 2, 8, 0.5, 2).unwrap();
        let q = vec![0.5f32, 0.5, 0.5, 0.5];
        let clamped = ix.search(&q, 5, 100).unwrap();
        let full = ix.search(&q, 5, 4).unwrap();
        assert_eq!(clamped, full);
    }

    #[test]
    fn short_hit_list_when_k_prime_exceeds_probed_embeddings() {
        let corpus = synth_corpus(5, 2, 4, 6);
        let ix = build_index(&corpus, 2, 2, 4, 1.0, 8).unwrap();
        let q = vec![1.0f32, 0.0, 0.0, 0.0];
        let hits = ix.search(&q, 1000, 2).unwrap();
        assert_eq!(hits.len(), 10);
        for w in hits.windows(2) {
            assert!(
                w[0].approx_sim > w[1].approx_sim
                    || (w[0].approx_sim == w[1].approx_sim && w[0].embedding.0 < w[1].embedding.0)
            );
        }
    }

    #[test]
    fn recall_is_non_decreasing_in_nprobe() {
        let corpus = synth_corpus(500, 4, 8, 31);
        let l = 16;
        // sub_dim 1 with 256 codewords keeps quantization error tiny, so the
        // full probe recovers nearly all of the exact top list and the sweep
        // over nprobe isolates the effect of probing fewer partitions.
        let ix = build_index(&corpus, l, 8, 256, 0.5, 13).unwrap();
        let mut rng = SplitMix64::new(99);
        let mut queries = Vec::new();
        for _ in 0..50 {
            let mut q: Vec<f32> = (0..8).map(|_| rng.next_gaussian() as f32).collect();
            normalize_rows(&mut q, 8);
            queries.push(q);
        }
        let k_prime = 50;
        let mean_recall = |nprobe: usize| -> f64 {
            let mut acc = 0.0;
            for q in &queries {
                let hits = ix.search(q, k_prime, nprobe).unwrap();
                let got: std::collections::HashSet<u64> =
                    hits.iter().map(|h| h.embedding.0).collect();
                let truth = brute_force_top(&corpus, q, k_prime);
                let inter = truth.iter().filter(|(id, _)| got.contains(id)).count();
                acc += inter as f64 / k_prime as f64;
            }
            acc / queries.len() as f64
        };
        let r1 = mean_recall(1);
        let r4 = mean_recall(4);
        let rl = mean_recall(l);
        assert!(r1 <= r4 + 1e-12 && r4 <= rl + 1e-12, "{r1} {r4} {rl}");
        assert!(
            rl > 0.9,
            "full probe should recover most of the truth: {rl}"
        );
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let corpus = synth_corpus(40, 3, 6, 17);
        let ix = build_index(&corpus, 8, 3, 16, 0.5, 19).unwrap();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("test.ivpq");
        ix.save(&path).unwrap();
        let loaded = IvfPqIndex::<f32>::load(&path).unwrap();
        assert_eq!(ix, loaded);
    }

    #[test]
    fn truncated_and_versioned_files_are_rejected() {
        let corpus = synth_corpus(10, 2, 4, 23);
        let ix = build_index(&corpus, 2, 2, 4, 1.0, 29).unwrap();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("test.ivpq");
        ix.save(&path).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.ivpq");
        std::fs::write(&cut, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            IvfPqIndex::<f32>::load(&cut),
            Err(Error::Format(_))
        ));

        let mut v2 = bytes.clone();
        v2[4] = 2;
        let vpath = dir.path().join("v2.ivpq");
        std::fs::write(&vpath, &v2).unwrap();
        match IvfPqIndex::<f32>::load(&vpath) {
            Err(Error::Format(msg)) => {
                assert!(msg.contains("version 2") && msg.contains('1'), "{msg}")
            }
            other => panic!("expected format error, got {other:?}"),
        }

        let mut bad_magic = bytes;
        bad_magic[0] = b'X';
        let mpath = dir.path().join("badmagic.ivpq");
        std::fs::write(&mpath, &bad_magic).unwrap();
        assert!(matches!(
            IvfPqIndex::<f32>::load(&mpath),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn build_and_search_deterministic_across_pool_sizes() {
        let corpus = synth_corpus(100, 4, 8, 41);
        let build = || build_index(&corpus, 8, 4, 16, 0.25, 77).unwrap();
        let a = build();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(build);
        assert_eq!(a, b);
        let q = corpus.embedding(EmbeddingId(0)).to_vec();
        assert_eq!(
            a.search(&q, 25, 3).unwrap(),
            pool.install(|| b.search(&q, 25, 3).unwrap())
        );
    }
}
