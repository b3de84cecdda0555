//! Token-embedding storage: document corpora, query sets, and the on-disk
//! embedding format.
//!
//! # File format
//!
//! An embedding file is little-endian binary: magic `MVEC` (4 bytes),
//! `version: u32 = 1`, `dim: u32`, `num_records: u64`, then one record per
//! document (or query): `record_len: u32` followed by `record_len * dim`
//! IEEE-754 32-bit floats. Records appear in internal-id order.
//!
//! Each `.mvec` file is paired with an id table at the same path with the
//! extension replaced by `.tsv`: one `internal_id<TAB>name` line per record,
//! in internal-id order, where `name` is the external docno (corpora) or qid
//! (query sets).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::bytes::{read_exact_or_format, read_u32_le, read_u64_le};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default cap on per-document token count.
pub const MAX_DOC_LEN: usize = 180;
/// Default cap on per-query token count.
pub const MAX_QUERY_LEN: usize = 32;

const MAGIC: [u8; 4] = *b"MVEC";
const VERSION: u32 = 1;

/// Rows whose L2 norm is below this are left untouched by normalization.
const DEGENERATE_NORM: f64 = 1e-12;
/// Rows whose L2 norm is already within this of 1 are passed through, which
/// makes normalization exactly idempotent.
const UNIT_NORM_SLACK: f64 = 1e-6;

/// Global ordinal of a token embedding across the whole corpus (`0..T`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EmbeddingId(pub u64);

/// Dense internal document ordinal (`0..N`); the external name is the docno.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DocId(pub u32);

impl DocId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A corpus of per-document token-embedding matrices.
///
/// Document `d` owns embedding rows `doc_offsets[d] .. doc_offsets[d+1]` of
/// the flat row-major `embeddings` matrix; that mapping and its precomputed
/// inverse (`embedding -> document`) are what the first retrieval stage uses
/// to turn embedding hits into candidate documents.
///
/// Immutable after load; shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiVectorCorpus<F> {
    dim: usize,
    doc_offsets: Vec<u64>,
    embeddings: Vec<F>,
    docnos: Vec<String>,
    // Flat embedding -> doc lookup; 4 bytes per embedding for O(1) mapping.
    doc_of: Vec<u32>,
}

impl<F: Scalar> MultiVectorCorpus<F> {
    /// Assemble a corpus from per-document matrices.
    pub fn from_docs(dim: usize, docs: Vec<(String, Vec<F>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("embedding dimensionality must be > 0".into()));
        }
        let mut doc_offsets = Vec::with_capacity(docs.len() + 1);
        let mut embeddings = Vec::new();
        let mut docnos = Vec::with_capacity(docs.len());
        doc_offsets.push(0u64);
        for (docno, rows) in docs {
            if rows.is_empty() || rows.len() % dim != 0 {
                return Err(Error::Format(format!(
                    "document '{docno}' has a length that is not a positive multiple of dim {dim}"
                )));
            }
            embeddings.extend_from_slice(&rows);
            doc_offsets.push((embeddings.len() / dim) as u64);
            docnos.push(docno);
        }
        validate_names(&docnos, "docno")?;
        let doc_of = build_doc_lookup(&doc_offsets);
        Ok(Self {
            dim,
            doc_offsets,
            embeddings,
            docnos,
            doc_of,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_docs(&self) -> usize {
        self.docnos.len()
    }

    /// Total token embeddings T.
    pub fn num_embeddings(&self) -> u64 {
        *self.doc_offsets.last().unwrap()
    }

    pub fn doc_offsets(&self) -> &[u64] {
        &self.doc_offsets
    }

    pub fn docno(&self, d: DocId) -> &str {
        &self.docnos[d.index()]
    }

    pub fn docnos(&self) -> &[String] {
        &self.docnos
    }

    /// Number of token embeddings of one document.
    pub fn doc_len(&self, d: DocId) -> usize {
        (self.doc_offsets[d.index() + 1] - self.doc_offsets[d.index()]) as usize
    }

    /// The `|d| x dim` embedding matrix of one document.
    pub fn doc_embeddings(&self, d: DocId) -> &[F] {
        let lo = self.doc_offsets[d.index()] as usize * self.dim;
        let hi = self.doc_offsets[d.index() + 1] as usize * self.dim;
        &self.embeddings[lo..hi]
    }

    /// One embedding row.
    pub fn embedding(&self, e: EmbeddingId) -> &[F] {
        let lo = e.0 as usize * self.dim;
        &self.embeddings[lo..lo + self.dim]
    }

    /// All embedding rows, flat row-major.
    pub fn embeddings(&self) -> &[F] {
        &self.embeddings
    }

    /// Map a token embedding back to its owning document.
    pub fn embedding_to_doc(&self, e: EmbeddingId) -> Result<DocId> {
        self.doc_of
            .get(e.0 as usize)
            .map(|&d| DocId(d))
            .ok_or(Error::OutOfRange {
                id: e.0,
                total: self.num_embeddings(),
            })
    }

    /// Unit-normalize every row in place. Rows with norm below 1e-12 are
    /// left untouched; the returned tally counts them. Rows already within
    /// 1e-6 of unit norm pass through unchanged, so the operation is exactly
    /// idempotent.
    pub fn normalize(&mut self) -> usize {
        normalize_rows(&mut self.embeddings, self.dim)
    }

    /// Load a corpus from an `.mvec` file and its sibling docno table.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_limit(path, MAX_DOC_LEN)
    }

    pub fn load_with_limit(path: impl AsRef<Path>, max_len: usize) -> Result<Self> {
        let path = path.as_ref();
        let (dim, lens, embeddings) = read_mvec(path, max_len, "document")?;
        let docnos = read_id_table(&id_table_path(path), lens.len(), "docno")?;
        let mut doc_offsets = Vec::with_capacity(lens.len() + 1);
        doc_offsets.push(0u64);
        let mut total = 0u64;
        for len in &lens {
            total += u64::from(*len);
            doc_offsets.push(total);
        }
        let doc_of = build_doc_lookup(&doc_offsets);
        Ok(Self {
            dim,
            doc_offsets,
            embeddings,
            docnos,
            doc_of,
        })
    }

    /// Write the `.mvec` file and its sibling docno table.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let lens: Vec<u32> = (0..self.num_docs())
            .map(|d| self.doc_len(DocId(d as u32)) as u32)
            .collect();
        write_mvec(path, self.dim, &lens, &self.embeddings)?;
        write_id_table(&id_table_path(path), &self.docnos)
    }
}

/// One query: its qid and `n x dim` embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Query<F> {
    pub qid: String,
    pub embeddings: Vec<F>,
}

impl<F: Scalar> Query<F> {
    pub fn num_embeddings(&self, dim: usize) -> usize {
        self.embeddings.len() / dim
    }

    pub fn embedding(&self, i: usize, dim: usize) -> &[F] {
        &self.embeddings[i * dim..(i + 1) * dim]
    }
}

/// A set of queries sharing one dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet<F> {
    dim: usize,
    queries: Vec<Query<F>>,
}

impl<F: Scalar> QuerySet<F> {
    pub fn from_queries(dim: usize, queries: Vec<(String, Vec<F>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("embedding dimensionality must be > 0".into()));
        }
        for (qid, rows) in &queries {
            if rows.is_empty() || rows.len() % dim != 0 {
                return Err(Error::Format(format!(
                    "query '{qid}' has a length that is not a positive multiple of dim {dim}"
                )));
            }
        }
        let qids: Vec<String> = queries.iter().map(|(q, _)| q.clone()).collect();
        validate_names(&qids, "qid")?;
        Ok(Self {
            dim,
            queries: queries
                .into_iter()
                .map(|(qid, embeddings)| Query { qid, embeddings })
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn queries(&self) -> &[Query<F>] {
        &self.queries
    }

    pub fn normalize(&mut self) -> usize {
        let dim = self.dim;
        self.queries
            .iter_mut()
            .map(|q| normalize_rows(&mut q.embeddings, dim))
            .sum()
    }

    /// Load a query set from an `.mvec` file and its sibling qid table.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_limit(path, MAX_QUERY_LEN)
    }

    pub fn load_with_limit(path: impl AsRef<Path>, max_len: usize) -> Result<Self> {
        let path = path.as_ref();
        let (dim, lens, flat) = read_mvec(path, max_len, "query")?;
        let qids = read_id_table(&id_table_path(path), lens.len(), "qid")?;
        let mut queries = Vec::with_capacity(lens.len());
        let mut offset = 0usize;
        for (qid, len) in qids.into_iter().zip(&lens) {
            let n = *len as usize * dim;
            queries.push(Query {
                qid,
                embeddings: flat[offset..offset + n].to_vec(),
            });
            offset += n;
        }
        Ok(Self { dim, queries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let lens: Vec<u32> = self
            .queries
            .iter()
            .map(|q| (q.embeddings.len() / self.dim) as u32)
            .collect();
        let flat: Vec<F> = self
            .queries
            .iter()
            .flat_map(|q| q.embeddings.iter().copied())
            .collect();
        write_mvec(path, self.dim, &lens, &flat)?;
        let qids: Vec<String> = self.queries.iter().map(|q| q.qid.clone()).collect();
        write_id_table(&id_table_path(path), &qids)
    }
}

/// Sibling id-table path: same stem, `.tsv` extension.
pub fn id_table_path(mvec_path: &Path) -> PathBuf {
    mvec_path.with_extension("tsv")
}

fn build_doc_lookup(doc_offsets: &[u64]) -> Vec<u32> {
    let total = *doc_offsets.last().unwrap() as usize;
    let mut doc_of = Vec::with_capacity(total);
    for d in 0..doc_offsets.len() - 1 {
        let len = (doc_offsets[d + 1] - doc_offsets[d]) as usize;
        doc_of.extend(std::iter::repeat_n(d as u32, len));
    }
    doc_of
}

fn validate_names(names: &[String], kind: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(names.len());
    for name in names {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Format(format!(
                "{kind} '{name}' must be non-empty and whitespace-free"
            )));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::Format(format!("duplicate {kind} '{name}'")));
        }
    }
    Ok(())
}

/// Unit-normalize `dim`-wide rows of a flat matrix; returns the number of
/// degenerate (near-zero-norm) rows that were left untouched.
pub fn normalize_rows<F: Scalar>(data: &mut [F], dim: usize) -> usize {
    assert!(dim > 0 && data.len().is_multiple_of(dim));
    let mut degenerate = 0usize;
    for row in data.chunks_mut(dim) {
        let norm = row
            .iter()
            .map(|v| v.as_f64() * v.as_f64())
            .sum::<f64>()
            .sqrt();
        if norm < DEGENERATE_NORM {
            degenerate += 1;
        } else if (norm - 1.0).abs() > UNIT_NORM_SLACK {
            let inv = 1.0 / norm;
            for v in row.iter_mut() {
                *v = F::from_f64_lossy(v.as_f64() * inv);
            }
        }
    }
    degenerate
}

fn read_mvec<F: Scalar>(
    path: &Path,
    max_len: usize,
    kind: &str,
) -> Result<(usize, Vec<u32>, Vec<F>)> {
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
            "unsupported embedding file version {version} (supported: {VERSION})"
        )));
    }
    let dim = read_u32_le(&mut r, "dim")? as usize;
    if dim == 0 {
        return Err(Error::Format("dim must be > 0".into()));
    }
    let num_records = read_u64_le(&mut r, "record count")?;

    let mut lens = Vec::with_capacity(num_records as usize);
    let mut flat: Vec<F> = Vec::new();
    let mut payload = Vec::new();
    for rec in 0..num_records {
        let len = read_u32_le(&mut r, "record length")? as usize;
        if len == 0 {
            return Err(Error::Format(format!(
                "{kind} record {rec} has zero length"
            )));
        }
        if len > max_len {
            return Err(Error::Format(format!(
                "{kind} record {rec} has {len} embeddings, exceeding the limit of {max_len}"
            )));
        }
        payload.resize(len * dim * 4, 0u8);
        read_exact_or_format(&mut r, &mut payload, "record payload")?;
        flat.reserve(len * dim);
        for chunk in payload.chunks_exact(4) {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            flat.push(F::from_f32_exact(v));
        }
        lens.push(len as u32);
    }
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok((dim, lens, flat)),
        _ => Err(Error::Format(
            "trailing bytes after the declared records".into(),
        )),
    }
}

fn write_mvec<F: Scalar>(path: &Path, dim: usize, lens: &[u32], flat: &[F]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&(lens.len() as u64).to_le_bytes())?;
    let mut offset = 0usize;
    for &len in lens {
        w.write_all(&len.to_le_bytes())?;
        let n = len as usize * dim;
        for v in &flat[offset..offset + n] {
            w.write_all(&(v.to_f32().expect("finite value")).to_le_bytes())?;
        }
        offset += n;
    }
    w.flush()?;
    Ok(())
}

fn read_id_table(path: &Path, expected: usize, kind: &str) -> Result<Vec<String>> {
    let r = BufReader::new(File::open(path)?);
    let mut names = Vec::with_capacity(expected);
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        let id: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("{kind} table line {lineno}: bad id")))?;
        let name = parts
            .next()
            .ok_or_else(|| Error::Format(format!("{kind} table line {lineno}: missing name")))?;
        if id != names.len() {
            return Err(Error::Format(format!(
                "{kind} table line {lineno}: id {id} out of order (expected {})",
                names.len()
            )));
        }
        names.push(name.to_string());
    }
    if names.len() != expected {
        return Err(Error::Format(format!(
            "{kind} table has {} entries but the embedding file has {expected} records",
            names.len()
        )));
    }
    validate_names(&names, kind)?;
    Ok(names)
}

fn write_id_table(path: &Path, names: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (id, name) in names.iter().enumerate() {
        writeln!(w, "{id}\t{name}")?;
    }
    w.flush()?;
    Ok(())
}
