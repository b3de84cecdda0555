//! Two-stage multi-vector dense retrieval at desk scale.
//!
//! Documents and queries are bags of token embeddings. The first stage
//! answers each query embedding with its approximate top-k' document
//! embeddings from an IVFPQ index, maps them to documents, and optionally
//! ranks that candidate set (Count, SumSim, MaxSim) so it can be cut to a
//! fixed size k. The second stage re-scores the surviving candidates with
//! exact MaxSim over the uncompressed embeddings. The `eval` module houses
//! TREC-format I/O, the effectiveness metrics, paired significance tests,
//! synthetic workloads, and the cutoff sweep harness.
//!
//! Everything is deterministic for a fixed seed at any thread count, and
//! all persisted artifacts are little-endian with f32 payloads.

mod bytes;
pub mod candidates;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod ivfpq;
pub mod kmeans;
pub mod pq;
pub mod rerank;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// The scalar the shipped binary runs on. The library stays generic; files
/// on disk hold f32 regardless.
pub type Real = f32;
pub type Corpus = corpus::MultiVectorCorpus<Real>;
pub type Queries = corpus::QuerySet<Real>;
pub type Index = ivfpq::IvfPqIndex<Real>;
