//! Error type shared across the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or unreadable on-disk data (bad magic, truncation, ...).
    #[error("format error: {0}")]
    Format(String),

    /// Embedding id outside `0..T`.
    #[error("embedding id {id} out of range (corpus has {total} embeddings)")]
    OutOfRange { id: u64, total: u64 },

    /// Not enough data points to train the requested model.
    #[error("too few points: need at least {needed}, have {have}")]
    TooFewPoints { needed: usize, have: usize },

    /// PQ code refers to a nonexistent codebook entry.
    #[error("corrupt PQ code: entry {code} >= codebook size {k_sub}")]
    CorruptCode { code: u8, k_sub: usize },

    /// The Kprime strategy yields an unordered set; it cannot be ranked or cut.
    #[error("kprime candidates form an unordered set and cannot be {0}")]
    NotRankable(&'static str),

    /// Vector dimensionalities disagree.
    #[error("dimension mismatch: {left} vs {right}")]
    Dim { left: usize, right: usize },

    /// A document id that the corpus does not contain.
    #[error("document id {0} not present in corpus")]
    CorpusMismatch(u32),

    /// Paired samples of different lengths.
    #[error("paired samples differ in length: {left} vs {right}")]
    Pairing { left: usize, right: usize },

    /// A statistic that has no value on the given input.
    #[error("undefined: {0}")]
    Undefined(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
