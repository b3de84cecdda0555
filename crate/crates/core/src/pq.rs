//! Product quantization with asymmetric distance computation tables.
//!
//! Vectors are split into `m` sub-spaces of `sub_dim = ceil(dim / m)`
//! coordinates, zero-padded on the right when `m` does not divide `dim`.
//! Each sub-space carries its own k-means codebook of at most 256 entries,
//! so a code is exactly `m` bytes.

use crate::error::{Error, Result};
use crate::kmeans::kmeans_train;
use crate::scalar::{dot_wide, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct PqCodebook<F> {
    pub m: usize,
    pub k_sub: usize,
    pub sub_dim: usize,
    /// Dimensionality of unpadded input vectors.
    pub dim: usize,
    /// `m x k_sub x sub_dim`, row-major.
    pub codebooks: Vec<F>,
}

fn pad<F: Scalar>(x: &[F], m: usize, sub_dim: usize) -> Vec<F> {
    let mut out = vec![F::zero(); m * sub_dim];
    out[..x.len()].copy_from_slice(x);
    out
}

/// Train per-sub-space codebooks on `points x dim` row-major data. Sub-space
/// `s` is seeded with `seed + s` so sub-quantizers differ deterministically.
pub fn pq_train<F: Scalar>(
    data: &[F],
    dim: usize,
    m: usize,
    k_sub: usize,
    max_iters: usize,
    seed: u64,
) -> Result<PqCodebook<F>> {
    assert!(dim > 0 && data.len().is_multiple_of(dim));
    assert!(m >= 1);
    assert!((1..=256).contains(&k_sub), "codes are single bytes");
    let points = data.len() / dim;
    if points < k_sub {
        return Err(Error::TooFewPoints {
            needed: k_sub,
            have: points,
        });
    }
    let sub_dim = dim.div_ceil(m);

    let mut codebooks = Vec::with_capacity(m * k_sub * sub_dim);
    let mut sub_data = vec![F::zero(); points * sub_dim];
    for s in 0..m {
        let lo = s * sub_dim;
        let hi = (lo + sub_dim).min(dim);
        for (i, point) in data.chunks(dim).enumerate() {
            let dst = &mut sub_data[i * sub_dim..(i + 1) * sub_dim];
            dst.fill(F::zero());
            dst[..hi - lo].copy_from_slice(&point[lo..hi]);
        }
        let model = kmeans_train(&sub_data, sub_dim, k_sub, max_iters, seed + s as u64)?;
        codebooks.extend_from_slice(&model.centroids);
    }
    Ok(PqCodebook {
        m,
        k_sub,
        sub_dim,
        dim,
        codebooks,
    })
}

impl<F: Scalar> PqCodebook<F> {
    pub fn codeword(&self, s: usize, j: usize) -> &[F] {
        let base = (s * self.k_sub + j) * self.sub_dim;
        &self.codebooks[base..base + self.sub_dim]
    }

    /// Quantize `x` to `m` bytes, picking the nearest codeword per sub-space
    /// by squared L2 distance; ties break to the lowest codeword index.
    pub fn encode(&self, x: &[F]) -> Vec<u8> {
        assert_eq!(x.len(), self.dim);
        let padded = pad(x, self.m, self.sub_dim);
        let mut code = Vec::with_capacity(self.m);
        for s in 0..self.m {
            let sub = &padded[s * self.sub_dim..(s + 1) * self.sub_dim];
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for j in 0..self.k_sub {
                let d = crate::scalar::l2_sq_wide(sub, self.codeword(s, j));
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            code.push(best as u8);
        }
        code
    }

    /// Reconstruct the vector a code stands for, truncated back to `dim`.
    pub fn decode(&self, code: &[u8]) -> Result<Vec<F>> {
        assert_eq!(code.len(), self.m);
        let mut out = Vec::with_capacity(self.m * self.sub_dim);
        for (s, &j) in code.iter().enumerate() {
            if j as usize >= self.k_sub {
                return Err(Error::CorruptCode {
                    code: j,
                    k_sub: self.k_sub,
                });
            }
            out.extend_from_slice(self.codeword(s, j as usize));
        }
        out.truncate(self.dim);
        Ok(out)
    }

    /// Dot products of `y`'s sub-vectors against every codeword. One table
    /// serves all codes scored against the same query embedding.
    pub fn adc_table(&self, y: &[F]) -> AdcTable {
        assert_eq!(y.len(), self.dim);
        let padded = pad(y, self.m, self.sub_dim);
        let mut values = Vec::with_capacity(self.m * self.k_sub);
        for s in 0..self.m {
            let sub = &padded[s * self.sub_dim..(s + 1) * self.sub_dim];
            for j in 0..self.k_sub {
                values.push(dot_wide(sub, self.codeword(s, j)));
            }
        }
        AdcTable {
            m: self.m,
            k_sub: self.k_sub,
            values,
        }
    }
}

/// Per-query-embedding lookup table of sub-space dot products.
#[derive(Debug, Clone)]
pub struct AdcTable {
    pub m: usize,
    pub k_sub: usize,
    /// `m x k_sub`, row-major.
    pub values: Vec<f64>,
}

impl AdcTable {
    /// Approximate dot product between the table's query embedding and the
    /// vector behind `code`: the sum of one table entry per sub-space.
    pub fn score(&self, code: &[u8]) -> Result<f64> {
        assert_eq!(code.len(), self.m);
        let mut acc = 0.0f64;
        for (s, &j) in code.iter().enumerate() {
            if j as usize >= self.k_sub {
                return Err(Error::CorruptCode {
                    code: j,
                    k_sub: self.k_sub,
                });
            }
            acc += self.values[s * self.k_sub + j as usize];
        }
        Ok(acc)
    }
}
