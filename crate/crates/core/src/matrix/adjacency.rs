use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::{quantize_value, Format};
use crate::matrix::SparseMatrix;

/// How edge weights are derived from an adjacency pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyMode {
    /// Every stored edge becomes raw 1 with no fractional bits.
    Binary,
    /// `D^-1/2 (A + I) D^-1/2`, quantized to `format`.
    SymNorm { format: Format },
    /// Row-normalized `D^-1 A` (mean over neighbors), quantized to `format`.
    Mean { format: Format },
}

impl AdjacencyMode {
    /// Edge-weight precision used by the weighted modes.
    pub const EDGE_FORMAT: Format = Format { bits: 16, frac_bits: 12 };

    pub fn sym_norm() -> Self {
        AdjacencyMode::SymNorm { format: Self::EDGE_FORMAT }
    }

    pub fn mean() -> Self {
        AdjacencyMode::Mean { format: Self::EDGE_FORMAT }
    }
}

/// Rewrites the values of a square adjacency matrix; only its sparsity
/// pattern is read.
pub fn normalize_adjacency(a: &SparseMatrix, mode: AdjacencyMode) -> Result<SparseMatrix> {
    if a.rows() != a.cols() {
        return Err(Error::InvalidMatrix(format!("adjacency must be square, got {}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    match mode {
        AdjacencyMode::Binary => {
            let t = a.triplets().map(|(r, c, _)| (r, c, 1)).collect();
            SparseMatrix::from_triplets(n, n, t, Format::BINARY)
        }
        AdjacencyMode::SymNorm { format } => {
            // Pattern of A + I; an isolated vertex keeps degree 1.
            let mut pattern: Vec<Vec<usize>> = (0..n).map(|r| a.row(r).0.to_vec()).collect();
            for (r, cols) in pattern.iter_mut().enumerate() {
                if let Err(pos) = cols.binary_search(&r) {
                    cols.insert(pos, r);
                }
            }
            let inv_sqrt: Vec<f64> = pattern.iter().map(|c| 1.0 / (c.len() as f64).sqrt()).collect();
            let mut t = Vec::new();
            for (r, cols) in pattern.iter().enumerate() {
                for &c in cols {
                    t.push((r, c, quantize_value(inv_sqrt[r] * inv_sqrt[c], format).0));
                }
            }
            SparseMatrix::from_triplets(n, n, t, format)
        }
        AdjacencyMode::Mean { format } => {
            let mut t = Vec::new();
            for r in 0..n {
                let cols = a.row(r).0;
                let w = quantize_value(1.0 / cols.len().max(1) as f64, format).0;
                t.extend(cols.iter().map(|&c| (r, c, w)));
            }
            SparseMatrix::from_triplets(n, n, t, format)
        }
    }
}
