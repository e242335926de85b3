//! Integer matrices, the zero-skipping reference multiply and quantization.

mod adjacency;
mod ops;
mod quant;

pub use adjacency::{normalize_adjacency, AdjacencyMode};
pub use ops::{dmm_reference, relu, sdmm_reference};
pub use quant::{dequantize_dense, dequantize_sparse, quantize_dense, quantize_sparse, QuantStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::Format;

/// Compressed sparse rows over raw fixed-point values. Zeros are never
/// stored and columns are strictly increasing within a row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<i32>,
    format: Format,
}

impl SparseMatrix {
    pub fn try_new(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<i32>,
        format: Format,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 || row_ptr[0] != 0 {
            return Err(Error::InvalidMatrix("row pointer length or origin".into()));
        }
        if col_idx.len() != values.len() || row_ptr[rows] != values.len() {
            return Err(Error::InvalidMatrix("row pointer does not cover nonzeros".into()));
        }
        for r in 0..rows {
            let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
            if lo > hi {
                return Err(Error::InvalidMatrix(format!("row pointer decreases at row {r}")));
            }
            let cols_here = &col_idx[lo..hi];
            if cols_here.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidMatrix(format!("row {r} columns not increasing")));
            }
            if cols_here.last().is_some_and(|&c| c >= cols) {
                return Err(Error::InvalidMatrix(format!("row {r} column out of range")));
            }
        }
        for &v in &values {
            if v == 0 {
                return Err(Error::InvalidMatrix("explicit zero stored".into()));
            }
            format.check(v as i64)?;
        }
        Ok(SparseMatrix { rows, cols, row_ptr, col_idx, values, format })
    }

    /// Builds from `(row, col, raw)` triplets in any order. Zero values are
    /// dropped; duplicate coordinates are rejected.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, i32)>,
        format: Format,
    ) -> Result<Self> {
        triplets.retain(|t| t.2 != 0);
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        if let Some(w) = triplets.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidMatrix(format!("duplicate entry ({}, {})", w[0].0, w[0].1)));
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, c, _) in &triplets {
            if r >= rows || c >= cols {
                return Err(Error::InvalidMatrix(format!("entry ({r}, {c}) outside {rows}x{cols}")));
            }
            row_ptr[r + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let col_idx = triplets.iter().map(|t| t.1).collect();
        let values = triplets.iter().map(|t| t.2).collect();
        SparseMatrix::try_new(rows, cols, row_ptr, col_idx, values, format)
    }

    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let mut row_ptr = Vec::with_capacity(dense.rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..dense.rows {
            for (c, &v) in dense.row(r).iter().enumerate() {
                if v != 0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(values.len());
        }
        SparseMatrix { rows: dense.rows, cols: dense.cols, row_ptr, col_idx, values, format: dense.format }
    }

    pub fn identity(n: usize, format: Format, one: i32) -> Result<Self> {
        SparseMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, one)).collect(), format)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    /// Column indices and raw values of one row.
    pub fn row(&self, r: usize) -> (&[usize], &[i32]) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn get(&self, r: usize, c: usize) -> i32 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|i| vals[i]).unwrap_or(0)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, i32)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    /// True when every stored value is raw 1 (an edge-or-no-edge matrix).
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 1)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols, self.format);
        for (r, c, v) in self.triplets() {
            out.set(r, c, v);
        }
        out
    }

    /// Columns `[start, end)` as a standalone matrix with re-based indices.
    pub fn column_slice(&self, start: usize, end: usize) -> SparseMatrix {
        let end = end.min(self.cols);
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let lo = cols.partition_point(|&c| c < start);
            let hi = cols.partition_point(|&c| c < end);
            col_idx.extend(cols[lo..hi].iter().map(|&c| c - start));
            values.extend_from_slice(&vals[lo..hi]);
            row_ptr.push(values.len());
        }
        SparseMatrix { rows: self.rows, cols: end.saturating_sub(start), row_ptr, col_idx, values, format: self.format }
    }
}

/// Row-major dense matrix of raw values sharing one format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i32>,
    format: Format,
}

impl DenseMatrix {
    pub fn try_new(rows: usize, cols: usize, data: Vec<i32>, format: Format) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        for &v in &data {
            format.check(v as i64)?;
        }
        Ok(DenseMatrix { rows, cols, data, format })
    }

    pub fn zeros(rows: usize, cols: usize, format: Format) -> Self {
        DenseMatrix { rows, cols, data: vec![0; rows * cols], format }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> i32 {
        self.data[r * self.cols + c]
    }

    /// Unchecked store; callers keep the value inside the format's range.
    pub(crate) fn set(&mut self, r: usize, c: usize, v: i32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[i32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn into_data(self) -> Vec<i32> {
        self.data
    }

    /// Sub-block `[r0, r1) x [c0, c1)`, clipped to the matrix bounds.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> DenseMatrix {
        let (r1, c1) = (r1.min(self.rows), c1.min(self.cols));
        let mut data = Vec::with_capacity((r1 - r0) * (c1 - c0));
        for r in r0..r1 {
            data.extend_from_slice(&self.row(r)[c0..c1]);
        }
        DenseMatrix { rows: r1 - r0, cols: c1 - c0, data, format: self.format }
    }

    /// Stacks `self` on top of `other` (same column count and format).
    pub fn vstack(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols || self.format != other.format {
            return Err(Error::DimensionMismatch {
                op: "vstack",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(DenseMatrix { rows: self.rows + other.rows, cols: self.cols, data, format: self.format })
    }

    /// Places `other` to the right of `self` (same row count and format).
    pub fn hstack(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.format != other.format {
            return Err(Error::DimensionMismatch {
                op: "hstack",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(DenseMatrix { rows: self.rows, cols: self.cols + other.cols, data, format: self.format })
    }

    /// Re-tags the format after checking every value still fits.
    pub fn with_format(self, format: Format) -> Result<DenseMatrix> {
        DenseMatrix::try_new(self.rows, self.cols, self.data, format)
    }

    pub fn max_abs(&self) -> u64 {
        self.data.iter().map(|v| v.unsigned_abs() as u64).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_invariants_are_enforced() {
        let f = Format::BINARY;
        assert!(SparseMatrix::try_new(2, 2, vec![0, 1, 1], vec![0], vec![1], f).is_ok());
        assert!(SparseMatrix::try_new(2, 2, vec![0, 2, 2], vec![1, 0], vec![1, 1], f).is_err());
        assert!(SparseMatrix::try_new(1, 2, vec![0, 1], vec![2], vec![1], f).is_err());
        assert!(SparseMatrix::try_new(1, 2, vec![0, 1], vec![0], vec![0], f).is_err());
        assert!(SparseMatrix::try_new(1, 2, vec![0, 1], vec![0], vec![9], f).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1), (0, 0, 1)], f).is_err());
    }

    #[test]
    fn column_slice_rebases() {
        let f = Format::SINT4_INPUT;
        let m = SparseMatrix::from_triplets(2, 6, vec![(0, 1, 2), (0, 4, 3), (1, 5, -1)], f).unwrap();
        let s = m.column_slice(4, 8);
        assert_eq!(s.cols(), 2);
        assert_eq!(s.triplets().collect::<Vec<_>>(), vec![(0, 0, 3), (1, 1, -1)]);
    }

    #[test]
    fn dense_round_trip() {
        let f = Format::SINT4_INPUT;
        let d = DenseMatrix::try_new(2, 3, vec![0, 1, 0, -2, 0, 3], f).unwrap();
        assert_eq!(SparseMatrix::from_dense(&d).to_dense(), d);
        assert_eq!(SparseMatrix::from_dense(&d).nnz(), 3);
    }
}
