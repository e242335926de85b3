use crate::error::{Error, Result};
use crate::fixed::{mac, Format};
use crate::matrix::{DenseMatrix, SparseMatrix};

/// Zero-skipping sparse x dense product into 32-bit accumulators.
///
/// Each stored `X[i, j]` is multiplied against row `j` of `W` and added into
/// row `i` of the output, in increasing `j` order. The result carries
/// `X.frac_bits + W.frac_bits` fractional bits.
pub fn sdmm_reference(x: &SparseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    if x.cols() != w.rows() {
        return Err(Error::DimensionMismatch {
            op: "sdmm",
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: w.rows(),
            right_cols: w.cols(),
        });
    }
    let format = Format::accumulator(x.format(), w.format())?;
    let p = w.cols();
    let mut y = vec![0i32; x.rows() * p];
    for i in 0..x.rows() {
        let out = &mut y[i * p..(i + 1) * p];
        let (cols, vals) = x.row(i);
        for (&j, &xv) in cols.iter().zip(vals) {
            for (k, (acc, &wv)) in out.iter_mut().zip(w.row(j)).enumerate() {
                *acc = mac(*acc, xv, wv).ok_or(Error::Overflow { row: i, col: k })?;
            }
        }
    }
    DenseMatrix::try_new(x.rows(), p, y, format)
}

/// Dense x dense product; every left element is processed, zero or not.
pub fn dmm_reference(x: &DenseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    if x.cols() != w.rows() {
        return Err(Error::DimensionMismatch {
            op: "dmm",
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: w.rows(),
            right_cols: w.cols(),
        });
    }
    let format = Format::accumulator(x.format(), w.format())?;
    let p = w.cols();
    let mut y = vec![0i32; x.rows() * p];
    for i in 0..x.rows() {
        let out = &mut y[i * p..(i + 1) * p];
        for (j, &xv) in x.row(i).iter().enumerate() {
            for (k, (acc, &wv)) in out.iter_mut().zip(w.row(j)).enumerate() {
                *acc = mac(*acc, xv, wv).ok_or(Error::Overflow { row: i, col: k })?;
            }
        }
    }
    DenseMatrix::try_new(x.rows(), p, y, format)
}

pub fn relu(y: &DenseMatrix) -> DenseMatrix {
    let data = y.data().iter().map(|&v| v.max(0)).collect();
    DenseMatrix::try_new(y.rows(), y.cols(), data, y.format()).expect("relu keeps range")
}
