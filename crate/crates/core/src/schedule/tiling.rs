use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};

/// One step of the outer-product decomposition: a `T`-column slice of the
/// sparse operand and the matching `T`-row, `C`-column block of the dense one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilePair {
    pub sparse: SparseMatrix,
    pub dense: DenseMatrix,
    /// First global column of `sparse` (and first global row of `dense`).
    pub col_offset: usize,
    /// First global output column produced by this pair.
    pub out_col_offset: usize,
}

/// Partitions `x` into `T`-column tiles and `w` into `T x C` blocks.
/// Pairs are ordered by sparse column tile, then output column tile.
pub fn tile_inputs(x: &SparseMatrix, w: &DenseMatrix, tile_width: usize, lanes: usize) -> Result<Vec<TilePair>> {
    if x.cols() != w.rows() {
        return Err(Error::DimensionMismatch {
            op: "tile_inputs",
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: w.rows(),
            right_cols: w.cols(),
        });
    }
    if tile_width == 0 || lanes == 0 {
        return Err(Error::InvalidConfig("tile width and lanes must be positive".into()));
    }
    let mut pairs = Vec::new();
    for t0 in (0..x.cols()).step_by(tile_width) {
        let sparse = x.column_slice(t0, t0 + tile_width);
        for c0 in (0..w.cols()).step_by(lanes) {
            pairs.push(TilePair {
                sparse: sparse.clone(),
                dense: w.block(t0, t0 + tile_width, c0, c0 + lanes),
                col_offset: t0,
                out_col_offset: c0,
            });
        }
    }
    Ok(pairs)
}
