//! Operation and storage counts for a two-layer GCN under the two possible
//! multiplication orders, with zeros skipped in the sparse operands.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;

/// Bits per stored intermediate value (SINT16).
pub const INTERMEDIATE_BITS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDims {
    pub nodes: usize,
    pub features: usize,
    pub hidden: usize,
    pub classes: usize,
    pub nnz_features: usize,
    pub nnz_adjacency: usize,
}

#[derive(Debug, Clone, Copy)]
pub enum ComputeOrder<'a> {
    /// `A x (X x W)`: combination first, then aggregation.
    CombinationFirst,
    /// `(A x X) x W`. Needs the actual operands because the fill-in of
    /// `A x X` depends on where the nonzeros sit.
    AggregationFirst { adjacency: &'a SparseMatrix, features: &'a SparseMatrix },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    /// Scalar multiply-accumulates over both layers.
    pub ops: u64,
    /// Size of the first layer's first product, stored as SINT16.
    pub intermediate_bits: u64,
}

impl CostReport {
    pub fn intermediate_mebibits(&self) -> f64 {
        self.intermediate_bits as f64 / (1u64 << 20) as f64
    }
}

pub fn cost_model(dims: &LayerDims, order: ComputeOrder<'_>) -> Result<CostReport> {
    let LayerDims { nodes, features, hidden, classes, nnz_features, nnz_adjacency } = *dims;
    if [nodes, features, hidden, classes, nnz_features, nnz_adjacency].contains(&0) {
        return Err(Error::InvalidConfig("cost model counts must be positive".into()));
    }
    let (m, h, c) = (nodes as u64, hidden as u64, classes as u64);
    let (nnz_x, nnz_a) = (nnz_features as u64, nnz_adjacency as u64);
    match order {
        ComputeOrder::CombinationFirst => Ok(CostReport {
            // Layer 1: X*W then A*(XW); layer 2: X1*W2 (dense) then A*(X1 W2).
            ops: nnz_x * h + nnz_a * h + m * h * c + nnz_a * c,
            intermediate_bits: m * h * INTERMEDIATE_BITS,
        }),
        ComputeOrder::AggregationFirst { adjacency, features } => {
            if adjacency.rows() != nodes
                || adjacency.cols() != nodes
                || features.rows() != nodes
                || features.cols() != dims.features
            {
                return Err(Error::DimensionMismatch {
                    op: "cost_model",
                    left_rows: adjacency.rows(),
                    left_cols: adjacency.cols(),
                    right_rows: features.rows(),
                    right_cols: features.cols(),
                });
            }
            let (ax_ops, ax_nnz) = symbolic_spgemm(adjacency, features);
            let layer1 = ax_ops + ax_nnz * h;
            let layer2 = adjacency.nnz() as u64 * h + m * h * c;
            Ok(CostReport { ops: layer1 + layer2, intermediate_bits: ax_nnz * INTERMEDIATE_BITS })
        }
    }
}

/// Multiply count and exact output nonzero count of a zero-skipping
/// sparse x sparse product.
fn symbolic_spgemm(a: &SparseMatrix, b: &SparseMatrix) -> (u64, u64) {
    let mut stamp = vec![usize::MAX; b.cols()];
    let (mut ops, mut nnz) = (0u64, 0u64);
    for i in 0..a.rows() {
        for &k in a.row(i).0 {
            let cols = b.row(k).0;
            ops += cols.len() as u64;
            for &j in cols {
                if stamp[j] != i {
                    stamp[j] = i;
                    nnz += 1;
                }
            }
        }
    }
    (ops, nnz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::Format;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cora() -> LayerDims {
        LayerDims { nodes: 2708, features: 1433, hidden: 16, classes: 7, nnz_features: 49216, nnz_adjacency: 10556 }
    }

    #[test]
    fn cora_combination_first_matches_published_counts() {
        let r = cost_model(&cora(), ComputeOrder::CombinationFirst).unwrap();
        assert_eq!(r.ops, 1_333_540);
        assert!((r.ops as f64 / 1.33e6 - 1.0).abs() < 0.05);
        assert!((r.intermediate_mebibits() - 0.661).abs() / 0.661 < 0.01);
    }

    #[test]
    fn zero_hidden_is_rejected() {
        let dims = LayerDims { hidden: 0, ..cora() };
        assert!(cost_model(&dims, ComputeOrder::CombinationFirst).is_err());
    }

    #[test]
    fn symbolic_product_on_small_case() {
        // A = [[1,1],[0,1]], X = [[1,0,1],[0,1,1]] -> AX has 3 + 2 nonzeros, 4 + 2 multiplies.
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1), (0, 1, 1), (1, 1, 1)], Format::BINARY).unwrap();
        let x = SparseMatrix::from_triplets(2, 3, vec![(0, 0, 1), (0, 2, 1), (1, 1, 1), (1, 2, 1)], Format::BINARY)
            .unwrap();
        assert_eq!(symbolic_spgemm(&a, &x), (6, 5));
    }

    fn random_pattern(rng: &mut ChaCha8Rng, rows: usize, cols: usize, nnz: usize, symmetric: bool) -> SparseMatrix {
        let mut set = std::collections::HashSet::new();
        while set.len() < nnz {
            let (r, c) = (rng.gen_range(0..rows), rng.gen_range(0..cols));
            if symmetric {
                if r == c {
                    continue;
                }
                set.insert((c, r));
            }
            set.insert((r, c));
        }
        SparseMatrix::from_triplets(rows, cols, set.into_iter().map(|(r, c)| (r, c, 1)).collect(), Format::BINARY)
            .unwrap()
    }

    #[test]
    fn combination_first_is_cheaper_on_dataset_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // (nodes, features, classes, feature nnz, adjacency nnz) from the dataset table.
        let shapes = [(2708, 1433, 7, 49216, 10556), (3327, 3703, 6, 104_720, 9104), (19717, 500, 3, 985_850, 88648)];
        for (nodes, features, classes, nnz_x, nnz_a) in shapes {
            let a = random_pattern(&mut rng, nodes, nodes, nnz_a, true);
            let x = random_pattern(&mut rng, nodes, features, nnz_x, false);
            let dims =
                LayerDims { nodes, features, hidden: 16, classes, nnz_features: x.nnz(), nnz_adjacency: a.nnz() };
            let fast = cost_model(&dims, ComputeOrder::CombinationFirst).unwrap();
            let slow = cost_model(&dims, ComputeOrder::AggregationFirst { adjacency: &a, features: &x }).unwrap();
            assert!(fast.ops < slow.ops, "{nodes}: {fast:?} vs {slow:?}");
            assert!(fast.intermediate_bits < slow.intermediate_bits);
        }
    }
}
