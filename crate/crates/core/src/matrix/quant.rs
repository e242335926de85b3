use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fixed::{quantize_value, Format};
use crate::matrix::{DenseMatrix, SparseMatrix};

/// Counts produced while quantizing a grid of reals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantStats {
    pub values: usize,
    pub saturated: usize,
    /// Nonzero inputs that rounded to zero (and were dropped from sparse output).
    pub flushed: usize,
}

/// Quantizes a row-major grid of reals.
pub fn quantize_dense(rows: usize, cols: usize, values: &[f64], format: Format) -> Result<(DenseMatrix, QuantStats)> {
    let mut stats = QuantStats::default();
    let data = values
        .iter()
        .map(|&v| {
            let (q, sat) = quantize_value(v, format);
            stats.values += 1;
            stats.saturated += sat as usize;
            stats.flushed += (q == 0 && v != 0.0) as usize;
            q
        })
        .collect();
    Ok((DenseMatrix::try_new(rows, cols, data, format)?, stats))
}

/// Quantizes `(row, col, value)` triplets of reals into compressed rows.
pub fn quantize_sparse(
    rows: usize,
    cols: usize,
    triplets: &[(usize, usize, f64)],
    format: Format,
) -> Result<(SparseMatrix, QuantStats)> {
    let mut stats = QuantStats::default();
    let raw = triplets
        .iter()
        .map(|&(r, c, v)| {
            let (q, sat) = quantize_value(v, format);
            stats.values += 1;
            stats.saturated += sat as usize;
            stats.flushed += (q == 0 && v != 0.0) as usize;
            (r, c, q)
        })
        .collect();
    Ok((SparseMatrix::from_triplets(rows, cols, raw, format)?, stats))
}

pub fn dequantize_dense(m: &DenseMatrix) -> Vec<f64> {
    m.data().iter().map(|&q| m.format().to_real(q)).collect()
}

pub fn dequantize_sparse(m: &SparseMatrix) -> Vec<(usize, usize, f64)> {
    m.triplets().map(|(r, c, q)| (r, c, m.format().to_real(q))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn error_bounded_by_half_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (bits, frac) in [(4, 3), (16, 14), (16, 15)] {
            let f = Format::new(bits, frac).unwrap();
            let vals: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (q, stats) = quantize_dense(1, 1000, &vals, f).unwrap();
            let back = dequantize_dense(&q);
            for (v, b) in vals.iter().zip(&back) {
                // Values above the largest code saturate; the bound holds
                // for everything inside the representable range.
                if *v <= f.to_real(f.max_raw() as i32) {
                    assert!((v - b).abs() <= f.step() / 2.0, "{v} -> {b}");
                }
            }
            if bits == 4 {
                assert!(stats.saturated > 0);
            }
        }
    }

    #[test]
    fn dequantize_examples() {
        let f = Format::new(4, 3).unwrap();
        let d = DenseMatrix::try_new(1, 2, vec![4, -8], f).unwrap();
        assert_eq!(dequantize_dense(&d), vec![0.5, -1.0]);
    }

    #[test]
    fn all_sint4_codes_are_fixed_points() {
        for frac in 0..4 {
            let f = Format::new(4, frac).unwrap();
            let codes: Vec<i32> = (-8..8).collect();
            let d = DenseMatrix::try_new(1, 16, codes.clone(), f).unwrap();
            let (again, stats) = quantize_dense(1, 16, &dequantize_dense(&d), f).unwrap();
            assert_eq!(again.data(), &codes[..]);
            assert_eq!(stats.saturated, 0);
        }
    }

    #[test]
    fn sparse_drops_flushed_values() {
        let f = Format::new(4, 3).unwrap();
        let (m, stats) = quantize_sparse(2, 2, &[(0, 0, 0.5), (1, 1, 0.01), (1, 0, -0.25)], f).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(stats.flushed, 1);
        assert_eq!(dequantize_sparse(&m), vec![(0, 0, 0.5), (1, 0, -0.25)]);
    }

    proptest! {
        #[test]
        fn quantize_is_idempotent(v in -40.0f64..40.0, frac in 0u32..4, wide in any::<bool>()) {
            let f = if wide { Format::new(16, frac + 10).unwrap() } else { Format::new(4, frac).unwrap() };
            let (once, _) = quantize_dense(1, 1, &[v], f).unwrap();
            let (twice, _) = quantize_dense(1, 1, &dequantize_dense(&once), f).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
