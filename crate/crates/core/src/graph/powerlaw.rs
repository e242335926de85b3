use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::Format;
use crate::graph::GraphBundle;
use crate::matrix::{DenseMatrix, SparseMatrix};

const PARITY_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerLawParams {
    pub nodes: usize,
    pub avg_degree: f64,
    pub exponent: f64,
    pub features: usize,
    pub feature_density: f64,
    /// Output widths of the generated layers; the first layer consumes
    /// `features` inputs.
    pub layer_widths: Vec<usize>,
    /// Weight blocks stacked per layer: 1 for GCN, 2 for GraphSAGE
    /// (`[W_self; W_neigh]`).
    pub weight_blocks: usize,
    pub seed: u64,
}

impl Default for PowerLawParams {
    fn default() -> Self {
        PowerLawParams {
            nodes: 4096,
            avg_degree: 4.0,
            exponent: 2.1,
            features: 500,
            feature_density: 0.1,
            layer_widths: vec![16, 8],
            weight_blocks: 1,
            seed: 0,
        }
    }
}

/// Degree distribution `p(k) ~ (k - 1 + shift)^-exponent` on `1..=kmax`.
struct DegreeLaw {
    cdf: Vec<f64>,
}

impl DegreeLaw {
    fn weights(kmax: usize, exponent: f64, shift: f64) -> Vec<f64> {
        (1..=kmax).map(|k| (k as f64 - 1.0 + shift).powf(-exponent)).collect()
    }

    fn mean(kmax: usize, exponent: f64, shift: f64) -> f64 {
        let w = Self::weights(kmax, exponent, shift);
        let total: f64 = w.iter().sum();
        w.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum::<f64>() / total
    }

    /// Picks the shift whose mean degree equals `avg` by bisection.
    fn fit(kmax: usize, exponent: f64, avg: f64) -> Result<Self> {
        let (mut lo, mut hi) = (1e-9f64, 1e9f64);
        let (min_mean, max_mean) = (Self::mean(kmax, exponent, lo), Self::mean(kmax, exponent, hi));
        if avg > max_mean {
            return Err(Error::Infeasible(format!(
                "average degree {avg} exceeds {max_mean:.3}, the most a cutoff of {kmax} allows"
            )));
        }
        let shift = if avg <= min_mean {
            lo
        } else {
            for _ in 0..200 {
                let mid = (lo * hi).sqrt();
                if Self::mean(kmax, exponent, mid) < avg {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        let w = Self::weights(kmax, exponent, shift);
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        let cdf = w
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        Ok(DegreeLaw { cdf })
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1) + 1
    }
}

/// Synthetic power-law graph with binary features and random SINT4 weights.
///
/// Degrees are drawn with a structural cutoff of `sqrt(n * avg_degree)`,
/// stubs are paired uniformly at random, and self-loops and repeated edges
/// are dropped. The same parameters always produce the same bundle.
pub fn gen_powerlaw(params: &PowerLawParams) -> Result<GraphBundle> {
    let n = params.nodes;
    if n < 2
        || params.avg_degree.is_nan()
        || params.avg_degree < 1.0
        || params.exponent.is_nan()
        || params.exponent <= 1.0
    {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 nodes, average degree >= 1 and exponent > 1 (got {n}, {}, {})",
            params.avg_degree, params.exponent
        )));
    }
    if params.weight_blocks == 0 {
        return Err(Error::InvalidConfig("weight_blocks must be positive".into()));
    }
    if !(0.0..=1.0).contains(&params.feature_density) {
        return Err(Error::InvalidConfig(format!("feature density {} outside [0, 1]", params.feature_density)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let kmax = ((n as f64 * params.avg_degree).sqrt() as usize).clamp(1, n - 1);
    let law = DegreeLaw::fit(kmax, params.exponent, params.avg_degree)?;

    let mut degrees: Vec<usize> = (0..n).map(|_| law.sample(&mut rng)).collect();
    let mut tries = 0;
    while degrees.iter().sum::<usize>() % 2 == 1 {
        if tries == PARITY_RETRIES {
            return Err(Error::Infeasible("could not draw an even degree sum".into()));
        }
        let v = rng.gen_range(0..n);
        degrees[v] = law.sample(&mut rng);
        tries += 1;
    }

    let mut stubs: Vec<usize> = degrees.iter().enumerate().flat_map(|(v, &d)| std::iter::repeat_n(v, d)).collect();
    stubs.shuffle(&mut rng);
    let mut seen = HashSet::new();
    let mut cells = Vec::with_capacity(stubs.len());
    for pair in stubs.chunks_exact(2) {
        let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        if u != v && seen.insert((u, v)) {
            cells.push((u, v, 1));
            cells.push((v, u, 1));
        }
    }
    let adjacency = SparseMatrix::from_triplets(n, n, cells, Format::BINARY)?;

    let mut feats = Vec::new();
    for r in 0..n {
        for c in 0..params.features {
            if rng.gen_bool(params.feature_density) {
                feats.push((r, c, 1));
            }
        }
    }
    let features = SparseMatrix::from_triplets(n, params.features, feats, Format::BINARY)?;

    let mut weights = Vec::with_capacity(params.layer_widths.len());
    let mut inputs = params.features;
    for &out in &params.layer_widths {
        let rows = inputs * params.weight_blocks;
        let raw = (0..rows * out).map(|_| rng.gen_range(-8..8)).collect();
        weights.push(DenseMatrix::try_new(rows, out, raw, Format::SINT4_INPUT)?);
        inputs = out;
    }

    let bundle = GraphBundle { adjacency, features, weights, labels: None };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph_only(seed: u64) -> PowerLawParams {
        PowerLawParams { features: 1, layer_widths: vec![], seed, ..PowerLawParams::default() }
    }

    #[test]
    fn same_seed_same_graph() {
        let p = PowerLawParams { nodes: 500, features: 20, ..PowerLawParams::default() };
        assert_eq!(gen_powerlaw(&p).unwrap(), gen_powerlaw(&p).unwrap());
        let q = PowerLawParams { seed: 1, ..p.clone() };
        assert_ne!(gen_powerlaw(&p).unwrap().adjacency, gen_powerlaw(&q).unwrap().adjacency);
    }

    #[test]
    fn fitted_law_has_requested_mean() {
        for (kmax, gamma, avg) in [(128, 2.1, 4.0), (64, 2.5, 2.0), (1000, 3.0, 1.5)] {
            let law = DegreeLaw::fit(kmax, gamma, avg).unwrap();
            let mean: f64 = law
                .cdf
                .iter()
                .enumerate()
                .fold((0.0, 0.0), |(m, prev), (i, &c)| (m + (i + 1) as f64 * (c - prev), c))
                .0;
            assert!((mean - avg).abs() < 1e-6, "{kmax} {gamma} {avg}: {mean}");
        }
        assert!(DegreeLaw::fit(4, 2.1, 3.0).is_err());
    }

    #[test]
    fn edge_count_and_skew_over_seeds() {
        for seed in 0..20 {
            let g = gen_powerlaw(&graph_only(seed)).unwrap();
            let edges = g.adjacency.nnz() / 2;
            assert!((edges as f64 - 8192.0).abs() <= 819.2, "seed {seed}: {edges} edges");
            let mut deg: Vec<usize> = (0..g.nodes()).map(|r| g.adjacency.row_nnz(r)).collect();
            deg.sort_unstable();
            let median = deg[deg.len() / 2].max(1);
            let ratio = *deg.last().unwrap() as f64 / median as f64;
            assert!(ratio > 20.0, "seed {seed}: max/median {ratio}");
        }
    }

    #[test]
    fn features_and_weights() {
        let g = gen_powerlaw(&PowerLawParams { nodes: 400, ..PowerLawParams::default() }).unwrap();
        let density = g.features.nnz() as f64 / (400.0 * 500.0);
        assert!((density - 0.1).abs() < 0.01, "{density}");
        let dims: Vec<_> = g.weights.iter().map(|w| (w.rows(), w.cols())).collect();
        assert_eq!(dims, [(500, 16), (16, 8)]);
        let sage = gen_powerlaw(&PowerLawParams { nodes: 50, weight_blocks: 2, ..PowerLawParams::default() }).unwrap();
        assert_eq!(sage.weights[1].rows(), 32);
    }

    #[test]
    fn bad_parameters() {
        for p in [
            PowerLawParams { nodes: 1, ..graph_only(0) },
            PowerLawParams { avg_degree: 0.5, ..graph_only(0) },
            PowerLawParams { exponent: 1.0, ..graph_only(0) },
            PowerLawParams { feature_density: 1.5, ..graph_only(0) },
        ] {
            assert!(matches!(gen_powerlaw(&p), Err(Error::InvalidConfig(_))));
        }
        assert!(matches!(
            gen_powerlaw(&PowerLawParams { nodes: 4, avg_degree: 3.0, ..graph_only(0) }),
            Err(Error::Infeasible(_))
        ));
    }
}
