use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{AdjacencyMode, DenseMatrix, SparseMatrix};
use crate::runtime::{run_model, Activation, Backend, Features, ModelKind, ModelSpec};
use crate::schedule::ArchConfig;

/// Simulator output checked against the integer oracle and a real-valued
/// forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub exact_match: bool,
    pub max_abs_err: f64,
    /// Fraction of nodes whose argmax class matches the real-valued pass.
    pub argmax_agreement: f64,
    pub nodes: usize,
}

impl VerifyReport {
    /// `real` is row-major with the same shape as the logits.
    pub fn compare(simulated: &DenseMatrix, oracle: &DenseMatrix, real: &[f64]) -> Self {
        let fmt = simulated.format();
        let cols = simulated.cols();
        let mut max_abs_err: f64 = 0.0;
        for (&q, &r) in simulated.data().iter().zip(real) {
            max_abs_err = max_abs_err.max((fmt.to_real(q) - r).abs());
        }
        let nodes = simulated.rows();
        let agree = (0..nodes)
            .filter(|&i| {
                let q: Vec<f64> = simulated.row(i).iter().map(|&v| v as f64).collect();
                argmax(&q) == argmax(&real[i * cols..(i + 1) * cols])
            })
            .count();
        VerifyReport {
            exact_match: simulated == oracle,
            max_abs_err,
            argmax_agreement: if nodes == 0 { 1.0 } else { agree as f64 / nodes as f64 },
            nodes,
        }
    }
}

/// Index of the first maximum.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Real-valued edge weights for `mode`, computed without quantization.
pub fn real_adjacency(a: &SparseMatrix, mode: AdjacencyMode) -> Vec<Vec<(usize, f64)>> {
    let n = a.rows();
    match mode {
        AdjacencyMode::Binary => (0..n).map(|r| a.row(r).0.iter().map(|&c| (c, 1.0)).collect()).collect(),
        AdjacencyMode::SymNorm { .. } => {
            let rows: Vec<Vec<usize>> = (0..n)
                .map(|r| {
                    let mut cols = a.row(r).0.to_vec();
                    if !cols.contains(&r) {
                        cols.push(r);
                        cols.sort_unstable();
                    }
                    cols
                })
                .collect();
            let deg: Vec<f64> = rows.iter().map(|c| c.len() as f64).collect();
            rows.iter()
                .enumerate()
                .map(|(r, cols)| cols.iter().map(|&c| (c, 1.0 / (deg[r] * deg[c]).sqrt())).collect())
                .collect()
        }
        AdjacencyMode::Mean { .. } => (0..n)
            .map(|r| {
                let cols = a.row(r).0;
                cols.iter().map(|&c| (c, 1.0 / cols.len() as f64)).collect()
            })
            .collect(),
    }
}

struct RealMatrix {
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    fn from_dense(m: &DenseMatrix) -> Self {
        let f = m.format();
        RealMatrix { cols: m.cols(), data: m.data().iter().map(|&v| f.to_real(v)).collect() }
    }

    fn rows(&self) -> usize {
        self.data.len() / self.cols.max(1)
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Rows `[r0, r1)`.
    fn slice_rows(&self, r0: usize, r1: usize) -> RealMatrix {
        RealMatrix { cols: self.cols, data: self.data[r0 * self.cols..r1 * self.cols].to_vec() }
    }

    fn matmul(&self, w: &RealMatrix) -> RealMatrix {
        let mut out = vec![0.0; self.rows() * w.cols];
        for i in 0..self.rows() {
            for (j, &x) in self.row(i).iter().enumerate() {
                if x != 0.0 {
                    for (o, &wv) in out[i * w.cols..(i + 1) * w.cols].iter_mut().zip(w.row(j)) {
                        *o += x * wv;
                    }
                }
            }
        }
        RealMatrix { cols: w.cols, data: out }
    }

    fn aggregate(&self, adj: &[Vec<(usize, f64)>]) -> RealMatrix {
        let mut out = vec![0.0; adj.len() * self.cols];
        for (i, edges) in adj.iter().enumerate() {
            for &(j, a) in edges {
                for (o, &v) in out[i * self.cols..(i + 1) * self.cols].iter_mut().zip(self.row(j)) {
                    *o += a * v;
                }
            }
        }
        RealMatrix { cols: self.cols, data: out }
    }
}

/// Full-precision forward pass over the real values of the model's
/// integer inputs; nothing is rounded between steps.
pub fn real_forward(model: &ModelSpec, a: &SparseMatrix, x0: &Features) -> Result<Vec<f64>> {
    model.validate()?;
    let adj = real_adjacency(a, model.adjacency);
    let mut x = match x0 {
        Features::Sparse(s) => RealMatrix::from_dense(&s.to_dense()),
        Features::Dense(d) => RealMatrix::from_dense(d),
    };
    if x.rows() != a.rows() {
        return Err(Error::DimensionMismatch {
            op: "real forward",
            left_rows: x.rows(),
            left_cols: x.cols,
            right_rows: a.rows(),
            right_cols: a.cols(),
        });
    }
    for layer in &model.layers {
        let w = RealMatrix::from_dense(&layer.weight);
        let mut y = match model.kind {
            ModelKind::Gcn => x.matmul(&w).aggregate(&adj),
            ModelKind::GraphSageMean => {
                let n = w.rows() / 2;
                let own = x.matmul(&w.slice_rows(0, n));
                let neigh = x.matmul(&w.slice_rows(n, 2 * n)).aggregate(&adj);
                RealMatrix { cols: own.cols, data: own.data.iter().zip(&neigh.data).map(|(a, b)| a + b).collect() }
            }
        };
        if let Some(b) = &layer.bias {
            let b = RealMatrix::from_dense(b);
            for r in 0..y.rows() {
                for (v, &bv) in y.data[r * y.cols..(r + 1) * y.cols].iter_mut().zip(b.row(0)) {
                    *v += bv;
                }
            }
        }
        if layer.activation == Activation::Relu {
            y.data.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        x = y;
    }
    Ok(x.data)
}

/// Runs the simulator and the integer oracle through the same pipeline and
/// compares both with the real-valued pass.
pub fn verify_against_oracle(
    model: &ModelSpec,
    a: &SparseMatrix,
    x0: &Features,
    cfg: &ArchConfig,
) -> Result<VerifyReport> {
    let (simulated, _) = run_model(Backend::Simulator(cfg), model, a, x0)?;
    let (oracle, _) = run_model(Backend::Reference, model, a, x0)?;
    let real = real_forward(model, a, x0)?;
    Ok(VerifyReport::compare(&simulated, &oracle, &real))
}
