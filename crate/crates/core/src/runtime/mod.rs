//! Multi-layer GCN and GraphSAGE inference on top of the simulator.
//!
//! A layer runs combination first (`X * W`), then aggregation
//! (`A * (XW)`), then the activation. Between the two products the
//! intermediate is requantized to 16 bits, and the layer output is
//! requantized to SINT16 with a scale fitted to its observed range. The
//! same pipeline runs against the integer reference kernels, so the two
//! paths can be compared bit for bit.

mod reference;
mod weights;

pub use reference::{real_adjacency, real_forward, verify_against_oracle, VerifyReport};
pub use weights::{read_weights, write_weights, WEIGHT_MAGIC};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::{fit_frac_bits_capped, requantize, shift_round_even, Format};
use crate::matrix::{
    dmm_reference, normalize_adjacency, relu, sdmm_reference, AdjacencyMode, DenseMatrix, SparseMatrix,
};
use crate::schedule::{prepare_sparse, ArchConfig, ScheduledTile};
use crate::sim::{execute, simulate_step, CycleReport, Destination, LeftOperand};

/// Width of inter-step and inter-layer activations.
pub const ACTIVATION_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    None,
}

/// Kernel used for the combination product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinationMode {
    Sdmm,
    Dmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gcn,
    GraphSageMean,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    /// `n x h` for GCN. GraphSAGE stacks the self block on top of the
    /// neighbor block: `2n x h`.
    pub weight: DenseMatrix,
    pub activation: Activation,
    pub combination: CombinationMode,
    /// Optional per-output-column bias, added after aggregation.
    pub bias: Option<DenseMatrix>,
}

impl LayerSpec {
    pub fn new(weight: DenseMatrix, activation: Activation, combination: CombinationMode) -> Self {
        LayerSpec { weight, activation, combination, bias: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub layers: Vec<LayerSpec>,
    pub adjacency: AdjacencyMode,
}

impl ModelSpec {
    /// GCN with ReLU between layers, SDMM combination on the first layer
    /// and DMM afterwards, and symmetric normalization.
    pub fn gcn(weights: Vec<DenseMatrix>) -> Result<Self> {
        Self::build(ModelKind::Gcn, weights, AdjacencyMode::sym_norm())
    }

    /// GraphSAGE with the mean aggregator; each weight is `[W_self; W_neigh]`.
    pub fn graphsage_mean(weights: Vec<DenseMatrix>) -> Result<Self> {
        Self::build(ModelKind::GraphSageMean, weights, AdjacencyMode::mean())
    }

    fn build(kind: ModelKind, weights: Vec<DenseMatrix>, adjacency: AdjacencyMode) -> Result<Self> {
        let last = weights.len().saturating_sub(1);
        let layers = weights
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { Activation::None } else { Activation::Relu };
                let comb = if i == 0 { CombinationMode::Sdmm } else { CombinationMode::Dmm };
                LayerSpec::new(w, act, comb)
            })
            .collect();
        let model = ModelSpec { kind, layers, adjacency };
        model.validate()?;
        Ok(model)
    }

    /// Checks layer count, weight chaining and bias shapes.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("model has no layers".into()));
        }
        let mut width = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let inputs = self.input_width(layer)?;
            if let Some(prev) = width {
                if prev != inputs {
                    return Err(Error::DimensionMismatch {
                        op: "layer chain",
                        left_rows: i,
                        left_cols: prev,
                        right_rows: inputs,
                        right_cols: layer.weight.cols(),
                    });
                }
            }
            if let Some(b) = &layer.bias {
                if b.rows() != 1 || b.cols() != layer.weight.cols() {
                    return Err(Error::InvalidMatrix(format!(
                        "layer {i} bias is {}x{}, expected 1x{}",
                        b.rows(),
                        b.cols(),
                        layer.weight.cols()
                    )));
                }
            }
            width = Some(layer.weight.cols());
        }
        Ok(())
    }

    /// Feature count consumed by `layer`.
    fn input_width(&self, layer: &LayerSpec) -> Result<usize> {
        match self.kind {
            ModelKind::Gcn => Ok(layer.weight.rows()),
            ModelKind::GraphSageMean if layer.weight.rows().is_multiple_of(2) => Ok(layer.weight.rows() / 2),
            ModelKind::GraphSageMean => Err(Error::InvalidMatrix(format!(
                "GraphSAGE weight needs stacked self and neighbor blocks, got {} rows",
                layer.weight.rows()
            ))),
        }
    }

    pub fn input_features(&self) -> Result<usize> {
        self.input_width(&self.layers[0])
    }
}

/// Which kernels execute the products.
#[derive(Debug, Clone, Copy)]
pub enum Backend<'a> {
    Simulator(&'a ArchConfig),
    Reference,
}

/// Layer input: the sparse raw features or a previous layer's output.
#[derive(Debug, Clone)]
pub enum Features {
    Sparse(SparseMatrix),
    Dense(DenseMatrix),
}

impl Features {
    pub fn rows(&self) -> usize {
        match self {
            Features::Sparse(x) => x.rows(),
            Features::Dense(x) => x.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Features::Sparse(x) => x.cols(),
            Features::Dense(x) => x.cols(),
        }
    }
}

/// The operator every layer aggregates with, and its schedules once built.
#[derive(Debug, Clone)]
pub struct Aggregator {
    pub matrix: SparseMatrix,
    tiles: Option<Vec<ScheduledTile>>,
}

impl Aggregator {
    /// Normalizes the adjacency for `model`. GraphSAGE gets `[I | D^-1 A]`
    /// so that self and neighbor terms come out of a single product.
    pub fn new(model: &ModelSpec, adjacency: &SparseMatrix) -> Result<Self> {
        let norm = normalize_adjacency(adjacency, model.adjacency)?;
        let matrix = match model.kind {
            ModelKind::Gcn => norm,
            ModelKind::GraphSageMean => self_and_neighbors(&norm)?,
        };
        Ok(Aggregator { matrix, tiles: None })
    }

    /// Uses schedules built earlier, for example by a preprocessing run.
    pub fn with_tiles(mut self, tiles: Vec<ScheduledTile>) -> Result<Self> {
        check_tiles(&tiles, self.matrix.rows(), self.matrix.cols(), "aggregation")?;
        self.tiles = Some(tiles);
        Ok(self)
    }

    /// Builds (once) the schedules of the aggregation operand.
    fn tiles(&mut self, cfg: &ArchConfig) -> Result<&[ScheduledTile]> {
        if self.tiles.is_none() {
            let cfg = cfg.with_value_bits(stream_value_bits(&self.matrix, cfg));
            self.tiles = Some(prepare_sparse(&self.matrix, &cfg)?);
        }
        Ok(self.tiles.as_deref().unwrap_or_default())
    }

    /// Largest absolute raw row sum; bounds how much one output grows.
    fn max_row_abs_sum(&self) -> u64 {
        (0..self.matrix.rows())
            .map(|r| self.matrix.row(r).1.iter().map(|v| v.unsigned_abs() as u64).sum::<u64>())
            .max()
            .unwrap_or(0)
    }
}

fn check_tiles(tiles: &[ScheduledTile], rows: usize, cols: usize, what: &str) -> Result<()> {
    let width: usize = tiles.iter().map(|t| t.width).sum();
    if tiles.iter().any(|t| t.rows != rows) || width != cols {
        return Err(Error::ScheduleMismatch(format!("{what} schedules do not cover a {rows}x{cols} operand")));
    }
    Ok(())
}

/// Schedules built ahead of inference: the sparse feature matrix (first
/// layer combination) and the aggregation operand.
#[derive(Debug, Clone, Default)]
pub struct Prepared {
    pub features: Option<Vec<ScheduledTile>>,
    pub aggregation: Option<Vec<ScheduledTile>>,
}

/// Runs the preprocessing for every sparse operand of `model`.
pub fn prepare_model(model: &ModelSpec, a: &SparseMatrix, x0: &Features, cfg: &ArchConfig) -> Result<Prepared> {
    model.validate()?;
    let mut agg = Aggregator::new(model, a)?;
    let aggregation = Some(agg.tiles(cfg)?.to_vec());
    let features = match (x0, model.layers[0].combination) {
        (Features::Sparse(x), CombinationMode::Sdmm) => {
            Some(prepare_sparse(x, &cfg.with_value_bits(stream_value_bits(x, cfg)))?)
        }
        _ => None,
    };
    Ok(Prepared { features, aggregation })
}

/// `[I | M]` with the identity written as 1.0 in `M`'s format.
fn self_and_neighbors(m: &SparseMatrix) -> Result<SparseMatrix> {
    let n = m.rows();
    let one = 1i64 << m.format().frac_bits;
    let one = m.format().check(one)?;
    let mut t: Vec<(usize, usize, i32)> = (0..n).map(|i| (i, i, one)).collect();
    t.extend(m.triplets().map(|(r, c, v)| (r, n + c, v)));
    SparseMatrix::from_triplets(n, 2 * n, t, m.format())
}

/// Packet value width for streaming `x`: the configured width, widened to
/// the operand's own precision when that is larger. Binary operands need
/// no value field beyond the configured one.
pub fn stream_value_bits(x: &SparseMatrix, cfg: &ArchConfig) -> u32 {
    if x.is_binary() {
        cfg.value_bits
    } else {
        cfg.value_bits.max(x.format().bits)
    }
}

/// Requantizes to `bits` with the largest scale that keeps every magnitude
/// at or below `cap`.
pub fn requantize_fitted(y: &DenseMatrix, bits: u32, cap: u64) -> Result<DenseMatrix> {
    let from = y.format().frac_bits;
    let frac = fit_frac_bits_capped(y.max_abs(), from, bits, cap);
    let format = Format::new(bits, frac)?;
    let data = y.data().iter().map(|&v| requantize(v as i64, from, format).0).collect();
    DenseMatrix::try_new(y.rows(), y.cols(), data, format)
}

fn product(
    backend: Backend<'_>,
    left: LeftOperand<'_>,
    w: &DenseMatrix,
    destination: Destination,
    prepared: Option<&[ScheduledTile]>,
) -> Result<(DenseMatrix, Option<CycleReport>)> {
    match backend {
        Backend::Simulator(cfg) if prepared.is_some() => {
            let tiles = prepared.unwrap_or_default();
            check_tiles(tiles, left.rows(), left.cols(), "combination")?;
            let ewm = match left {
                LeftOperand::Dense(d) => Some(d),
                LeftOperand::Sparse(_) => None,
            };
            let (y, report) = execute(tiles, ewm, left.format(), w, destination, cfg)?;
            Ok((y, Some(report)))
        }
        Backend::Simulator(cfg) => {
            let cfg = match left {
                LeftOperand::Sparse(x) => cfg.with_value_bits(stream_value_bits(x, cfg)),
                LeftOperand::Dense(_) => *cfg,
            };
            let (y, report) = simulate_step(left, w, destination, &cfg)?;
            Ok((y, Some(report)))
        }
        Backend::Reference => {
            let y = match left {
                LeftOperand::Sparse(x) => sdmm_reference(x, w)?,
                LeftOperand::Dense(x) => dmm_reference(x, w)?,
            };
            Ok((y, None))
        }
    }
}

fn add_bias(y: &DenseMatrix, bias: &DenseMatrix) -> Result<DenseMatrix> {
    let (to, from) = (y.format().frac_bits, bias.format().frac_bits);
    let aligned: Vec<i64> = bias
        .row(0)
        .iter()
        .map(|&b| if to >= from { (b as i64) << (to - from) } else { shift_round_even(b as i64, from - to) })
        .collect();
    let mut data = Vec::with_capacity(y.data().len());
    for r in 0..y.rows() {
        for (k, (&v, &b)) in y.row(r).iter().zip(&aligned).enumerate() {
            let s = i32::try_from(v as i64 + b).map_err(|_| Error::Overflow { row: r, col: k })?;
            data.push(s);
        }
    }
    DenseMatrix::try_new(y.rows(), y.cols(), data, y.format())
}

/// `[XW_self | XW_neigh]` (m x 2h) rearranged to `[XW_self; XW_neigh]`.
fn split_halves(xw: &DenseMatrix) -> Result<DenseMatrix> {
    let h = xw.cols() / 2;
    xw.block(0, xw.rows(), 0, h).vstack(&xw.block(0, xw.rows(), h, xw.cols()))
}

/// Shared layer pipeline for both backends.
pub fn layer_forward(
    backend: Backend<'_>,
    model: &ModelSpec,
    agg: &mut Aggregator,
    x: &Features,
    layer: &LayerSpec,
    name: &str,
    comb_tiles: Option<&[ScheduledTile]>,
) -> Result<(DenseMatrix, CycleReport)> {
    let inputs = model.input_width(layer)?;
    if x.cols() != inputs || x.rows() != agg.matrix.rows() {
        return Err(Error::DimensionMismatch {
            op: "layer input",
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: agg.matrix.rows(),
            right_cols: inputs,
        });
    }
    let weight = match model.kind {
        ModelKind::Gcn => layer.weight.clone(),
        ModelKind::GraphSageMean => {
            let w = &layer.weight;
            w.block(0, inputs, 0, w.cols()).hstack(&w.block(inputs, 2 * inputs, 0, w.cols()))?
        }
    };

    let (as_sparse, as_dense);
    let left = match (layer.combination, x) {
        (CombinationMode::Sdmm, Features::Sparse(s)) => LeftOperand::Sparse(s),
        (CombinationMode::Dmm, Features::Dense(d)) => LeftOperand::Dense(d),
        (CombinationMode::Sdmm, Features::Dense(d)) => {
            as_sparse = SparseMatrix::from_dense(d);
            LeftOperand::Sparse(&as_sparse)
        }
        (CombinationMode::Dmm, Features::Sparse(s)) => {
            as_dense = s.to_dense();
            LeftOperand::Dense(&as_dense)
        }
    };

    let mut report = CycleReport::default();
    let (xw, comb_report) = product(backend, left, &weight, Destination::DenseDataMemory, comb_tiles)?;
    if let Some(mut r) = comb_report {
        r.relabel(&format!("{name}.combination"));
        report.merge(&r);
    }

    // Cap the intermediate so the aggregation cannot leave 32 bits.
    let cap = (i32::MAX as u64) / agg.max_row_abs_sum().max(1);
    let mut xw = requantize_fitted(&xw, ACTIVATION_BITS, cap)?;
    if model.kind == ModelKind::GraphSageMean {
        xw = split_halves(&xw)?;
    }

    let y = match backend {
        Backend::Simulator(cfg) => {
            let a_format = agg.matrix.format();
            let tiles = agg.tiles(cfg)?;
            let (y, mut r) = execute(tiles, None, a_format, &xw, Destination::EdgeWeightMemory, cfg)?;
            r.relabel(&format!("{name}.aggregation"));
            report.merge(&r);
            y
        }
        Backend::Reference => sdmm_reference(&agg.matrix, &xw)?,
    };

    let y = match &layer.bias {
        Some(b) => add_bias(&y, b)?,
        None => y,
    };
    let y = match layer.activation {
        Activation::Relu => relu(&y),
        Activation::None => y,
    };
    let out = requantize_fitted(&y, ACTIVATION_BITS, u64::MAX)?;
    report.check_accounting()?;
    Ok((out, report))
}

/// Runs every layer of `model` in order over raw adjacency `a`.
pub fn run_model(
    backend: Backend<'_>,
    model: &ModelSpec,
    a: &SparseMatrix,
    x0: &Features,
) -> Result<(DenseMatrix, CycleReport)> {
    run_model_prepared(backend, model, a, x0, Prepared::default())
}

/// As [`run_model`], reusing schedules from [`prepare_model`] or from
/// decoded streams. Prepared schedules only affect the simulator backend.
pub fn run_model_prepared(
    backend: Backend<'_>,
    model: &ModelSpec,
    a: &SparseMatrix,
    x0: &Features,
    prepared: Prepared,
) -> Result<(DenseMatrix, CycleReport)> {
    model.validate()?;
    let mut agg = Aggregator::new(model, a)?;
    if let Some(tiles) = prepared.aggregation {
        agg = agg.with_tiles(tiles)?;
    }
    let mut report = CycleReport::default();
    let mut x = x0.clone();
    for (i, layer) in model.layers.iter().enumerate() {
        let comb_tiles = if i == 0 { prepared.features.as_deref() } else { None };
        let name = format!("layer{}", i + 1);
        let (out, r) = layer_forward(backend, model, &mut agg, &x, layer, &name, comb_tiles)?;
        report.merge(&r);
        x = Features::Dense(out);
    }
    match x {
        Features::Dense(logits) => Ok((logits, report)),
        Features::Sparse(_) => unreachable!("at least one layer ran"),
    }
}

/// One GCN layer on the simulator; `a` is the raw adjacency.
pub fn run_layer(
    a: &SparseMatrix,
    x: &Features,
    layer: &LayerSpec,
    cfg: &ArchConfig,
) -> Result<(DenseMatrix, CycleReport)> {
    let model = ModelSpec { kind: ModelKind::Gcn, layers: vec![layer.clone()], adjacency: AdjacencyMode::sym_norm() };
    let mut agg = Aggregator::new(&model, a)?;
    layer_forward(Backend::Simulator(cfg), &model, &mut agg, x, layer, "layer1", None)
}

pub fn run_gcn(
    model: &ModelSpec,
    a: &SparseMatrix,
    x0: &Features,
    cfg: &ArchConfig,
) -> Result<(DenseMatrix, CycleReport)> {
    if model.kind != ModelKind::Gcn {
        return Err(Error::InvalidConfig("run_gcn needs a GCN model".into()));
    }
    run_model(Backend::Simulator(cfg), model, a, x0)
}

pub fn run_graphsage(
    model: &ModelSpec,
    a: &SparseMatrix,
    x0: &Features,
    cfg: &ArchConfig,
) -> Result<(DenseMatrix, CycleReport)> {
    if model.kind != ModelKind::GraphSageMean {
        return Err(Error::InvalidConfig("run_graphsage needs a GraphSAGE model".into()));
    }
    run_model(Backend::Simulator(cfg), model, a, x0)
}
