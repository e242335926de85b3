use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lwgcn::graph::{export_graph, gen_powerlaw, BundlePaths, GraphBundle, PowerLawParams};
use lwgcn::matrix::DenseMatrix;
use lwgcn::pcoo::{deserialize_stream, serialize_stream};
use lwgcn::runtime::{
    prepare_model, real_forward, run_model_prepared, Aggregator, Backend, Features, ModelKind, ModelSpec, Prepared,
    VerifyReport,
};
use lwgcn::schedule::{ArchConfig, OperandMetadata, ScheduleMetadata, ScheduledTile};
use lwgcn::sim::CycleReport;
use serde::{Deserialize, Serialize};

use crate::exit::VerificationFailed;

pub const METADATA_FILE: &str = "schedule.json";
pub const FEATURES_OPERAND: &str = "features";
pub const AGGREGATION_OPERAND: &str = "aggregation";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Gcn,
    Graphsage,
}

impl ModelChoice {
    pub fn build(self, bundle: &GraphBundle) -> Result<ModelSpec> {
        if bundle.weights.is_empty() {
            bail!(lwgcn::Error::InvalidConfig("the graph has no layer weights".into()));
        }
        let weights = bundle.weights.clone();
        Ok(match self {
            ModelChoice::Gcn => ModelSpec::gcn(weights)?,
            ModelChoice::Graphsage => ModelSpec::graphsage_mean(weights)?,
        })
    }

    pub fn weight_blocks(self) -> usize {
        match self {
            ModelChoice::Gcn => 1,
            ModelChoice::Graphsage => 2,
        }
    }
}

pub fn cmd_gen(params: &PowerLawParams, out: &Path) -> Result<BundlePaths> {
    let bundle = gen_powerlaw(params)?;
    export_graph(&bundle, out).with_context(|| format!("writing {}", out.display()))
}

#[derive(Debug, Clone)]
pub struct PreprocessSummary {
    pub metadata: ScheduleMetadata,
    pub files: Vec<PathBuf>,
    /// `operand,tile,cycles,valid,empty_row,stall_idle,pad_idle` rows.
    pub table: String,
}

fn describe(
    name: &str,
    cols: usize,
    nnz: usize,
    x: &lwgcn::matrix::SparseMatrix,
    tiles: &[ScheduledTile],
    pes: usize,
) -> OperandMetadata {
    OperandMetadata::describe(name, cols, nnz, x.format(), tiles, pes)
}

/// Builds and writes the streams of every sparse operand plus the
/// `schedule.json` sidecar.
pub fn cmd_preprocess(
    bundle: &GraphBundle,
    model: ModelChoice,
    cfg: &ArchConfig,
    out: &Path,
) -> Result<PreprocessSummary> {
    let spec = model.build(bundle)?;
    let x0 = Features::Sparse(bundle.features.clone());
    let prepared = prepare_model(&spec, &bundle.adjacency, &x0, cfg)?;
    let agg = Aggregator::new(&spec, &bundle.adjacency)?;

    let mut operands = Vec::new();
    let mut streams: Vec<(&[ScheduledTile], usize)> = Vec::new();
    if let Some(tiles) = &prepared.features {
        let x = &bundle.features;
        operands.push(describe(FEATURES_OPERAND, x.cols(), x.nnz(), x, tiles, cfg.pes));
        streams.push((tiles, operands.len() - 1));
    }
    if let Some(tiles) = &prepared.aggregation {
        let a = &agg.matrix;
        operands.push(describe(AGGREGATION_OPERAND, a.cols(), a.nnz(), a, tiles, cfg.pes));
        streams.push((tiles, operands.len() - 1));
    }

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut files = Vec::new();
    let mut table = String::from("operand,tile,cycles,valid,empty_row,stall_idle,pad_idle\n");
    for (tiles, idx) in streams {
        let meta = &operands[idx];
        for (tile, tm) in tiles.iter().zip(&meta.tiles) {
            let path = out.join(&tm.file);
            fs::write(&path, serialize_stream(&tile.schedule, tile.layout)?)
                .with_context(|| format!("writing {}", path.display()))?;
            files.push(path);
            let t = &tm.stats.total;
            let _ = writeln!(
                table,
                "{},{},{},{},{},{},{}",
                meta.name, tm.file, tm.stats.cycles, t.valid, t.empty_row, t.stall_idle, t.pad_idle
            );
        }
    }
    let metadata = ScheduleMetadata { config: *cfg, operands };
    let meta_path = out.join(METADATA_FILE);
    fs::write(&meta_path, metadata.to_json()?).with_context(|| format!("writing {}", meta_path.display()))?;
    files.push(meta_path);
    Ok(PreprocessSummary { metadata, files, table })
}

/// Reads a preprocessing directory back into schedules.
pub fn load_schedules(dir: &Path) -> Result<(ArchConfig, Prepared)> {
    let meta_path = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&meta_path).with_context(|| format!("reading {}", meta_path.display()))?;
    let metadata = ScheduleMetadata::from_json(&text).with_context(|| format!("parsing {}", meta_path.display()))?;
    let cfg = metadata.config;
    cfg.validate()?;
    let restore = |name: &str| -> Result<Option<Vec<ScheduledTile>>> {
        let Some(op) = metadata.operand(name) else { return Ok(None) };
        let mut schedules = Vec::with_capacity(op.tiles.len());
        for tm in &op.tiles {
            let path = dir.join(&tm.file);
            let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let (header, schedule) =
                deserialize_stream(&bytes).with_context(|| format!("decoding {}", path.display()))?;
            if header.layout.value_bits() != op.value_bits || header.layout.tile_width() != cfg.tile_width {
                bail!(lwgcn::Error::ScheduleMismatch(format!("{} has a different packet layout", tm.file)));
            }
            schedules.push(schedule);
        }
        Ok(Some(op.restore(&cfg, schedules)?))
    };
    let prepared = Prepared { features: restore(FEATURES_OPERAND)?, aggregation: restore(AGGREGATION_OPERAND)? };
    Ok((cfg, prepared))
}

/// Everything a simulation run reports; serialized as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub config: ArchConfig,
    pub model: ModelKind,
    pub nodes: usize,
    pub total_cycles: usize,
    /// Largest per-PE share of SDMM cycles without a multiply-accumulate.
    pub worst_pe_sdmm_idle: f64,
    pub verify: VerifyReport,
    pub cycles: CycleReport,
}

impl SimulationRecord {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let p = &self.cycles.phases;
        let _ = writeln!(s, "nodes: {}", self.nodes);
        let _ = writeln!(
            s,
            "cycles: total {} = load {} + sdmm {} + dmm {} + data_move {}",
            p.total(),
            p.load,
            p.sdmm_compute,
            p.dmm_compute,
            p.data_move
        );
        let flag = if self.worst_pe_sdmm_idle < 0.2 { "below" } else { "above" };
        let _ = writeln!(s, "worst-PE SDMM idle fraction: {:.4} ({flag} 0.20)", self.worst_pe_sdmm_idle);
        let v = &self.verify;
        let _ = writeln!(
            s,
            "oracle: exact_match={} max_abs_err={:.6} argmax_agreement={:.4}",
            v.exact_match, v.max_abs_err, v.argmax_agreement
        );
        s
    }
}

fn logits_csv(y: &DenseMatrix) -> String {
    let f = y.format();
    let mut s = String::from("node");
    for k in 0..y.cols() {
        let _ = write!(s, ",c{k}");
    }
    s.push('\n');
    for r in 0..y.rows() {
        let _ = write!(s, "{r}");
        for &v in y.row(r) {
            let _ = write!(s, ",{}", f.to_real(v));
        }
        s.push('\n');
    }
    s
}

/// Full inference on the simulator, checked against the integer oracle.
///
/// With `schedules`, the architecture comes from that preprocessing run.
/// Files are written before a verification failure is reported.
pub fn cmd_simulate(
    bundle: &GraphBundle,
    model: ModelChoice,
    cfg: &ArchConfig,
    schedules: Option<&Path>,
    out: Option<&Path>,
) -> Result<SimulationRecord> {
    let spec = model.build(bundle)?;
    let x0 = Features::Sparse(bundle.features.clone());
    let (cfg, prepared) = match schedules {
        Some(dir) => load_schedules(dir)?,
        None => (*cfg, Prepared::default()),
    };
    let a = &bundle.adjacency;
    let (logits, cycles) = run_model_prepared(Backend::Simulator(&cfg), &spec, a, &x0, prepared)?;
    let (oracle, _) = run_model_prepared(Backend::Reference, &spec, a, &x0, Prepared::default())?;
    let real = real_forward(&spec, a, &x0)?;
    let verify = VerifyReport::compare(&logits, &oracle, &real);
    let worst = cycles.sdmm_per_pe.iter().map(|b| b.idle_fraction()).fold(0.0, f64::max);
    let record = SimulationRecord {
        config: cfg,
        model: spec.kind,
        nodes: bundle.nodes(),
        total_cycles: cycles.total_cycles(),
        worst_pe_sdmm_idle: worst,
        verify,
        cycles,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&record)?)?;
        fs::write(dir.join("breakdown.csv"), record.cycles.to_table())?;
        fs::write(dir.join("logits.csv"), logits_csv(&logits))?;
    }
    if !record.verify.exact_match {
        return Err(VerificationFailed.into());
    }
    Ok(record)
}

/// Measured cycles against a machine where every PE does a
/// multiply-accumulate every cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Efficiency {
    pub work: usize,
    pub ideal: usize,
    pub actual: usize,
}

impl Efficiency {
    pub fn new(work: usize, pes: usize, actual: usize) -> Self {
        Efficiency { work, ideal: work.div_ceil(pes.max(1)), actual }
    }

    /// `ideal / actual`, in `(0, 1]`; an empty run counts as fully efficient.
    pub fn ratio(&self) -> f64 {
        if self.actual == 0 || self.ideal == 0 {
            1.0
        } else {
            self.ideal as f64 / self.actual as f64
        }
    }
}

/// SDMM, DMM and combined compute efficiency of a report.
pub fn efficiency(report: &CycleReport, pes: usize) -> [Efficiency; 3] {
    let sdmm: usize = report.sdmm_per_pe.iter().map(|b| b.compute).sum();
    let dmm: usize = report.dmm_per_pe.iter().map(|b| b.compute).sum();
    let p = &report.phases;
    [
        Efficiency::new(sdmm, pes, p.sdmm_compute),
        Efficiency::new(dmm, pes, p.dmm_compute),
        Efficiency::new(sdmm + dmm, pes, p.compute()),
    ]
}

/// Human-readable summary of a `report.json`.
pub fn cmd_report(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let record: SimulationRecord =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    record.cycles.check_accounting().with_context(|| format!("checking {}", path.display()))?;
    if record.cycles.total_cycles() != record.total_cycles {
        bail!(lwgcn::Error::InvalidConfig(format!(
            "{}: phases sum to {} but total says {}",
            path.display(),
            record.cycles.total_cycles(),
            record.total_cycles
        )));
    }
    let mut s = record.summary();
    let _ = writeln!(s, "step,work,ideal_cycles,actual_cycles,efficiency");
    for (name, e) in ["sdmm", "dmm", "compute"].iter().zip(efficiency(&record.cycles, record.config.pes)) {
        let _ = writeln!(s, "{name},{},{},{},{:.4}", e.work, e.ideal, e.actual, e.ratio());
    }
    let t = record.cycles.sdmm_totals();
    let _ = writeln!(
        s,
        "sdmm slots: compute {} empty_row {} collision {} imbalance {}",
        t.compute, t.empty_row, t.collision, t.imbalance
    );
    Ok(s)
}
