use std::io::Write;

use anyhow::{bail, Context, Result};
use lwgcn::graph::GraphBundle;
use lwgcn::schedule::ArchConfig;
use rayon::prelude::*;

use crate::commands::{cmd_simulate, ModelChoice};

/// Grid over PE count, replication and tile width; other parameters come
/// from `base`. Points run in `pes`, `replicas`, `tile_widths` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSpec {
    pub base: ArchConfig,
    pub pes: Vec<usize>,
    pub replicas: Vec<usize>,
    pub tile_widths: Vec<usize>,
}

impl SweepSpec {
    /// Every grid point, validated before anything runs.
    pub fn points(&self) -> Result<Vec<ArchConfig>> {
        let or_base = |v: &[usize], d: usize| if v.is_empty() { vec![d] } else { v.to_vec() };
        let mut out = Vec::new();
        for &pes in &or_base(&self.pes, self.base.pes) {
            for &replicas in &or_base(&self.replicas, self.base.replicas) {
                for &tile_width in &or_base(&self.tile_widths, self.base.tile_width) {
                    let cfg = ArchConfig { pes, replicas, tile_width, ..self.base };
                    cfg.validate().with_context(|| format!("sweep point K={pes} r={replicas} T={tile_width}"))?;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }
}

/// One line of sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config: ArchConfig,
    pub load: usize,
    pub sdmm: usize,
    pub dmm: usize,
    pub data_move: usize,
    pub total: usize,
    pub compute: usize,
    pub empty_row: usize,
    pub collision: usize,
    pub imbalance: usize,
    pub exact_match: bool,
}

impl SweepRow {
    pub const HEADER: &'static str = "pes,replicas,tile_width,lanes,row_groups,value_bits,load_bw,move_bw,\
load,sdmm,dmm,data_move,total,sdmm_compute,sdmm_empty_row,sdmm_collision,sdmm_imbalance,exact_match";

    pub fn to_csv(&self) -> String {
        let c = &self.config;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.pes,
            c.replicas,
            c.tile_width,
            c.lanes,
            c.row_groups(),
            c.value_bits,
            c.load_bw,
            c.move_bw,
            self.load,
            self.sdmm,
            self.dmm,
            self.data_move,
            self.total,
            self.compute,
            self.empty_row,
            self.collision,
            self.imbalance,
            self.exact_match
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 18 {
            bail!(lwgcn::Error::Parse { source_name: "sweep".into(), line: 0, msg: format!("{} fields", f.len()) });
        }
        let n =
            |i: usize| -> Result<usize> { f[i].parse().with_context(|| format!("field {i} of sweep row: {:?}", f[i])) };
        let config = ArchConfig {
            pes: n(0)?,
            replicas: n(1)?,
            tile_width: n(2)?,
            lanes: n(3)?,
            value_bits: n(5)? as u32,
            load_bw: n(6)?,
            move_bw: n(7)?,
        };
        config.validate()?;
        if config.row_groups() != n(4)? {
            bail!(lwgcn::Error::InvalidConfig(format!("row groups {} disagree with T/C", f[4])));
        }
        Ok(SweepRow {
            config,
            load: n(8)?,
            sdmm: n(9)?,
            dmm: n(10)?,
            data_move: n(11)?,
            total: n(12)?,
            compute: n(13)?,
            empty_row: n(14)?,
            collision: n(15)?,
            imbalance: n(16)?,
            exact_match: f[17].parse().with_context(|| format!("exact_match {:?}", f[17]))?,
        })
    }
}

fn run_point(bundle: &GraphBundle, model: ModelChoice, cfg: &ArchConfig) -> Result<SweepRow> {
    let rec = cmd_simulate(bundle, model, cfg, None, None)?;
    let p = rec.cycles.phases;
    let t = rec.cycles.sdmm_totals();
    Ok(SweepRow {
        config: *cfg,
        load: p.load,
        sdmm: p.sdmm_compute,
        dmm: p.dmm_compute,
        data_move: p.data_move,
        total: p.total(),
        compute: t.compute,
        empty_row: t.empty_row,
        collision: t.collision,
        imbalance: t.imbalance,
        exact_match: rec.verify.exact_match,
    })
}

/// Simulates every grid point on up to `jobs` threads and writes a CSV
/// table in grid order. Rows before the first failing point are written
/// before the error is returned.
pub fn cmd_sweep<W: Write>(
    spec: &SweepSpec,
    bundle: &GraphBundle,
    model: ModelChoice,
    jobs: usize,
    out: &mut W,
) -> Result<Vec<SweepRow>> {
    let points = spec.points()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let results: Vec<Result<SweepRow>> =
        pool.install(|| points.par_iter().map(|cfg| run_point(bundle, model, cfg)).collect());
    writeln!(out, "{}", SweepRow::HEADER)?;
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let row = r?;
        writeln!(out, "{}", row.to_csv())?;
        out.flush()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_order_and_validation() {
        let spec =
            SweepSpec { base: ArchConfig::default(), pes: vec![], replicas: vec![1, 2], tile_widths: vec![512, 1024] };
        let pts: Vec<_> = spec.points().unwrap().iter().map(|c| (c.pes, c.replicas, c.tile_width)).collect();
        assert_eq!(pts, [(32, 1, 512), (32, 1, 1024), (32, 2, 512), (32, 2, 1024)]);
        let bad = SweepSpec { replicas: vec![3], ..spec };
        assert!(bad.points().is_err());
    }

    #[test]
    fn rows_round_trip() {
        let row = SweepRow {
            config: ArchConfig::new(8, 4, 2, 64, 4).unwrap(),
            load: 1,
            sdmm: 2,
            dmm: 3,
            data_move: 4,
            total: 10,
            compute: 5,
            empty_row: 6,
            collision: 7,
            imbalance: 8,
            exact_match: true,
        };
        assert_eq!(SweepRow::parse(&row.to_csv()).unwrap(), row);
        assert_eq!(SweepRow::HEADER.split(',').count(), 18);
        assert!(SweepRow::parse("1,2,3").is_err());
    }
}
