//! Cycle-level model of the PE array.
//!
//! One call to [`simulate_step`] executes a whole SDMM or DMM: for every
//! output column block the dense tiles are loaded into the banked dense data
//! memory one at a time, the matching schedule is streamed through the PEs
//! one row of packets per cycle, and partial rows travel through the output
//! backup buffer between tiles. The result lands in the output buffer and is
//! copied to its next home during the data-move phase.

mod ddm;
mod pe;
mod report;

pub use ddm::{load_tile, DenseDataMemory};
pub use pe::PeState;
pub use report::{CycleReport, PeBreakdown, PhaseCycles, TileRecord};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::Format;
use crate::matrix::{DenseMatrix, SparseMatrix};
use crate::schedule::{
    pe_rows, prepare_dense, prepare_sparse, schedule_stats, ArchConfig, OperandMode, ScheduleStats, ScheduledTile,
};

/// Left operand of a step, which also fixes the execution mode.
#[derive(Debug, Clone, Copy)]
pub enum LeftOperand<'a> {
    Sparse(&'a SparseMatrix),
    Dense(&'a DenseMatrix),
}

impl LeftOperand<'_> {
    pub fn rows(&self) -> usize {
        match self {
            LeftOperand::Sparse(x) => x.rows(),
            LeftOperand::Dense(x) => x.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LeftOperand::Sparse(x) => x.cols(),
            LeftOperand::Dense(x) => x.cols(),
        }
    }

    pub fn format(&self) -> Format {
        match self {
            LeftOperand::Sparse(x) => x.format(),
            LeftOperand::Dense(x) => x.format(),
        }
    }

    /// Runs the preprocessing for this operand.
    pub fn prepare(&self, cfg: &ArchConfig) -> Result<Vec<ScheduledTile>> {
        match self {
            LeftOperand::Sparse(x) => prepare_sparse(x, cfg),
            LeftOperand::Dense(x) => prepare_dense(x.rows(), x.cols(), cfg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Destination {
    /// Result becomes the dense right operand of the next step.
    DenseDataMemory,
    /// Result becomes the streamed left operand of the next step.
    EdgeWeightMemory,
}

/// Output matrix memory backup: running partial rows for one block of
/// output columns, `lanes` values per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputBackup {
    lanes: usize,
    data: Vec<i32>,
}

impl OutputBackup {
    pub fn new(rows: usize, lanes: usize) -> Self {
        OutputBackup { lanes, data: vec![0; rows * lanes] }
    }

    pub fn row(&self, r: usize) -> &[i32] {
        &self.data[r * self.lanes..(r + 1) * self.lanes]
    }

    fn row_mut(&mut self, r: usize) -> &mut [i32] {
        &mut self.data[r * self.lanes..(r + 1) * self.lanes]
    }
}

/// Executes one scheduled tile against the loaded dense tile.
///
/// The arbitration in every replica group is re-checked each cycle: two
/// PEs may read the same row of a bank together, but two different rows of
/// one bank in the same cycle is a scheduler bug and fails the run.
pub fn run_tile(
    tile: &ScheduledTile,
    ddm: &DenseDataMemory,
    ewm: Option<&DenseMatrix>,
    ommb: &mut OutputBackup,
    cfg: &ArchConfig,
) -> Result<ScheduleStats> {
    let schedule = &tile.schedule;
    let pes = cfg.pes;
    if schedule.pes() != pes || ddm.replicas() != cfg.replicas {
        return Err(Error::ScheduleMismatch(format!("schedule for {} PEs on a {pes}-PE array", schedule.pes())));
    }
    if tile.mode == OperandMode::Dense && ewm.is_none() {
        return Err(Error::ScheduleMismatch("dense schedule without edge-weight memory".into()));
    }
    if ddm.rows() != tile.width {
        return Err(Error::ScheduleMismatch(format!(
            "tile covers {} columns but {} dense rows are loaded",
            tile.width,
            ddm.rows()
        )));
    }

    let mut states: Vec<PeState> =
        (0..pes).map(|_| PeState::new(cfg.lanes, tile.mode == OperandMode::Sparse, tile.layout.value_bits())).collect();
    let zeros = vec![0i32; cfg.lanes];
    let group = cfg.group_size();
    // Priority-decoder state per (group, bank): the cycle of the last grant and its row.
    let mut grant_cycle = vec![usize::MAX; cfg.replicas * ddm.banks()];
    let mut grant_row = vec![0usize; cfg.replicas * ddm.banks()];

    for cycle in 0..schedule.cycles() {
        for (pe, pkt) in schedule.cycle(cycle).iter().enumerate() {
            if pkt.is_idle() {
                continue;
            }
            let state = &mut states[pe];
            let row = pe + state.rows_done * pes;
            if row >= tile.rows {
                return Err(Error::ScheduleMismatch(format!("PE {pe} runs past row {}", tile.rows)));
            }
            let w_row = if pkt.vld {
                let col = pkt.col as usize;
                if col >= tile.width {
                    return Err(Error::ColumnOutOfRange { col, width: tile.width });
                }
                let replica = pe / group;
                let slot = replica * ddm.banks() + ddm.bank_of(col);
                if grant_cycle[slot] == cycle && grant_row[slot] != col {
                    return Err(Error::Arbitration {
                        cycle,
                        group: replica,
                        bank: ddm.bank_of(col),
                        first: grant_row[slot],
                        second: col,
                    });
                }
                grant_cycle[slot] = cycle;
                grant_row[slot] = col;
                ddm.read(replica, col)
            } else {
                &zeros[..]
            };
            let ewm_value = match (tile.mode, ewm) {
                (OperandMode::Dense, Some(x)) if pkt.vld => x.get(row, tile.col_offset + pkt.col as usize),
                _ => 0,
            };
            let partial = if pkt.sor { ommb.row(row).to_vec() } else { Vec::new() };
            if let Some(out) = state.step(pkt, ewm_value, w_row, &partial, row)? {
                ommb.row_mut(row).copy_from_slice(out);
            }
        }
    }

    for (pe, state) in states.iter().enumerate() {
        let expected = pe_rows(tile.rows, pes, pe).count();
        if state.rows_done != expected {
            return Err(Error::ScheduleMismatch(format!(
                "PE {pe} finished {} of its {expected} rows",
                state.rows_done
            )));
        }
    }
    Ok(schedule_stats(schedule))
}

/// Cycles to copy `elements` values out of the output buffer.
pub fn data_move_cycles(elements: usize, cfg: &ArchConfig) -> usize {
    elements.div_ceil(cfg.move_bw)
}

/// Copies a finished result to `destination`; the output buffer keeps its
/// own copy. Returns the moved copy and the cycles spent.
pub fn data_move(y: &DenseMatrix, _destination: Destination, cfg: &ArchConfig) -> (DenseMatrix, usize) {
    (y.clone(), data_move_cycles(y.rows() * y.cols(), cfg))
}

/// Executes pre-built schedules for a left operand against `w`.
///
/// `ewm` supplies the left operand's values for dense-mode tiles;
/// `left_format` is the left operand's fixed-point format.
pub fn execute(
    tiles: &[ScheduledTile],
    ewm: Option<&DenseMatrix>,
    left_format: Format,
    w: &DenseMatrix,
    destination: Destination,
    cfg: &ArchConfig,
) -> Result<(DenseMatrix, CycleReport)> {
    cfg.validate()?;
    let rows = tiles.first().map_or(0, |t| t.rows);
    let mut covered = 0;
    for t in tiles {
        if t.col_offset != covered || t.rows != rows || t.width > cfg.tile_width {
            return Err(Error::ScheduleMismatch(format!("tile at column {} is out of sequence", t.col_offset)));
        }
        covered += t.width;
    }
    if covered != w.rows() {
        return Err(Error::DimensionMismatch {
            op: "simulate",
            left_rows: rows,
            left_cols: covered,
            right_rows: w.rows(),
            right_cols: w.cols(),
        });
    }
    let out_format = Format::accumulator(left_format, w.format())?;
    let mut y = DenseMatrix::zeros(rows, w.cols(), out_format);
    let mut report = CycleReport::new(cfg.pes);

    for c0 in (0..w.cols()).step_by(cfg.lanes) {
        let c1 = (c0 + cfg.lanes).min(w.cols());
        let mut ommb = OutputBackup::new(rows, cfg.lanes);
        for tile in tiles {
            let block = w.block(tile.col_offset, tile.col_offset + tile.width, c0, c1);
            let (ddm, load_cycles) = load_tile(&block, cfg)?;
            let stats = run_tile(tile, &ddm, ewm, &mut ommb, cfg)?;
            report.record_tile(
                TileRecord {
                    step: String::new(),
                    mode: tile.mode,
                    col_offset: tile.col_offset,
                    out_col_offset: c0,
                    load_cycles,
                    cycles: stats.cycles,
                    slots: stats.total,
                },
                &stats.per_pe,
            );
        }
        for r in 0..rows {
            for (k, &v) in ommb.row(r)[..c1 - c0].iter().enumerate() {
                y.set(r, c0 + k, v);
            }
        }
    }
    let (_, move_cycles) = data_move(&y, destination, cfg);
    report.phases.data_move += move_cycles;
    report.check_accounting()?;
    Ok((y, report))
}

/// Preprocesses and executes `x * w` on the modeled array.
pub fn simulate_step(
    x: LeftOperand<'_>,
    w: &DenseMatrix,
    destination: Destination,
    cfg: &ArchConfig,
) -> Result<(DenseMatrix, CycleReport)> {
    if x.cols() != w.rows() {
        return Err(Error::DimensionMismatch {
            op: "simulate",
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: w.rows(),
            right_cols: w.cols(),
        });
    }
    let tiles = x.prepare(cfg)?;
    let ewm = match x {
        LeftOperand::Dense(d) => Some(d),
        LeftOperand::Sparse(_) => None,
    };
    if tiles.is_empty() {
        // No inner dimension: the product is all zeros and nothing streams.
        let y = DenseMatrix::zeros(x.rows(), w.cols(), Format::accumulator(x.format(), w.format())?);
        let mut report = CycleReport::new(cfg.pes);
        report.phases.data_move = data_move_cycles(y.rows() * y.cols(), cfg);
        return Ok((y, report));
    }
    execute(&tiles, ewm, x.format(), w, destination, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{dmm_reference, sdmm_reference};
    use crate::pcoo::{PacketLayout, PcooPacket};
    use crate::schedule::{build_dmm_schedule, TileSchedule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64, binary: bool) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if rng.gen_bool(density) {
                    let v = if binary { 1 } else { [-8, -3, -1, 1, 2, 7][rng.gen_range(0..6)] };
                    t.push((i, j, v));
                }
            }
        }
        let f = if binary { Format::BINARY } else { Format::SINT4_INPUT };
        SparseMatrix::from_triplets(m, n, t, f).unwrap()
    }

    fn random_dense(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix {
        let data = (0..m * n).map(|_| rng.gen_range(-8..8)).collect();
        DenseMatrix::try_new(m, n, data, Format::SINT4_INPUT).unwrap()
    }

    #[test]
    fn sdmm_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_sparse(&mut rng, 64, 64, 0.01, false);
        let w = random_dense(&mut rng, 64, 16);
        let cfg = ArchConfig::new(4, 16, 1, 32, 4).unwrap();
        let (y, report) = simulate_step(LeftOperand::Sparse(&x), &w, Destination::EdgeWeightMemory, &cfg).unwrap();
        assert_eq!(y, sdmm_reference(&x, &w).unwrap());
        report.check_accounting().unwrap();
        assert_eq!(report.phases.data_move, 64);
    }

    #[test]
    fn dmm_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_dense(&mut rng, 32, 16);
        let w = random_dense(&mut rng, 16, 16);
        let cfg = ArchConfig::new(8, 4, 2, 16, 4).unwrap();
        let (y, report) = simulate_step(LeftOperand::Dense(&x), &w, Destination::DenseDataMemory, &cfg).unwrap();
        assert_eq!(y, dmm_reference(&x, &w).unwrap());
        let totals = report.dmm_per_pe.iter().fold(0, |a, b| a + b.collision + b.imbalance);
        assert_eq!(totals, 0);
    }

    #[test]
    fn identity_reproduces_w() {
        let x = SparseMatrix::identity(20, Format::BINARY, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_dense(&mut rng, 20, 24);
        let cfg = ArchConfig::new(4, 8, 2, 8, 0).unwrap();
        let (y, _) = simulate_step(LeftOperand::Sparse(&x), &w, Destination::EdgeWeightMemory, &cfg).unwrap();
        assert_eq!(y.data(), w.data());
    }

    fn single_tile(schedule: TileSchedule, rows: usize, width: usize, mode: OperandMode) -> ScheduledTile {
        ScheduledTile { schedule, layout: PacketLayout::new(8, 0).unwrap(), mode, rows, col_offset: 0, width }
    }

    #[test]
    fn idle_schedule_leaves_partials() {
        let cfg = ArchConfig::new(2, 4, 1, 8, 0).unwrap();
        let tile =
            single_tile(TileSchedule::from_columns(&[vec![PcooPacket::IDLE; 3], vec![]]), 0, 8, OperandMode::Sparse);
        let (ddm, _) = load_tile(&DenseMatrix::zeros(8, 4, Format::BINARY), &cfg).unwrap();
        let mut ommb = OutputBackup::new(0, 4);
        let stats = run_tile(&tile, &ddm, None, &mut ommb, &cfg).unwrap();
        assert_eq!(stats.total.valid, 0);
        assert_eq!(stats.total.pad_idle, 6);
    }

    #[test]
    fn dense_sweep_cycle_counts() {
        let cfg = ArchConfig::new(4, 4, 2, 8, 0).unwrap();
        let sched = build_dmm_schedule(4, 8, 4).unwrap();
        let tile = single_tile(sched, 4, 8, OperandMode::Dense);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_dense(&mut rng, 4, 8);
        let w = random_dense(&mut rng, 8, 4);
        let (ddm, _) = load_tile(&w, &cfg).unwrap();
        let mut ommb = OutputBackup::new(4, 4);
        let stats = run_tile(&tile, &ddm, Some(&x), &mut ommb, &cfg).unwrap();
        assert_eq!(stats.cycles, 8);
        assert_eq!((stats.total.valid, stats.total.stall_idle, stats.total.pad_idle), (32, 0, 0));
        let expect = dmm_reference(&x, &w).unwrap();
        for r in 0..4 {
            assert_eq!(ommb.row(r), expect.row(r));
        }
    }

    #[test]
    fn illegal_schedule_is_rejected() {
        // Rows 1 and 5 share bank 1 of a 4-bank memory; one replica.
        let cfg = ArchConfig::new(2, 2, 1, 8, 0).unwrap();
        let cols = [vec![PcooPacket::element(1, 0, true, true)], vec![PcooPacket::element(5, 0, true, true)]];
        let tile = single_tile(TileSchedule::from_columns(&cols), 2, 8, OperandMode::Sparse);
        let (ddm, _) = load_tile(&DenseMatrix::zeros(8, 2, Format::BINARY), &cfg).unwrap();
        let mut ommb = OutputBackup::new(2, 2);
        assert!(matches!(run_tile(&tile, &ddm, None, &mut ommb, &cfg), Err(Error::Arbitration { bank: 1, .. })));
        // With two replicas the same packets are legal.
        let cfg2 = ArchConfig::new(2, 2, 2, 8, 0).unwrap();
        let (ddm2, _) = load_tile(&DenseMatrix::zeros(8, 2, Format::BINARY), &cfg2).unwrap();
        run_tile(&tile, &ddm2, None, &mut ommb, &cfg2).unwrap();
    }

    #[test]
    fn out_of_range_column_is_rejected() {
        let cfg = ArchConfig::new(1, 2, 1, 8, 0).unwrap();
        let tile = single_tile(
            TileSchedule::from_columns(&[vec![PcooPacket::element(6, 0, true, true)]]),
            1,
            4,
            OperandMode::Sparse,
        );
        let (ddm, _) = load_tile(&DenseMatrix::zeros(4, 2, Format::BINARY), &cfg).unwrap();
        let mut ommb = OutputBackup::new(1, 2);
        assert!(matches!(
            run_tile(&tile, &ddm, None, &mut ommb, &cfg),
            Err(Error::ColumnOutOfRange { col: 6, width: 4 })
        ));
    }

    #[test]
    fn data_move_examples() {
        let cfg = ArchConfig::default();
        let y = DenseMatrix::zeros(2708, 16, Format::BINARY);
        let (copy, cycles) = data_move(&y, Destination::EdgeWeightMemory, &cfg);
        assert_eq!(cycles, 2708);
        assert_eq!(copy, y);
        assert_eq!(data_move_cycles(0, &cfg), 0);
    }
}
