//! Turns sparse operands into per-PE packet streams.
//!
//! The pipeline for one sparse operand is
//! [`tile_inputs`] → [`assign_rows`] → [`stall_collisions`]; dense left
//! operands use [`build_dmm_schedule`] instead. Everything here runs ahead of
//! time in software and produces the exact slot-by-slot streams the PE array
//! consumes.

mod assign;
mod config;
mod dmm;
mod metadata;
mod stall;
mod stats;
mod tiling;

pub use assign::assign_rows;
pub use config::ArchConfig;
pub use dmm::build_dmm_schedule;
pub use metadata::{OperandMetadata, ScheduleMetadata, TileMetadata};
pub use stall::stall_collisions;
pub use stats::{schedule_stats, ScheduleStats, SlotCounts};
pub use tiling::{tile_inputs, TilePair};

use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;
use crate::pcoo::{PacketLayout, PcooPacket};

/// A rectangular grid of packets: one column per PE, one row per cycle,
/// stored cycle-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileSchedule {
    pes: usize,
    packets: Vec<PcooPacket>,
}

impl TileSchedule {
    pub fn empty(pes: usize) -> Self {
        TileSchedule { pes, packets: Vec::new() }
    }

    pub fn from_packets(pes: usize, packets: Vec<PcooPacket>) -> Result<Self> {
        if pes == 0 || !packets.len().is_multiple_of(pes) {
            return Err(Error::InvalidConfig(format!("{} packets do not form a grid of {pes} columns", packets.len())));
        }
        Ok(TileSchedule { pes, packets })
    }

    /// Transposes per-PE lists into a grid, padding short columns with idle
    /// packets at the end.
    pub fn from_columns(columns: &[Vec<PcooPacket>]) -> Self {
        let pes = columns.len();
        let cycles = columns.iter().map(Vec::len).max().unwrap_or(0);
        let mut packets = vec![PcooPacket::IDLE; pes * cycles];
        for (pe, col) in columns.iter().enumerate() {
            for (c, p) in col.iter().enumerate() {
                packets[c * pes + pe] = *p;
            }
        }
        TileSchedule { pes, packets }
    }

    pub fn pes(&self) -> usize {
        self.pes
    }

    pub fn cycles(&self) -> usize {
        self.packets.len() / self.pes
    }

    pub fn packets(&self) -> &[PcooPacket] {
        &self.packets
    }

    pub fn cycle(&self, c: usize) -> &[PcooPacket] {
        &self.packets[c * self.pes..(c + 1) * self.pes]
    }

    pub fn get(&self, cycle: usize, pe: usize) -> PcooPacket {
        self.packets[cycle * self.pes + pe]
    }

    pub fn column(&self, pe: usize) -> impl Iterator<Item = PcooPacket> + '_ {
        self.packets.iter().skip(pe).step_by(self.pes).copied()
    }

    pub fn columns(&self) -> Vec<Vec<PcooPacket>> {
        (0..self.pes).map(|p| self.column(p).collect()).collect()
    }
}

/// Global rows owned by `pe` when `rows` rows are dealt round-robin over
/// `pes` PEs, in processing order.
pub fn pe_rows(rows: usize, pes: usize, pe: usize) -> impl Iterator<Item = usize> {
    (pe..rows).step_by(pes)
}

/// How the PE obtains the left-operand value of a valid packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperandMode {
    /// Value decoded from the packet (`sparse_flag = 1`). With a zero-bit
    /// value field every valid packet stands for 1.
    Sparse,
    /// Value read from the edge-weight memory (`sparse_flag = 0`).
    Dense,
}

/// A schedule together with where it sits in the full operand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledTile {
    pub schedule: TileSchedule,
    pub layout: PacketLayout,
    pub mode: OperandMode,
    /// Rows of the left operand (all tiles span every row).
    pub rows: usize,
    /// First global column of the left operand covered by this tile.
    pub col_offset: usize,
    /// Columns covered (at most the tile width).
    pub width: usize,
}

/// Runs the full preprocessing pipeline over a sparse left operand: one
/// scheduled tile per `T`-column slice.
pub fn prepare_sparse(x: &SparseMatrix, cfg: &ArchConfig) -> Result<Vec<ScheduledTile>> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let t = cfg.tile_width;
    (0..x.cols().div_ceil(t))
        .map(|ti| {
            let start = ti * t;
            let slice = x.column_slice(start, start + t);
            let pre = assign_rows(&slice, cfg.pes, layout)?;
            Ok(ScheduledTile {
                schedule: stall_collisions(&pre, cfg),
                layout,
                mode: OperandMode::Sparse,
                rows: x.rows(),
                col_offset: start,
                width: slice.cols(),
            })
        })
        .collect()
}

/// Dense-mode schedules for an `rows x cols` left operand.
pub fn prepare_dense(rows: usize, cols: usize, cfg: &ArchConfig) -> Result<Vec<ScheduledTile>> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let t = cfg.tile_width;
    (0..cols.div_ceil(t))
        .map(|ti| {
            let start = ti * t;
            let width = t.min(cols - start);
            let pre = build_dmm_schedule(rows, width, cfg.pes)?;
            Ok(ScheduledTile {
                schedule: stall_collisions(&pre, cfg),
                layout,
                mode: OperandMode::Dense,
                rows,
                col_offset: start,
                width,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_columns_pads_and_transposes() {
        let a = PcooPacket::element(1, 0, true, true);
        let s = TileSchedule::from_columns(&[vec![a, a], vec![a]]);
        assert_eq!(s.cycles(), 2);
        assert_eq!(s.get(1, 1), PcooPacket::IDLE);
        assert_eq!(s.column(0).count(), 2);
        assert!(TileSchedule::from_packets(3, vec![a; 4]).is_err());
    }

    #[test]
    fn round_robin_rows() {
        assert_eq!(pe_rows(10, 4, 1).collect::<Vec<_>>(), vec![1, 5, 9]);
        assert_eq!(pe_rows(2, 4, 3).count(), 0);
    }
}
