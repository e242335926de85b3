use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{OperandMode, SlotCounts};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCycles {
    pub load: usize,
    pub sdmm_compute: usize,
    pub dmm_compute: usize,
    pub data_move: usize,
}

impl PhaseCycles {
    pub fn compute(&self) -> usize {
        self.sdmm_compute + self.dmm_compute
    }

    pub fn total(&self) -> usize {
        self.load + self.compute() + self.data_move
    }
}

/// Where one PE's cycles went while executing schedules.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeBreakdown {
    pub compute: usize,
    pub empty_row: usize,
    pub collision: usize,
    pub imbalance: usize,
}

impl PeBreakdown {
    pub fn total(&self) -> usize {
        self.compute + self.empty_row + self.collision + self.imbalance
    }

    /// Fraction of cycles not spent on multiply-accumulate.
    pub fn idle_fraction(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => 1.0 - self.compute as f64 / t as f64,
        }
    }

    fn add(&mut self, c: &SlotCounts) {
        self.compute += c.valid;
        self.empty_row += c.empty_row;
        self.collision += c.stall_idle;
        self.imbalance += c.pad_idle;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileRecord {
    pub step: String,
    pub mode: OperandMode,
    pub col_offset: usize,
    pub out_col_offset: usize,
    pub load_cycles: usize,
    pub cycles: usize,
    pub slots: SlotCounts,
}

/// Cycle accounting for one or more execution steps.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleReport {
    pub phases: PhaseCycles,
    pub sdmm_per_pe: Vec<PeBreakdown>,
    pub dmm_per_pe: Vec<PeBreakdown>,
    pub tiles: Vec<TileRecord>,
}

impl CycleReport {
    pub fn new(pes: usize) -> Self {
        CycleReport {
            phases: PhaseCycles::default(),
            sdmm_per_pe: vec![PeBreakdown::default(); pes],
            dmm_per_pe: vec![PeBreakdown::default(); pes],
            tiles: Vec::new(),
        }
    }

    pub fn total_cycles(&self) -> usize {
        self.phases.total()
    }

    pub(crate) fn record_tile(&mut self, record: TileRecord, per_pe: &[SlotCounts]) {
        self.phases.load += record.load_cycles;
        let breakdown = match record.mode {
            OperandMode::Sparse => {
                self.phases.sdmm_compute += record.cycles;
                &mut self.sdmm_per_pe
            }
            OperandMode::Dense => {
                self.phases.dmm_compute += record.cycles;
                &mut self.dmm_per_pe
            }
        };
        for (b, c) in breakdown.iter_mut().zip(per_pe) {
            b.add(c);
        }
        self.tiles.push(record);
    }

    pub fn merge(&mut self, other: &CycleReport) {
        if self.sdmm_per_pe.is_empty() {
            self.sdmm_per_pe = vec![PeBreakdown::default(); other.sdmm_per_pe.len()];
            self.dmm_per_pe = vec![PeBreakdown::default(); other.dmm_per_pe.len()];
        }
        self.phases.load += other.phases.load;
        self.phases.sdmm_compute += other.phases.sdmm_compute;
        self.phases.dmm_compute += other.phases.dmm_compute;
        self.phases.data_move += other.phases.data_move;
        for (a, b) in self.sdmm_per_pe.iter_mut().zip(&other.sdmm_per_pe) {
            a.compute += b.compute;
            a.empty_row += b.empty_row;
            a.collision += b.collision;
            a.imbalance += b.imbalance;
        }
        for (a, b) in self.dmm_per_pe.iter_mut().zip(&other.dmm_per_pe) {
            a.compute += b.compute;
            a.empty_row += b.empty_row;
            a.collision += b.collision;
            a.imbalance += b.imbalance;
        }
        self.tiles.extend(other.tiles.iter().cloned());
    }

    pub fn relabel(&mut self, step: &str) {
        for t in &mut self.tiles {
            t.step = step.to_string();
        }
    }

    /// Every PE's breakdown must cover exactly the schedule cycles of its
    /// mode, and the tile records must add up to the phase totals.
    pub fn check_accounting(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(format!("cycle accounting: {msg}")));
        let by_mode = |mode| self.tiles.iter().filter(|t| t.mode == mode).map(|t| t.cycles).sum::<usize>();
        let sdmm = by_mode(OperandMode::Sparse);
        let dmm = by_mode(OperandMode::Dense);
        if sdmm != self.phases.sdmm_compute || dmm != self.phases.dmm_compute {
            return fail(format!("tile cycles {sdmm}/{dmm} vs phases {:?}", self.phases));
        }
        let load: usize = self.tiles.iter().map(|t| t.load_cycles).sum();
        if load != self.phases.load {
            return fail(format!("tile loads {load} vs phase {}", self.phases.load));
        }
        for (pe, b) in self.sdmm_per_pe.iter().enumerate() {
            if b.total() != sdmm {
                return fail(format!("SDMM PE {pe} covers {} of {sdmm} cycles", b.total()));
            }
        }
        for (pe, b) in self.dmm_per_pe.iter().enumerate() {
            if b.total() != dmm {
                return fail(format!("DMM PE {pe} covers {} of {dmm} cycles", b.total()));
            }
        }
        Ok(())
    }

    /// Sum of the SDMM breakdown over all PEs.
    pub fn sdmm_totals(&self) -> PeBreakdown {
        let mut t = PeBreakdown::default();
        for b in &self.sdmm_per_pe {
            t.compute += b.compute;
            t.empty_row += b.empty_row;
            t.collision += b.collision;
            t.imbalance += b.imbalance;
        }
        t
    }

    /// Phase table followed by the per-PE SDMM breakdown.
    pub fn to_table(&self) -> String {
        let p = &self.phases;
        let total = p.total().max(1) as f64;
        let mut s = String::new();
        let _ = writeln!(s, "phase,cycles,share");
        for (name, v) in
            [("load", p.load), ("sdmm", p.sdmm_compute), ("dmm", p.dmm_compute), ("data_move", p.data_move)]
        {
            let _ = writeln!(s, "{name},{v},{:.4}", v as f64 / total);
        }
        let _ = writeln!(s, "total,{},1.0000", p.total());
        let _ = writeln!(s);
        let _ = writeln!(s, "pe,compute,empty_row,collision,imbalance,idle_fraction");
        for (pe, b) in self.sdmm_per_pe.iter().enumerate() {
            let _ = writeln!(
                s,
                "{pe},{},{},{},{},{:.4}",
                b.compute,
                b.empty_row,
                b.collision,
                b.imbalance,
                b.idle_fraction()
            );
        }
        s
    }
}
