use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::Format;
use crate::pcoo::PacketLayout;
use crate::schedule::{pe_rows, schedule_stats, ArchConfig, OperandMode, ScheduleStats, ScheduledTile, TileSchedule};

/// Sidecar record written next to the `.pcoo` streams of a preprocessing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleMetadata {
    pub config: ArchConfig,
    pub operands: Vec<OperandMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperandMetadata {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub mode: OperandMode,
    pub format: Format,
    /// Width of the packet value field in this operand's streams.
    pub value_bits: u32,
    /// Global rows handled by each PE, in order.
    pub row_maps: Vec<Vec<usize>>,
    pub tiles: Vec<TileMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileMetadata {
    pub file: String,
    pub row_offset: usize,
    pub col_offset: usize,
    pub width: usize,
    pub stats: ScheduleStats,
}

impl OperandMetadata {
    pub fn describe(name: &str, cols: usize, nnz: usize, format: Format, tiles: &[ScheduledTile], pes: usize) -> Self {
        let rows = tiles.first().map_or(0, |t| t.rows);
        OperandMetadata {
            name: name.to_string(),
            rows,
            cols,
            nnz,
            mode: tiles.first().map_or(OperandMode::Sparse, |t| t.mode),
            format,
            value_bits: tiles.first().map_or(0, |t| t.layout.value_bits()),
            row_maps: (0..pes).map(|p| pe_rows(rows, pes, p).collect()).collect(),
            tiles: tiles
                .iter()
                .enumerate()
                .map(|(i, t)| TileMetadata {
                    file: format!("{name}_tile{i:04}.pcoo"),
                    row_offset: 0,
                    col_offset: t.col_offset,
                    width: t.width,
                    stats: schedule_stats(&t.schedule),
                })
                .collect(),
        }
    }

    /// Rebuilds scheduled tiles from decoded streams (in tile order).
    pub fn restore(&self, config: &ArchConfig, schedules: Vec<TileSchedule>) -> Result<Vec<ScheduledTile>> {
        if schedules.len() != self.tiles.len() {
            return Err(Error::ScheduleMismatch(format!(
                "{}: {} streams for {} tiles",
                self.name,
                schedules.len(),
                self.tiles.len()
            )));
        }
        let layout = PacketLayout::new(config.tile_width, self.value_bits)?;
        schedules
            .into_iter()
            .zip(&self.tiles)
            .map(|(schedule, meta)| {
                if schedule.pes() != config.pes || schedule.cycles() != meta.stats.cycles {
                    return Err(Error::ScheduleMismatch(format!("{} does not match its metadata", meta.file)));
                }
                Ok(ScheduledTile {
                    schedule,
                    layout,
                    mode: self.mode,
                    rows: self.rows,
                    col_offset: meta.col_offset,
                    width: meta.width,
                })
            })
            .collect()
    }
}

impl ScheduleMetadata {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn operand(&self, name: &str) -> Option<&OperandMetadata> {
        self.operands.iter().find(|o| o.name == name)
    }
}
