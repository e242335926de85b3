use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pcoo::PacketLayout;

/// Architecture parameters shared by the scheduler and the simulator.
///
/// `tile_width = lanes * row_groups`, so each of the `row_groups` banks in a
/// replica holds `tile_width / row_groups = lanes` rows of the dense tile.
/// PEs are split into `replicas` contiguous groups; group `q` reads only
/// from replica `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub pes: usize,
    pub lanes: usize,
    pub replicas: usize,
    pub tile_width: usize,
    pub value_bits: u32,
    pub load_bw: usize,
    pub move_bw: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig { pes: 32, lanes: 16, replicas: 4, tile_width: 512, value_bits: 4, load_bw: 64, move_bw: 16 }
    }
}

impl ArchConfig {
    pub fn new(pes: usize, lanes: usize, replicas: usize, tile_width: usize, value_bits: u32) -> Result<Self> {
        let cfg = ArchConfig { pes, lanes, replicas, tile_width, value_bits, ..ArchConfig::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.pes == 0 || self.lanes == 0 || self.replicas == 0 {
            return bad("PE, lane and replica counts must be positive".into());
        }
        if !self.pes.is_multiple_of(self.replicas) {
            return bad(format!("{} PEs do not split into {} replica groups", self.pes, self.replicas));
        }
        if !self.tile_width.is_power_of_two() || !self.lanes.is_power_of_two() {
            return bad(format!("tile width {} and lanes {} must be powers of two", self.tile_width, self.lanes));
        }
        if self.tile_width < self.lanes {
            return bad(format!("tile width {} smaller than lane count {}", self.tile_width, self.lanes));
        }
        if self.load_bw == 0 || self.move_bw == 0 {
            return bad("bandwidths must be positive".into());
        }
        PacketLayout::new(self.tile_width, self.value_bits)?;
        Ok(())
    }

    /// Number of banks per replica, `T / C`.
    pub fn row_groups(&self) -> usize {
        self.tile_width / self.lanes
    }

    /// Rows of the dense tile held by one bank.
    pub fn bank_depth(&self) -> usize {
        self.tile_width / self.row_groups()
    }

    pub fn group_size(&self) -> usize {
        self.pes / self.replicas
    }

    pub fn group_of(&self, pe: usize) -> usize {
        pe / self.group_size()
    }

    pub fn bank_of(&self, row: usize) -> usize {
        row % self.row_groups()
    }

    pub fn layout(&self) -> Result<PacketLayout> {
        PacketLayout::new(self.tile_width, self.value_bits)
    }

    pub fn with_value_bits(self, value_bits: u32) -> Self {
        ArchConfig { value_bits, ..self }
    }
}
