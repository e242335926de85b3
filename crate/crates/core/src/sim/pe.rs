use crate::error::{Error, Result};
use crate::fixed::mac;
use crate::pcoo::PcooPacket;

/// One processing element: `lanes` 32-bit accumulators plus the count of
/// rows it has finished, advanced on every EOR.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeState {
    pub acc: Vec<i32>,
    pub rows_done: usize,
    /// `true` selects the packet's own value; `false` selects the
    /// edge-weight memory (dense left operand).
    pub sparse_flag: bool,
    value_bits: u32,
}

impl PeState {
    pub fn new(lanes: usize, sparse_flag: bool, value_bits: u32) -> Self {
        PeState { acc: vec![0; lanes], rows_done: 0, sparse_flag, value_bits }
    }

    /// Left-operand value selected for a valid packet.
    pub fn operand(&self, pkt: &PcooPacket, ewm_value: i32) -> i32 {
        match (self.sparse_flag, self.value_bits) {
            (true, 0) => 1,
            (true, _) => pkt.value,
            (false, _) => ewm_value,
        }
    }

    /// Advances one cycle.
    ///
    /// On SOR the accumulators are seeded from `partial`, the row's running
    /// result from earlier tiles. A valid packet then multiplies its operand
    /// into `w_row`. On EOR the accumulators are returned for write-back.
    /// `row` is the global row for diagnostics.
    pub fn step(
        &mut self,
        pkt: &PcooPacket,
        ewm_value: i32,
        w_row: &[i32],
        partial: &[i32],
        row: usize,
    ) -> Result<Option<&[i32]>> {
        if pkt.is_idle() {
            return Ok(None);
        }
        if pkt.sor {
            self.acc.copy_from_slice(partial);
        }
        if pkt.vld {
            let a = self.operand(pkt, ewm_value);
            for (k, (acc, &w)) in self.acc.iter_mut().zip(w_row).enumerate() {
                *acc = mac(*acc, a, w).ok_or(Error::Overflow { row, col: k })?;
            }
        }
        if pkt.eor {
            self.rows_done += 1;
            return Ok(Some(&self.acc));
        }
        Ok(None)
    }
}
